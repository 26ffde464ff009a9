#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "verifsim/core.hpp"
#include "verifsim/detnet.hpp"

namespace verifsim::nettap {

enum class MessageKind { gradient_allreduce, weight_broadcast, data_shard, other };

inline std::string to_string(MessageKind k) {
    switch (k) {
        case MessageKind::gradient_allreduce: return "gradient_allreduce";
        case MessageKind::weight_broadcast: return "weight_broadcast";
        case MessageKind::data_shard: return "data_shard";
        case MessageKind::other: return "other";
    }
    throw std::logic_error("unknown MessageKind");
}

inline MessageKind message_kind_from_string(const std::string& s) {
    if (s == "gradient_allreduce") return MessageKind::gradient_allreduce;
    if (s == "weight_broadcast") return MessageKind::weight_broadcast;
    if (s == "data_shard") return MessageKind::data_shard;
    if (s == "other") return MessageKind::other;
    throw std::invalid_argument("unknown message kind: " + s);
}

struct ClusterMessage {
    int64_t tick = 0;  // logical step: global batch index for all-reduce traffic
    int32_t src_node = 0;
    int32_t dst_node = 0;
    MessageKind kind = MessageKind::other;
    Hash32 payload_commitment{};
    int64_t payload_bytes = 0;

    friend bool operator==(const ClusterMessage&, const ClusterMessage&) = default;
};

inline void to_json(Json& j, const ClusterMessage& m) {
    j = Json{{"dst_node", m.dst_node},
             {"kind", to_string(m.kind)},
             {"payload_bytes", m.payload_bytes},
             {"payload_commitment", to_base64(m.payload_commitment)},
             {"src_node", m.src_node},
             {"tick", m.tick}};
}
inline void from_json(const Json& j, ClusterMessage& m) {
    j.at("dst_node").get_to(m.dst_node);
    m.kind = message_kind_from_string(j.at("kind").get<std::string>());
    j.at("payload_bytes").get_to(m.payload_bytes);
    Bytes pc = from_base64(j.at("payload_commitment").get<std::string>());
    if (pc.size() != 32) throw std::invalid_argument("message: bad payload commitment length");
    std::copy(pc.begin(), pc.end(), m.payload_commitment.begin());
    j.at("src_node").get_to(m.src_node);
    j.at("tick").get_to(m.tick);
}

struct TapEntry {
    uint64_t stream_index = 0;
    ClusterMessage message;

    friend bool operator==(const TapEntry&, const TapEntry&) = default;
};

inline void to_json(Json& j, const TapEntry& e) {
    j = Json{{"message", e.message}, {"stream_index", e.stream_index}};
}
inline void from_json(const Json& j, TapEntry& e) {
    j.at("message").get_to(e.message);
    j.at("stream_index").get_to(e.stream_index);
}

struct TapLog {
    int64_t sample_rate_ppm = 1000000;
    Seed32 tap_seed{};
    std::vector<TapEntry> entries;
    // Taps only see ciphertext when payloads are encrypted without key escrow;
    // analysis then degrades to inconclusive.
    bool payloads_encrypted = false;

    friend bool operator==(const TapLog&, const TapLog&) = default;
};

inline void to_json(Json& j, const TapLog& t) {
    j = Json{{"entries", t.entries},
             {"payloads_encrypted", t.payloads_encrypted},
             {"sample_rate_ppm", t.sample_rate_ppm},
             {"tap_seed", to_hex(t.tap_seed)}};
}
inline void from_json(const Json& j, TapLog& t) {
    j.at("entries").get_to(t.entries);
    j.at("payloads_encrypted").get_to(t.payloads_encrypted);
    j.at("sample_rate_ppm").get_to(t.sample_rate_ppm);
    t.tap_seed = array_from_hex<32>(j.at("tap_seed").get<std::string>());
}

// ---------------------------------------------------------------------------
// Message stream generation
// ---------------------------------------------------------------------------

namespace detail {

inline detnet::Batch shard_of(const detnet::Batch& batch, uint32_t node, uint32_t node_count,
                              int32_t in_dim, int32_t out_dim) {
    uint32_t per = batch.items / node_count;
    detnet::Batch shard;
    shard.batch_index = batch.batch_index;
    shard.items = per;
    shard.inputs.assign(batch.inputs.begin() + static_cast<size_t>(node) * per * in_dim,
                        batch.inputs.begin() + static_cast<size_t>(node + 1) * per * in_dim);
    shard.targets.assign(batch.targets.begin() + static_cast<size_t>(node) * per * out_dim,
                         batch.targets.begin() + static_cast<size_t>(node + 1) * per * out_dim);
    return shard;
}

inline Hash32 accum_commitment(const detnet::GradAccum& acc) {
    Json j = Json::object();
    Json w = Json::array();
    Json b = Json::array();
    for (const auto& layer : acc.w_acc) w.push_back(layer);
    for (const auto& layer : acc.b_acc) b.push_back(layer);
    j["b_acc"] = b;
    j["w_acc"] = w;
    return commit(canonical_dump(j));
}

}  // namespace detail

// Data-parallel schedule for one training run. Per optimizer step each node
// computes the gradient accumulator of its item shard and sends it around the
// ring (the payload a tap at that link would see); after each segment the
// lead node broadcasts the updated weights to the others. The reduced
// gradient is the wrapped sum of shard accumulators, which equals the
// single-node full-batch gradient bit for bit.
inline std::vector<ClusterMessage> emit_training_messages(const WorkloadDeclaration& decl,
                                                          const std::vector<detnet::Batch>& batches,
                                                          detnet::FaultInjector* fault = nullptr) {
    decl.validate();
    if (decl.node_count < 2) throw std::invalid_argument("emit_training_messages: node_count must be >= 2");
    if (decl.batch_size % decl.node_count != 0) {
        throw std::invalid_argument("emit_training_messages: node_count must divide batch size");
    }
    int32_t in_dim = decl.architecture.front();
    int32_t out_dim = decl.architecture.back();
    uint32_t n = decl.node_count;

    std::vector<ClusterMessage> stream;
    std::vector<uint32_t> order = detnet::permute_data_order(decl.batch_count(), decl.master_seed);

    detnet::Checkpoint current =
        detnet::make_checkpoint(0, detnet::init_weights(decl.architecture, decl.master_seed), 0);
    std::vector<detnet::Batch> slice;
    for (uint32_t seg = 0; seg < decl.segment_count; ++seg) {
        slice.clear();
        for (uint32_t k = 0; k < decl.batches_per_segment; ++k) {
            slice.push_back(batches[order[seg * decl.batches_per_segment + k]]);
        }
        // Replay the segment step by step so shard payloads see the same
        // weight states the optimizer does.
        detnet::Weights w = current.weights;
        auto st = detnet::detail::OptimizerState::zeros_like(w);
        for (uint32_t k = 0; k < decl.batches_per_segment; ++k) {
            const detnet::Batch& batch = slice[k];
            int64_t step_tick = static_cast<int64_t>(seg) * decl.batches_per_segment + k;
            detnet::GradAccum reduced = detnet::GradAccum::zeros_like(w);
            for (uint32_t node = 0; node < n; ++node) {
                detnet::Batch shard = detail::shard_of(batch, node, n, in_dim, out_dim);
                detnet::GradAccum acc = detnet::backward_accumulate(w, shard, fault);
                ClusterMessage msg;
                msg.tick = step_tick;
                msg.src_node = static_cast<int32_t>(node);
                msg.dst_node = static_cast<int32_t>((node + 1) % n);
                msg.kind = MessageKind::gradient_allreduce;
                msg.payload_commitment = detail::accum_commitment(acc);
                msg.payload_bytes = static_cast<int64_t>(w.parameter_count()) * 8;
                stream.push_back(msg);
                reduced.add(acc);
            }
            detnet::Weights grad = detnet::finalize_gradient(w, reduced);
            detnet::detail::apply_update(w, grad, decl.optimizer_family, decl.optimizer_params, st);
        }
        current = detnet::make_checkpoint(current.step_index + 1, std::move(w),
                                          current.rng_cursor + decl.batches_per_segment);
        for (uint32_t node = 1; node < n; ++node) {
            ClusterMessage msg;
            msg.tick = static_cast<int64_t>(seg + 1) * decl.batches_per_segment - 1;
            msg.src_node = 0;
            msg.dst_node = static_cast<int32_t>(node);
            msg.kind = MessageKind::weight_broadcast;
            msg.payload_commitment = current.weights_commitment;
            msg.payload_bytes = static_cast<int64_t>(current.weights.parameter_count()) * 4;
            stream.push_back(msg);
        }
    }
    return stream;
}

// ---------------------------------------------------------------------------
// Sampling and analysis
// ---------------------------------------------------------------------------

// Retain each message independently with probability p, decided by a seeded
// hash of the stream index: deterministic and auditable after the fact.
inline TapLog tap_sample(const std::vector<ClusterMessage>& stream, int64_t sample_rate_ppm,
                         const Seed32& tap_seed) {
    if (sample_rate_ppm <= 0 || sample_rate_ppm > 1000000) {
        throw std::invalid_argument("tap_sample: sample rate must be in (0, 1e6] ppm");
    }
    TapLog log;
    log.sample_rate_ppm = sample_rate_ppm;
    log.tap_seed = tap_seed;
    for (size_t i = 0; i < stream.size(); ++i) {
        uint64_t draw = prng_draw(tap_seed, "tap", i);
        if (static_cast<int64_t>(draw % 1000000) < sample_rate_ppm) {
            log.entries.push_back({i, stream[i]});
        }
    }
    return log;
}

// Top-down tap analysis: replay the declared schedule, derive the expected
// payload commitment for every (tick, src, dst, kind) slot, and compare the
// sampled messages against it. Sampled traffic with no expected slot is
// undeclared; an expected slot with the wrong payload is a falsified workload.
inline Verdict analyze_tap_log(const TapLog& tap_log, const WorkloadDeclaration& decl,
                               const std::vector<detnet::Batch>& batches) {
    if (tap_log.payloads_encrypted) {
        return verdict_inconclusive(
            {{"nettap.analysis", "payloads encrypted without key escrow", "plaintext or escrowed key"}});
    }
    std::vector<ClusterMessage> expected;
    try {
        expected = emit_training_messages(decl, batches);
    } catch (const std::exception& e) {
        return verdict_inconclusive({{"nettap.analysis", e.what(), "replayable declaration"}});
    }

    using SlotKey = std::tuple<int64_t, int32_t, int32_t, std::string>;
    std::map<SlotKey, Hash32> slots;
    for (const auto& m : expected) {
        slots[{m.tick, m.src_node, m.dst_node, to_string(m.kind)}] = m.payload_commitment;
    }

    std::vector<Evidence> problems;
    for (const auto& entry : tap_log.entries) {
        const ClusterMessage& m = entry.message;
        SlotKey key{m.tick, m.src_node, m.dst_node, to_string(m.kind)};
        auto it = slots.find(key);
        std::string slot_desc = "tick " + std::to_string(m.tick) + " " + std::to_string(m.src_node) +
                                "->" + std::to_string(m.dst_node) + " " + to_string(m.kind);
        if (it == slots.end()) {
            if (problems.size() < 64) {
                problems.push_back({"nettap.undeclared_traffic", slot_desc, "declared schedule slot"});
            }
        } else if (it->second != m.payload_commitment) {
            if (problems.size() < 64) {
                problems.push_back({"nettap.falsified_payload", slot_desc, "matching commitment"});
            }
        }
    }
    if (!problems.empty()) return verdict_fail(std::move(problems));
    return verdict_pass({{"nettap.analysis", fmt_value(static_cast<int64_t>(tap_log.entries.size())),
                          "all sampled messages match the declared schedule"}});
}

// ---------------------------------------------------------------------------
// Memory fill challenge
// ---------------------------------------------------------------------------

constexpr int64_t kFillBlockBytes = 4096;

// What the Prover's cluster actually does with uploaded blocks. A cluster
// hoarding undeclared data has less usable memory than declared and cannot
// echo everything back.
struct ClusterMemoryState {
    int64_t declared_bytes = 0;
    int64_t hidden_bytes = 0;  // occupied by undeclared content

    int64_t usable_bytes() const { return declared_bytes - hidden_bytes; }
};

inline Hash32 fill_block_hash(const Seed32& challenge_seed, int64_t block_index) {
    Bytes content;
    content.reserve(kFillBlockBytes);
    for (int64_t k = 0; k < kFillBlockBytes / 8; ++k) {
        append_u64_be(content, prng_draw(challenge_seed, "fill." + std::to_string(block_index), k));
    }
    return commit(content);
}

inline int64_t fill_block_count(int64_t declared_bytes, int64_t fill_ppm) {
    return floor_div64(declared_bytes * fill_ppm, 1000000) / kFillBlockBytes;
}

// The Prover side of the challenge: echo back the digest of each stored
// block. Blocks beyond usable capacity were never stored, so their echoes are
// wrong.
struct FillTranscript {
    Seed32 challenge_seed{};
    int64_t fill_ppm = 0;
    std::vector<Hash32> echoes;
};

inline void to_json(Json& j, const FillTranscript& t) {
    std::vector<std::string> hex;
    hex.reserve(t.echoes.size());
    for (const auto& h : t.echoes) hex.push_back(to_hex(h));
    j = Json{{"challenge_seed", to_hex(t.challenge_seed)}, {"echoes", hex}, {"fill_ppm", t.fill_ppm}};
}
inline void from_json(const Json& j, FillTranscript& t) {
    t.challenge_seed = array_from_hex<32>(j.at("challenge_seed").get<std::string>());
    j.at("fill_ppm").get_to(t.fill_ppm);
    t.echoes.clear();
    for (const auto& h : j.at("echoes")) t.echoes.push_back(array_from_hex<32>(h.get<std::string>()));
}

inline FillTranscript prover_fill_echoes(const ClusterMemoryState& cluster, const Seed32& challenge_seed,
                                         int64_t fill_ppm) {
    if (fill_ppm < 0 || fill_ppm > 1000000) {
        throw std::invalid_argument("prover_fill_echoes: fill fraction out of [0, 1e6] ppm");
    }
    FillTranscript t;
    t.challenge_seed = challenge_seed;
    t.fill_ppm = fill_ppm;
    int64_t n_blocks = fill_block_count(cluster.declared_bytes, fill_ppm);
    int64_t capacity_blocks = cluster.usable_bytes() / kFillBlockBytes;
    for (int64_t i = 0; i < n_blocks; ++i) {
        t.echoes.push_back(i < capacity_blocks ? fill_block_hash(challenge_seed, i)
                                               : commit(std::string("dropped")));
    }
    return t;
}

// Verifier side: regenerate every block digest and compare. A cluster hiding
// an s fraction of its memory fails whenever fill > 1 - s.
inline Verdict verify_fill_transcript(int64_t declared_bytes, const FillTranscript& t) {
    if (t.fill_ppm == 0) {
        return verdict_inconclusive({{"nettap.memory_fill", "0", "positive fill fraction"}});
    }
    int64_t n_blocks = fill_block_count(declared_bytes, t.fill_ppm);
    if (static_cast<int64_t>(t.echoes.size()) != n_blocks) {
        return verdict_fail({{"nettap.memory_fill_echo_count",
                              fmt_value(static_cast<int64_t>(t.echoes.size())), fmt_value(n_blocks)}});
    }
    int64_t failed = 0;
    int64_t first_failure = -1;
    for (int64_t i = 0; i < n_blocks; ++i) {
        if (t.echoes[i] != fill_block_hash(t.challenge_seed, i)) {
            if (first_failure < 0) first_failure = i;
            ++failed;
        }
    }
    if (failed > 0) {
        return verdict_fail({{"nettap.memory_fill_failed_blocks", fmt_value(failed), "0"},
                             {"nettap.memory_fill_first_failure", fmt_value(first_failure), "none"}});
    }
    return verdict_pass({{"nettap.memory_fill", fmt_value(n_blocks), "all blocks echoed"}});
}

struct FillChallengeResult {
    FillTranscript transcript;
    Verdict verdict;
};

// One-shot challenge: upload seeded blocks totaling fill_fraction of declared
// memory, then check every echo.
inline FillChallengeResult memory_fill_challenge(const ClusterMemoryState& cluster,
                                                 const Seed32& challenge_seed, int64_t fill_ppm) {
    FillChallengeResult result;
    result.transcript = prover_fill_echoes(cluster, challenge_seed, fill_ppm);
    result.verdict = verify_fill_transcript(cluster.declared_bytes, result.transcript);
    return result;
}

}  // namespace verifsim::nettap
