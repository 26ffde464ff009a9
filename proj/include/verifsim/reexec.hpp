#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "verifsim/core.hpp"
#include "verifsim/detnet.hpp"

namespace verifsim::reexec {

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct SegmentSample {
    std::vector<uint32_t> indices;  // sorted, without replacement
    Seed32 verifier_seed{};
};

// Uniform sample of k segments without replacement: seeded Fisher-Yates over
// [0, segment_count), first k entries.
inline SegmentSample select_segments(uint32_t segment_count, const Seed32& verifier_seed, uint32_t k) {
    if (k < 1 || k > segment_count) throw std::invalid_argument("select_segments: k out of [1, segment_count]");
    std::vector<uint32_t> perm(segment_count);
    for (uint32_t i = 0; i < segment_count; ++i) perm[i] = i;
    uint64_t draw_index = 0;
    for (uint32_t i = segment_count - 1; i > 0; --i) {
        uint64_t j = prng_draw(verifier_seed, "segment-sample", draw_index++) % (static_cast<uint64_t>(i) + 1);
        std::swap(perm[i], perm[static_cast<uint32_t>(j)]);
    }
    SegmentSample sample;
    sample.verifier_seed = verifier_seed;
    sample.indices.assign(perm.begin(), perm.begin() + k);
    std::sort(sample.indices.begin(), sample.indices.end());
    return sample;
}

// Which constraints the Verifier runs. The default profile keeps everything
// on; init and order checks are the non-negotiable core.
struct ConstraintSuite {
    bool init_check = true;
    bool order_check = true;
    bool memorization_check = true;
    bool continuity_check = true;
    bool optimizer_check = true;
    bool duplicate_check = true;

    void validate() const {
        if (!init_check || !order_check) {
            throw std::invalid_argument("ConstraintSuite: default profile requires init and order checks");
        }
    }
};

// ---------------------------------------------------------------------------
// Faithfulness via partial re-execution
// ---------------------------------------------------------------------------

struct FaithfulnessConfig {
    // When fault injection is modeled, one replay retry is allowed before a
    // mismatch counts as a violation (re-doing computations absorbs rare
    // hardware errors on the Verifier's own replay hardware).
    bool fault_injection_mode = false;
    detnet::FaultInjector verifier_fault;  // used only when fault_injection_mode
};

// Replay each sampled segment from its starting checkpoint and demand the
// exact committed result. The integer engine makes equality the right
// comparison: there is no tolerance to tune.
inline Verdict verify_faithfulness(const WorkloadDeclaration& decl,
                                   const detnet::TrainingTranscript& transcript,
                                   const SegmentSample& sample,
                                   const std::vector<detnet::Batch>& batches,
                                   const FaithfulnessConfig& config = {}) {
    if (transcript.checkpoints.size() != decl.segment_count + 1 ||
        transcript.segments.size() != decl.segment_count) {
        return verdict_inconclusive({{"reexec.faithfulness", "missing checkpoints", "full transcript"}});
    }
    if (detnet::dataset_commitment(batches) != decl.data_commitment) {
        return verdict_inconclusive({{"reexec.faithfulness", "data slice unavailable or mismatched",
                                      "declared data commitment"}});
    }

    std::vector<Evidence> problems;
    std::vector<detnet::Batch> slice;
    for (uint32_t seg : sample.indices) {
        if (seg >= decl.segment_count) throw std::invalid_argument("verify_faithfulness: segment out of range");
        slice.clear();
        for (uint32_t idx : transcript.segments[seg].batch_indices) {
            if (idx >= batches.size()) {
                return verdict_inconclusive({{"reexec.faithfulness", "segment references missing batch",
                                              "batch " + std::to_string(idx)}});
            }
            slice.push_back(batches[idx]);
        }
        const Hash32& claimed = transcript.checkpoints[seg + 1].weights_commitment;
        bool match = false;
        uint32_t attempts = config.fault_injection_mode ? 2 : 1;
        for (uint32_t attempt = 0; attempt < attempts && !match; ++attempt) {
            detnet::FaultInjector fault = config.verifier_fault;
            fault.attempt = attempt;
            detnet::FaultInjector* fault_ptr = config.fault_injection_mode ? &fault : nullptr;
            detnet::Checkpoint replayed =
                detnet::train_segment(transcript.checkpoints[seg], slice, decl, fault_ptr);
            match = replayed.weights_commitment == claimed;
        }
        if (!match && problems.size() < 32) {
            problems.push_back({"reexec.replay_mismatch.segment_" + std::to_string(seg),
                                "commitment differs", to_hex(claimed)});
        }
    }
    if (!problems.empty()) return verdict_fail(std::move(problems));
    return verdict_pass({{"reexec.faithfulness", fmt_value(static_cast<int64_t>(sample.indices.size())),
                          "all sampled segments replay exactly"}});
}

// ---------------------------------------------------------------------------
// Init and data-order constraints
// ---------------------------------------------------------------------------

inline Verdict verify_init_and_order(const WorkloadDeclaration& decl,
                                     const detnet::TrainingTranscript& transcript) {
    std::vector<Evidence> problems;
    if (transcript.checkpoints.empty()) {
        return verdict_inconclusive({{"reexec.init_order", "no checkpoints", "checkpoint 0 present"}});
    }
    Hash32 expected_init = commit_value(detnet::init_weights(decl.architecture, decl.master_seed));
    if (expected_init != transcript.checkpoints.front().weights_commitment) {
        problems.push_back({"reexec.init_mismatch", to_hex(transcript.checkpoints.front().weights_commitment),
                            to_hex(expected_init)});
    }
    std::vector<uint32_t> expected_order = detnet::permute_data_order(decl.batch_count(), decl.master_seed);
    if (expected_order != transcript.batch_order) {
        size_t first_diff = 0;
        while (first_diff < expected_order.size() && first_diff < transcript.batch_order.size() &&
               expected_order[first_diff] == transcript.batch_order[first_diff]) {
            ++first_diff;
        }
        problems.push_back({"reexec.order_mismatch", "first divergence at position " + std::to_string(first_diff),
                            "seed-derived permutation"});
    }
    if (!problems.empty()) return verdict_fail(std::move(problems));
    return verdict_pass({{"reexec.init_order", "seed-derived", "init and data order recomputed from master seed"}});
}

// ---------------------------------------------------------------------------
// Memorization and glue detection
// ---------------------------------------------------------------------------

inline int64_t loss_raw_on(const detnet::Weights& w, const std::vector<detnet::Batch>& batches) {
    int64_t total = 0;
    for (const auto& b : batches) total += detnet::forward_batch(w, b).loss.raw;
    return total;
}

// A checkpoint produced by training on `recent` should have memorized it:
// the loss improvement on recent data must beat the improvement on held-out
// data by more than `margin_raw`.
inline Verdict memorization_check(const detnet::Checkpoint& before, const detnet::Checkpoint& after,
                                  const std::vector<detnet::Batch>& recent,
                                  const std::vector<detnet::Batch>& holdout, int64_t margin_raw = 0) {
    int64_t recent_before = loss_raw_on(before.weights, recent);
    int64_t recent_after = loss_raw_on(after.weights, recent);
    int64_t holdout_before = loss_raw_on(before.weights, holdout);
    int64_t holdout_after = loss_raw_on(after.weights, holdout);
    int64_t delta_recent = recent_after - recent_before;
    int64_t delta_holdout = holdout_after - holdout_before;
    if (delta_recent == 0 && delta_holdout == 0) {
        return verdict_inconclusive({{"reexec.memorization", "both deltas zero", "observable training signal"}});
    }
    Evidence ev{"reexec.memorization_delta_gap", fmt_value(delta_recent - delta_holdout),
                fmt_value(-margin_raw)};
    if (delta_recent < delta_holdout - margin_raw) return verdict_pass({ev});
    return verdict_fail({ev});
}

struct GlueConfig {
    // The memorization arm of the glue test only flags a boundary when the
    // recent-vs-holdout gap is blatant (half the combined delta magnitude),
    // keeping honest noise far away from a false positive. The continuity arm
    // is exact and carries the detection load.
    bool use_memorization = true;
    bool use_continuity = true;
    int64_t memorization_min_margin_raw = 1;
};

// Boundary checks applied to every segment transition: (a) the memorization
// signature of genuine training, (b) a continuity bound on the weight delta
// implied by the declared optimizer. Records of two different runs glued
// together violate continuity at the seam by orders of magnitude.
inline Verdict detect_glue(const detnet::TrainingTranscript& transcript,
                           const std::vector<detnet::Batch>& batches, const GlueConfig& config = {}) {
    const WorkloadDeclaration& decl = transcript.declaration;
    if (decl.segment_count < 2) {
        return verdict_inconclusive({{"reexec.glue", "single segment", "at least 2 segments"}});
    }
    if (transcript.checkpoints.size() != decl.segment_count + 1) {
        return verdict_inconclusive({{"reexec.glue", "missing checkpoints", "full transcript"}});
    }

    // Held-out data the training never saw, regenerable by any party.
    WorkloadDeclaration holdout_decl = decl;
    holdout_decl.master_seed = derive_seed(decl.master_seed, "holdout");
    std::vector<detnet::Batch> holdout{detnet::make_batch(holdout_decl, 0)};

    int64_t continuity_bound = detnet::segment_update_bound_raw(decl);
    std::vector<Evidence> problems;
    std::vector<detnet::Batch> recent;
    for (uint32_t seg = 0; seg < decl.segment_count; ++seg) {
        const detnet::Checkpoint& before = transcript.checkpoints[seg];
        const detnet::Checkpoint& after = transcript.checkpoints[seg + 1];

        if (config.use_continuity) {
            int64_t max_delta = 0;
            for (size_t l = 0; l < before.weights.layers.size(); ++l) {
                const auto& lb = before.weights.layers[l];
                const auto& la = after.weights.layers[l];
                for (size_t i = 0; i < lb.w.size(); ++i) {
                    int64_t d = std::abs(static_cast<int64_t>(la.w[i].raw) - lb.w[i].raw);
                    if (d > max_delta) max_delta = d;
                }
                for (size_t i = 0; i < lb.b.size(); ++i) {
                    int64_t d = std::abs(static_cast<int64_t>(la.b[i].raw) - lb.b[i].raw);
                    if (d > max_delta) max_delta = d;
                }
            }
            if (max_delta > continuity_bound && problems.size() < 32) {
                problems.push_back({"reexec.glue_continuity.boundary_" + std::to_string(seg),
                                    fmt_value(max_delta), fmt_value(continuity_bound)});
            }
        }

        if (config.use_memorization && seg < transcript.segments.size()) {
            recent.clear();
            for (uint32_t idx : transcript.segments[seg].batch_indices) {
                if (idx < batches.size()) recent.push_back(batches[idx]);
            }
            if (!recent.empty()) {
                int64_t dr = loss_raw_on(after.weights, recent) - loss_raw_on(before.weights, recent);
                int64_t dh = loss_raw_on(after.weights, holdout) - loss_raw_on(before.weights, holdout);
                int64_t blatant_margin =
                    (std::abs(dr) + std::abs(dh)) / 2 + config.memorization_min_margin_raw;
                if (dr - dh >= blatant_margin && problems.size() < 32) {
                    problems.push_back({"reexec.glue_memorization.boundary_" + std::to_string(seg),
                                        fmt_value(dr - dh), fmt_value(blatant_margin)});
                }
            }
        }
    }
    if (!problems.empty()) return verdict_fail(std::move(problems));
    return verdict_pass({{"reexec.glue", fmt_value(static_cast<int64_t>(decl.segment_count)),
                          "all boundaries continuous and memorization-consistent"}});
}

// ---------------------------------------------------------------------------
// Inflated compute detection
// ---------------------------------------------------------------------------

// Near-duplicate declarations (same data commitment and architecture) inflate
// apparent compute use; a low duplicate rate is tolerated as caching.
inline Verdict check_inflated_compute(const std::vector<WorkloadDeclaration>& declarations,
                                      double duplicate_rate_threshold = 0.05) {
    if (declarations.empty()) {
        return verdict_pass({{"reexec.duplicate_rate", "0", fmt_value(duplicate_rate_threshold)}});
    }
    size_t duplicates = 0;
    std::vector<std::pair<Hash32, std::vector<int32_t>>> seen;
    for (const auto& d : declarations) {
        std::pair<Hash32, std::vector<int32_t>> key{d.data_commitment, d.architecture};
        if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
            ++duplicates;
        } else {
            seen.push_back(std::move(key));
        }
    }
    double rate = static_cast<double>(duplicates) / declarations.size();
    Evidence ev{"reexec.duplicate_rate", fmt_value(rate), fmt_value(duplicate_rate_threshold)};
    if (rate > duplicate_rate_threshold) return verdict_fail({ev});
    return verdict_pass({ev});
}

// ---------------------------------------------------------------------------
// Property evaluation (Subgoal 1.B)
// ---------------------------------------------------------------------------

// Capability on a restricted-task benchmark, scored as negated mean loss per
// item (higher = more capable). The model passes while its capability stays
// below the threshold, i.e. while it cannot do the prohibited task.
inline Verdict evaluate_properties(const detnet::Weights& weights,
                                   const std::vector<detnet::Batch>& eval_batches,
                                   double capability_threshold) {
    if (eval_batches.empty()) {
        return verdict_inconclusive({{"reexec.properties", "empty evaluation set", "non-empty benchmark"}});
    }
    int64_t loss_raw = 0;
    int64_t items = 0;
    for (const auto& b : eval_batches) {
        loss_raw += detnet::forward_batch(weights, b).loss.raw;
        items += b.items;
    }
    double mean_loss = (static_cast<double>(loss_raw) / FixedPoint::kOneRaw) / static_cast<double>(items);
    double capability = -mean_loss;
    Evidence ev{"reexec.capability_score", fmt_value(capability), fmt_value(capability_threshold)};
    if (capability < capability_threshold) return verdict_pass({ev});
    return verdict_fail({ev});
}

}  // namespace verifsim::reexec
