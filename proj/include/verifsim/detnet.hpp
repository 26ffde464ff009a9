#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "verifsim/core.hpp"

namespace verifsim::detnet {

// Hidden activations are ReLU clamped to [0, 8]; gradients are clamped to
// [-16, 16] per component. Both bounds are part of the declared update rule:
// the clamp keeps every per-step weight delta within lr * kGradClamp, which is
// what the transcript continuity check relies on.
inline constexpr int32_t kActClampRaw = 8 << FixedPoint::kFracBits;
inline constexpr int32_t kGradClampRaw = 16 << FixedPoint::kFracBits;

// ---------------------------------------------------------------------------
// Fault injection (hardware-error model)
// ---------------------------------------------------------------------------

// Optional model of rare hardware faults: one flipped accumulator bit per
// `period_ops` hardware operations, at a seeded uniform position inside each
// period window. The position is keyed by (seed, attempt), so re-running the
// same computation with a bumped attempt counter sees an independent fault
// schedule, the way a second run on physical hardware would.
struct FaultInjector {
    uint64_t period_ops = 1000000000;
    Seed32 seed{};
    uint32_t attempt = 0;

    uint64_t ops_seen = 0;
    uint64_t faults_injected = 0;

    int64_t maybe_corrupt(int64_t acc) {
        if (period_ops == 0) return acc;
        uint64_t before = ops_seen;
        ops_seen += 2;  // one multiply-accumulate = two hardware ops
        for (uint64_t w = before / period_ops; w <= (ops_seen - 1) / period_ops; ++w) {
            if (w != cached_window) {
                cached_window = w;
                cached_pos = w * period_ops +
                             prng_draw(seed, "fault." + std::to_string(attempt), w) % period_ops;
            }
            if (cached_pos >= before && cached_pos < ops_seen) {
                uint64_t bit = prng_draw(seed, "fault-bit." + std::to_string(attempt), faults_injected++) % 64;
                acc = static_cast<int64_t>(static_cast<uint64_t>(acc) ^ (uint64_t{1} << bit));
            }
        }
        return acc;
    }

    // Cache of the current window's scheduled fault position.
    uint64_t cached_window = UINT64_MAX;
    uint64_t cached_pos = 0;
};

// ---------------------------------------------------------------------------
// Model containers
// ---------------------------------------------------------------------------

struct LayerWeights {
    int32_t out_dim = 0;
    int32_t in_dim = 0;
    std::vector<FixedPoint> w;  // row-major [out_dim][in_dim]
    std::vector<FixedPoint> b;  // [out_dim]

    FixedPoint& at(int32_t row, int32_t col) { return w[static_cast<size_t>(row) * in_dim + col]; }
    FixedPoint at(int32_t row, int32_t col) const { return w[static_cast<size_t>(row) * in_dim + col]; }

    friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct Weights {
    std::vector<int32_t> architecture;
    std::vector<LayerWeights> layers;

    void validate() const {
        if (architecture.size() < 2) throw std::invalid_argument("Weights: architecture too short");
        if (layers.size() + 1 != architecture.size()) throw std::invalid_argument("Weights: layer count mismatch");
        for (size_t l = 0; l < layers.size(); ++l) {
            const LayerWeights& lw = layers[l];
            if (lw.in_dim != architecture[l] || lw.out_dim != architecture[l + 1] ||
                lw.w.size() != static_cast<size_t>(lw.in_dim) * lw.out_dim ||
                lw.b.size() != static_cast<size_t>(lw.out_dim)) {
                throw std::invalid_argument("Weights: shape mismatch at layer " + std::to_string(l));
            }
        }
    }

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }

    friend bool operator==(const Weights&, const Weights&) = default;
};

struct Batch {
    uint32_t batch_index = 0;
    uint32_t items = 0;
    std::vector<FixedPoint> inputs;   // row-major [items][in_dim]
    std::vector<FixedPoint> targets;  // row-major [items][out_dim]

    void validate(int32_t in_dim, int32_t out_dim) const {
        if (inputs.size() != static_cast<size_t>(items) * in_dim ||
            targets.size() != static_cast<size_t>(items) * out_dim) {
            throw std::invalid_argument("Batch: shape mismatch");
        }
    }

    friend bool operator==(const Batch&, const Batch&) = default;
};

struct Checkpoint {
    uint32_t step_index = 0;  // segments completed
    Weights weights;
    Hash32 weights_commitment{};
    int64_t rng_cursor = 0;  // batches consumed from the permuted order

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct TickRecord {
    int64_t tick = 0;
    int64_t utilization_ppm = 0;
    int64_t hardware_ops = 0;
    int64_t messages_emitted = 0;

    friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

struct ExecutionTrace {
    std::vector<TickRecord> ticks;

    int64_t total_hardware_ops() const {
        int64_t sum = 0;
        for (const auto& t : ticks) sum += t.hardware_ops;
        return sum;
    }

    friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

// ---------------------------------------------------------------------------
// JSON bindings
// ---------------------------------------------------------------------------

inline void to_json(Json& j, const LayerWeights& l) {
    std::vector<int32_t> w_raw(l.w.size()), b_raw(l.b.size());
    for (size_t i = 0; i < l.w.size(); ++i) w_raw[i] = l.w[i].raw;
    for (size_t i = 0; i < l.b.size(); ++i) b_raw[i] = l.b[i].raw;
    j = Json{{"b_raw", b_raw}, {"in_dim", l.in_dim}, {"out_dim", l.out_dim}, {"w_raw", w_raw}};
}
inline void from_json(const Json& j, LayerWeights& l) {
    j.at("in_dim").get_to(l.in_dim);
    j.at("out_dim").get_to(l.out_dim);
    auto w_raw = j.at("w_raw").get<std::vector<int32_t>>();
    auto b_raw = j.at("b_raw").get<std::vector<int32_t>>();
    l.w.resize(w_raw.size());
    l.b.resize(b_raw.size());
    for (size_t i = 0; i < w_raw.size(); ++i) l.w[i] = FixedPoint::from_raw(w_raw[i]);
    for (size_t i = 0; i < b_raw.size(); ++i) l.b[i] = FixedPoint::from_raw(b_raw[i]);
}

inline void to_json(Json& j, const Weights& w) {
    j = Json{{"architecture", w.architecture}, {"layers", w.layers}};
}
inline void from_json(const Json& j, Weights& w) {
    j.at("architecture").get_to(w.architecture);
    j.at("layers").get_to(w.layers);
    w.validate();
}

inline void to_json(Json& j, const Batch& b) {
    std::vector<int32_t> in_raw(b.inputs.size()), tgt_raw(b.targets.size());
    for (size_t i = 0; i < b.inputs.size(); ++i) in_raw[i] = b.inputs[i].raw;
    for (size_t i = 0; i < b.targets.size(); ++i) tgt_raw[i] = b.targets[i].raw;
    j = Json{{"batch_index", b.batch_index}, {"inputs_raw", in_raw}, {"items", b.items}, {"targets_raw", tgt_raw}};
}
inline void from_json(const Json& j, Batch& b) {
    j.at("batch_index").get_to(b.batch_index);
    j.at("items").get_to(b.items);
    auto in_raw = j.at("inputs_raw").get<std::vector<int32_t>>();
    auto tgt_raw = j.at("targets_raw").get<std::vector<int32_t>>();
    b.inputs.resize(in_raw.size());
    b.targets.resize(tgt_raw.size());
    for (size_t i = 0; i < in_raw.size(); ++i) b.inputs[i] = FixedPoint::from_raw(in_raw[i]);
    for (size_t i = 0; i < tgt_raw.size(); ++i) b.targets[i] = FixedPoint::from_raw(tgt_raw[i]);
}

inline void to_json(Json& j, const Checkpoint& c) {
    j = Json{{"rng_cursor", c.rng_cursor},
             {"step_index", c.step_index},
             {"weights", c.weights},
             {"weights_commitment", to_hex(c.weights_commitment)}};
}
inline void from_json(const Json& j, Checkpoint& c) {
    j.at("rng_cursor").get_to(c.rng_cursor);
    j.at("step_index").get_to(c.step_index);
    j.at("weights").get_to(c.weights);
    c.weights_commitment = array_from_hex<32>(j.at("weights_commitment").get<std::string>());
}

inline void to_json(Json& j, const TickRecord& t) {
    j = Json{{"hardware_ops", t.hardware_ops},
             {"messages_emitted", t.messages_emitted},
             {"tick", t.tick},
             {"utilization_ppm", t.utilization_ppm}};
}
inline void from_json(const Json& j, TickRecord& t) {
    j.at("hardware_ops").get_to(t.hardware_ops);
    j.at("messages_emitted").get_to(t.messages_emitted);
    j.at("tick").get_to(t.tick);
    j.at("utilization_ppm").get_to(t.utilization_ppm);
}

inline void to_json(Json& j, const ExecutionTrace& e) { j = Json{{"ticks", e.ticks}}; }
inline void from_json(const Json& j, ExecutionTrace& e) { j.at("ticks").get_to(e.ticks); }

// ---------------------------------------------------------------------------
// Seeded initialization and data
// ---------------------------------------------------------------------------

// Map one 64-bit draw onto Q16.16 in [-1, 1).
inline FixedPoint unit_range_from_draw(uint64_t draw) {
    return FixedPoint::from_raw(static_cast<int32_t>(static_cast<int64_t>(draw % 131072) - 65536));
}

inline Weights init_weights(const std::vector<int32_t>& architecture, const Seed32& seed) {
    if (architecture.size() < 2) throw std::invalid_argument("init_weights: architecture too short");
    Weights w;
    w.architecture = architecture;
    for (size_t l = 0; l + 1 < architecture.size(); ++l) {
        LayerWeights lw;
        lw.in_dim = architecture[l];
        lw.out_dim = architecture[l + 1];
        size_t n_w = static_cast<size_t>(lw.in_dim) * lw.out_dim;
        std::string wtag = "init.w." + std::to_string(l);
        std::string btag = "init.b." + std::to_string(l);
        lw.w.reserve(n_w);
        for (size_t i = 0; i < n_w; ++i) lw.w.push_back(unit_range_from_draw(prng_draw(seed, wtag, i)));
        lw.b.reserve(lw.out_dim);
        for (int32_t i = 0; i < lw.out_dim; ++i) lw.b.push_back(unit_range_from_draw(prng_draw(seed, btag, i)));
        w.layers.push_back(std::move(lw));
    }
    return w;
}

// Synthetic declared dataset: every batch is a pure function of the master
// seed, so a Verifier can regenerate it from the declaration alone.
inline Batch make_batch(const WorkloadDeclaration& decl, uint32_t batch_index) {
    int32_t in_dim = decl.architecture.front();
    int32_t out_dim = decl.architecture.back();
    Batch b;
    b.batch_index = batch_index;
    b.items = decl.batch_size;
    std::string in_tag = "data.in." + std::to_string(batch_index);
    std::string tgt_tag = "data.tgt." + std::to_string(batch_index);
    size_t n_in = static_cast<size_t>(b.items) * in_dim;
    size_t n_tgt = static_cast<size_t>(b.items) * out_dim;
    b.inputs.reserve(n_in);
    b.targets.reserve(n_tgt);
    for (size_t i = 0; i < n_in; ++i) b.inputs.push_back(unit_range_from_draw(prng_draw(decl.master_seed, in_tag, i)));
    for (size_t i = 0; i < n_tgt; ++i) b.targets.push_back(unit_range_from_draw(prng_draw(decl.master_seed, tgt_tag, i)));
    return b;
}

inline std::vector<Batch> make_batches(const WorkloadDeclaration& decl) {
    std::vector<Batch> out;
    out.reserve(decl.batch_count());
    for (uint32_t i = 0; i < decl.batch_count(); ++i) out.push_back(make_batch(decl, i));
    return out;
}

inline Hash32 dataset_commitment(const std::vector<Batch>& batches) {
    std::vector<Hash32> parts;
    parts.reserve(batches.size());
    for (const Batch& b : batches) parts.push_back(commit_value(b));
    return commit_all(parts);
}

// Fisher-Yates permutation of [0, n) driven by the "order" stream.
inline std::vector<uint32_t> permute_data_order(uint32_t n_batches, const Seed32& seed) {
    if (n_batches < 1) throw std::invalid_argument("permute_data_order: n_batches must be >= 1");
    std::vector<uint32_t> perm(n_batches);
    for (uint32_t i = 0; i < n_batches; ++i) perm[i] = i;
    uint64_t draw_index = 0;
    for (uint32_t i = n_batches - 1; i > 0; --i) {
        uint64_t j = prng_draw(seed, "order", draw_index++) % (static_cast<uint64_t>(i) + 1);
        std::swap(perm[i], perm[static_cast<uint32_t>(j)]);
    }
    return perm;
}

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct ForwardResult {
    std::vector<FixedPoint> outputs;  // row-major [items][out_dim]
    FixedPoint loss;                  // sum of squared errors, Q16.16
};

namespace detail {

struct LayerActivations {
    std::vector<FixedPoint> pre;   // z, before nonlinearity
    std::vector<FixedPoint> post;  // after nonlinearity
};

// One item through one layer. Accumulation order is fixed: ascending input
// index, 64-bit wrapping accumulator, floor rescale, wrapping bias add.
inline void layer_forward(const LayerWeights& lw, const FixedPoint* x, FixedPoint* z,
                          FaultInjector* fault) {
    for (int32_t j = 0; j < lw.out_dim; ++j) {
        int64_t acc = 0;
        const FixedPoint* row = lw.w.data() + static_cast<size_t>(j) * lw.in_dim;
        for (int32_t i = 0; i < lw.in_dim; ++i) {
            acc = wrap_add64(acc, wrap_mul64(row[i].raw, x[i].raw));
            if (fault) acc = fault->maybe_corrupt(acc);
        }
        z[j] = fx_add(fx_from_acc(acc), lw.b[j]);
    }
}

inline FixedPoint clamped_relu(FixedPoint z) {
    return fx_clamp(z, FixedPoint::zero(), FixedPoint::from_raw(kActClampRaw));
}

// Derivative mask of the clamped ReLU: 1 on the linear region, 0 at and
// beyond the clamps.
inline bool relu_active(FixedPoint z) { return z.raw > 0 && z.raw < kActClampRaw; }

// Full forward pass for one item, keeping per-layer activations for backward.
inline void item_forward(const Weights& w, const FixedPoint* x,
                         std::vector<LayerActivations>& acts, FaultInjector* fault) {
    size_t n_layers = w.layers.size();
    const FixedPoint* cur = x;
    for (size_t l = 0; l < n_layers; ++l) {
        const LayerWeights& lw = w.layers[l];
        acts[l].pre.resize(lw.out_dim);
        acts[l].post.resize(lw.out_dim);
        layer_forward(lw, cur, acts[l].pre.data(), fault);
        bool last = (l + 1 == n_layers);
        for (int32_t j = 0; j < lw.out_dim; ++j) {
            acts[l].post[j] = last ? acts[l].pre[j] : clamped_relu(acts[l].pre[j]);
        }
        cur = acts[l].post.data();
    }
}

}  // namespace detail

inline ForwardResult forward_batch(const Weights& w, const Batch& batch, FaultInjector* fault = nullptr) {
    w.validate();
    int32_t in_dim = w.architecture.front();
    int32_t out_dim = w.architecture.back();
    batch.validate(in_dim, out_dim);

    ForwardResult result;
    result.outputs.reserve(static_cast<size_t>(batch.items) * out_dim);
    std::vector<detail::LayerActivations> acts(w.layers.size());
    int64_t loss_acc = 0;
    for (uint32_t s = 0; s < batch.items; ++s) {
        const FixedPoint* x = batch.inputs.data() + static_cast<size_t>(s) * in_dim;
        detail::item_forward(w, x, acts, fault);
        const auto& out = acts.back().post;
        for (int32_t j = 0; j < out_dim; ++j) {
            result.outputs.push_back(out[j]);
            FixedPoint d = fx_sub(out[j], batch.targets[static_cast<size_t>(s) * out_dim + j]);
            loss_acc = wrap_add64(loss_acc, wrap_mul64(d.raw, d.raw));
        }
    }
    result.loss = fx_from_acc(loss_acc);
    return result;
}

// Raw 64-bit wrapping gradient accumulators (Q32.32), one per parameter.
// Per-item contributions are independent, so accumulators over disjoint item
// shards sum (mod 2^64) to the full-batch accumulator. That identity is what
// lets a data-parallel all-reduce of shard accumulators reproduce single-node
// training bit-exactly.
struct GradAccum {
    std::vector<std::vector<int64_t>> w_acc;
    std::vector<std::vector<int64_t>> b_acc;

    static GradAccum zeros_like(const Weights& w) {
        GradAccum g;
        for (const auto& l : w.layers) {
            g.w_acc.emplace_back(l.w.size(), 0);
            g.b_acc.emplace_back(l.b.size(), 0);
        }
        return g;
    }

    void add(const GradAccum& o) {
        for (size_t l = 0; l < w_acc.size(); ++l) {
            for (size_t i = 0; i < w_acc[l].size(); ++i) w_acc[l][i] = wrap_add64(w_acc[l][i], o.w_acc[l][i]);
            for (size_t i = 0; i < b_acc[l].size(); ++i) b_acc[l][i] = wrap_add64(b_acc[l][i], o.b_acc[l][i]);
        }
    }
};

inline GradAccum backward_accumulate(const Weights& w, const Batch& batch,
                                     FaultInjector* fault = nullptr) {
    w.validate();
    int32_t in_dim = w.architecture.front();
    int32_t out_dim = w.architecture.back();
    batch.validate(in_dim, out_dim);

    size_t n_layers = w.layers.size();
    GradAccum acc = GradAccum::zeros_like(w);
    auto& gw_acc = acc.w_acc;
    auto& gb_acc = acc.b_acc;

    std::vector<detail::LayerActivations> acts(n_layers);
    std::vector<FixedPoint> delta, delta_prev;
    for (uint32_t s = 0; s < batch.items; ++s) {
        const FixedPoint* x = batch.inputs.data() + static_cast<size_t>(s) * in_dim;
        detail::item_forward(w, x, acts, fault);

        // dL/dy = 2 (y - t)
        delta.resize(out_dim);
        for (int32_t j = 0; j < out_dim; ++j) {
            FixedPoint d = fx_sub(acts.back().post[j], batch.targets[static_cast<size_t>(s) * out_dim + j]);
            delta[j] = FixedPoint::from_raw(wrap32(static_cast<int64_t>(d.raw) * 2));
        }

        for (size_t l = n_layers; l-- > 0;) {
            const LayerWeights& lw = w.layers[l];
            const FixedPoint* a_in = (l == 0) ? x : acts[l - 1].post.data();
            for (int32_t j = 0; j < lw.out_dim; ++j) {
                int64_t dj = delta[j].raw;
                int64_t* gw_row = gw_acc[l].data() + static_cast<size_t>(j) * lw.in_dim;
                for (int32_t i = 0; i < lw.in_dim; ++i) {
                    gw_row[i] = wrap_add64(gw_row[i], wrap_mul64(dj, a_in[i].raw));
                }
                // Bias gradient sums Q16.16 deltas; scale by one fractional
                // unit so the shared rescale applies uniformly below.
                gb_acc[l][j] = wrap_add64(gb_acc[l][j], wrap_mul64(dj, FixedPoint::kOneRaw));
            }
            if (l > 0) {
                const LayerWeights& lw2 = w.layers[l];
                delta_prev.resize(lw2.in_dim);
                for (int32_t i = 0; i < lw2.in_dim; ++i) {
                    if (!detail::relu_active(acts[l - 1].pre[i])) {
                        delta_prev[i] = FixedPoint::zero();
                        continue;
                    }
                    int64_t acc = 0;
                    for (int32_t j = 0; j < lw2.out_dim; ++j) {
                        acc = wrap_add64(acc, wrap_mul64(lw2.at(j, i).raw, delta[j].raw));
                    }
                    delta_prev[i] = fx_from_acc(acc);
                }
                delta = delta_prev;
            }
        }
    }
    return acc;
}

// Rescale and clamp raw accumulators into a Weights-shaped gradient.
inline Weights finalize_gradient(const Weights& w, const GradAccum& acc) {
    Weights grad;
    grad.architecture = w.architecture;
    grad.layers.resize(w.layers.size());
    FixedPoint clamp_hi = FixedPoint::from_raw(kGradClampRaw);
    FixedPoint clamp_lo = FixedPoint::from_raw(-kGradClampRaw);
    for (size_t l = 0; l < w.layers.size(); ++l) {
        LayerWeights& gl = grad.layers[l];
        gl.in_dim = w.layers[l].in_dim;
        gl.out_dim = w.layers[l].out_dim;
        gl.w.resize(acc.w_acc[l].size());
        gl.b.resize(acc.b_acc[l].size());
        for (size_t i = 0; i < acc.w_acc[l].size(); ++i) {
            gl.w[i] = fx_clamp(fx_from_acc(acc.w_acc[l][i]), clamp_lo, clamp_hi);
        }
        for (size_t i = 0; i < acc.b_acc[l].size(); ++i) {
            gl.b[i] = fx_clamp(fx_from_acc(acc.b_acc[l][i]), clamp_lo, clamp_hi);
        }
    }
    return grad;
}

// Analytic gradient of the summed squared-error loss, computed with the same
// fixed-point rounding schedule as the forward pass. Components are clamped to
// [-kGradClamp, kGradClamp].
inline Weights backward_batch(const Weights& w, const Batch& batch, FaultInjector* fault = nullptr) {
    return finalize_gradient(w, backward_accumulate(w, batch, fault));
}

// ---------------------------------------------------------------------------
// Optimizer step and segment training
// ---------------------------------------------------------------------------

namespace detail {

struct OptimizerState {
    std::vector<std::vector<FixedPoint>> vw, vb;  // momentum / first moment
    std::vector<std::vector<FixedPoint>> sw, sb;  // second moment (adam-like)

    static OptimizerState zeros_like(const Weights& w) {
        OptimizerState st;
        for (const auto& l : w.layers) {
            st.vw.emplace_back(l.w.size(), FixedPoint::zero());
            st.vb.emplace_back(l.b.size(), FixedPoint::zero());
            st.sw.emplace_back(l.w.size(), FixedPoint::zero());
            st.sb.emplace_back(l.b.size(), FixedPoint::zero());
        }
        return st;
    }
};

inline FixedPoint update_delta(OptimizerFamily family, const OptimizerParams& p, FixedPoint g,
                               FixedPoint& v, FixedPoint& s) {
    switch (family) {
        case OptimizerFamily::sgd:
            return fx_mul(p.learning_rate, g);
        case OptimizerFamily::momentum:
            v = fx_add(fx_mul(p.momentum, v), g);
            return fx_mul(p.learning_rate, v);
        case OptimizerFamily::adam_like: {
            FixedPoint one = FixedPoint::one();
            v = fx_add(fx_mul(p.beta1, v), fx_mul(fx_sub(one, p.beta1), g));
            s = fx_add(fx_mul(p.beta2, s), fx_mul(fx_sub(one, p.beta2), fx_mul(g, g)));
            FixedPoint denom = fx_add(fx_sqrt(fx_max(s, FixedPoint::zero())), p.epsilon);
            return fx_mul(p.learning_rate, fx_div(v, denom));
        }
    }
    throw std::invalid_argument("train_segment: optimizer_family outside allowed set");
}

inline void apply_update(Weights& w, const Weights& grad, OptimizerFamily family,
                         const OptimizerParams& p, OptimizerState& st) {
    for (size_t l = 0; l < w.layers.size(); ++l) {
        LayerWeights& lw = w.layers[l];
        const LayerWeights& gl = grad.layers[l];
        for (size_t i = 0; i < lw.w.size(); ++i) {
            lw.w[i] = fx_sub(lw.w[i], update_delta(family, p, gl.w[i], st.vw[l][i], st.sw[l][i]));
        }
        for (size_t i = 0; i < lw.b.size(); ++i) {
            lw.b[i] = fx_sub(lw.b[i], update_delta(family, p, gl.b[i], st.vb[l][i], st.sb[l][i]));
        }
    }
}

}  // namespace detail

inline Checkpoint make_checkpoint(uint32_t step_index, Weights w, int64_t rng_cursor) {
    Checkpoint c;
    c.step_index = step_index;
    c.weights_commitment = commit_value(w);
    c.weights = std::move(w);
    c.rng_cursor = rng_cursor;
    return c;
}

// One training segment: one optimizer step per batch, optimizer state local to
// the segment. The result is a pure function of (checkpoint, batches,
// declaration), which is what makes sampled re-execution possible.
inline Checkpoint train_segment(const Checkpoint& start, std::span<const Batch> batches,
                                const WorkloadDeclaration& decl, FaultInjector* fault = nullptr) {
    if (start.step_index + 1 > decl.segment_count) {
        throw std::invalid_argument("train_segment: checkpoint already at segment_count");
    }
    if (decl.optimizer_family != OptimizerFamily::sgd &&
        decl.optimizer_family != OptimizerFamily::momentum &&
        decl.optimizer_family != OptimizerFamily::adam_like) {
        throw std::invalid_argument("train_segment: optimizer_family outside allowed set");
    }
    Weights w = start.weights;
    detail::OptimizerState st = detail::OptimizerState::zeros_like(w);
    for (const Batch& batch : batches) {
        Weights grad = backward_batch(w, batch, fault);
        detail::apply_update(w, grad, decl.optimizer_family, decl.optimizer_params, st);
    }
    return make_checkpoint(start.step_index + 1, std::move(w),
                           start.rng_cursor + static_cast<int64_t>(batches.size()));
}

// Upper bound on the per-weight infinity norm of one segment's update,
// in raw Q16.16 units. Derived from the gradient clamp; the continuity check
// in transcript validation compares observed deltas against this.
inline int64_t segment_update_bound_raw(const WorkloadDeclaration& decl) {
    const OptimizerParams& p = decl.optimizer_params;
    FixedPoint g_max = FixedPoint::from_raw(kGradClampRaw);
    int64_t per_step = 0;
    switch (decl.optimizer_family) {
        case OptimizerFamily::sgd:
            per_step = fx_mul(p.learning_rate, g_max).raw;
            break;
        case OptimizerFamily::momentum: {
            // |v| <= G / (1 - beta)
            FixedPoint v_max = fx_div(g_max, fx_sub(FixedPoint::one(), p.momentum));
            per_step = fx_mul(p.learning_rate, v_max).raw;
            break;
        }
        case OptimizerFamily::adam_like: {
            // |m / (sqrt(s) + eps)| <= G / eps
            FixedPoint ratio_max = fx_div(g_max, p.epsilon);
            per_step = fx_mul(p.learning_rate, ratio_max).raw;
            break;
        }
    }
    // +2 raw units per step absorbs floor-rounding asymmetry on negatives.
    return static_cast<int64_t>(decl.batches_per_segment) * (per_step + 2);
}

// ---------------------------------------------------------------------------
// Operation counts and tick scheduling
// ---------------------------------------------------------------------------

inline int64_t macs_per_item(const std::vector<int32_t>& architecture) {
    int64_t macs = 0;
    for (size_t l = 0; l + 1 < architecture.size(); ++l) {
        macs += static_cast<int64_t>(architecture[l]) * architecture[l + 1];
    }
    return macs;
}

// Model operations per item: 2*MACs forward; training adds a backward pass at
// the conventional 2x forward cost.
inline int64_t model_ops_per_item(const WorkloadDeclaration& decl) {
    int64_t fwd = 2 * macs_per_item(decl.architecture);
    return decl.kind == WorkloadKind::training ? 3 * fwd : fwd;
}

inline int64_t declared_model_ops(const WorkloadDeclaration& decl) {
    int64_t items = static_cast<int64_t>(decl.batch_count()) * decl.batch_size;
    return model_ops_per_item(decl) * items;
}

// Spreads a segment's operations over ticks at the declared utilization.
// HFU equals MFU in this engine: every hardware operation is a model
// operation.
struct TickScheduler {
    const ClusterSpec* cluster = nullptr;
    int64_t tick_duration_seconds = 1;
    int64_t next_tick = 0;

    int64_t peak_ops_per_tick() const {
        return floor_div64(static_cast<int64_t>(cluster->chip_count) * cluster->peak_ops_per_hour *
                               tick_duration_seconds,
                           3600);
    }

    void emit(ExecutionTrace& trace, int64_t ops, int64_t mfu_ppm, int64_t messages) {
        int64_t peak = peak_ops_per_tick();
        int64_t per_tick = floor_div64(peak * mfu_ppm, 1000000);
        if (per_tick < 1) per_tick = 1;
        int64_t remaining = ops;
        while (remaining > 0) {
            int64_t done = remaining < per_tick ? remaining : per_tick;
            TickRecord rec;
            rec.tick = next_tick++;
            rec.hardware_ops = done;
            rec.utilization_ppm = floor_div64(done * 1000000, peak);
            remaining -= done;
            if (remaining == 0) {
                rec.messages_emitted = messages;
            }
            trace.ticks.push_back(rec);
        }
        if (ops == 0 && messages > 0) {
            TickRecord rec;
            rec.tick = next_tick++;
            rec.messages_emitted = messages;
            trace.ticks.push_back(rec);
        }
    }

    void emit_idle(ExecutionTrace& trace, int64_t n_ticks) {
        for (int64_t i = 0; i < n_ticks; ++i) {
            TickRecord rec;
            rec.tick = next_tick++;
            trace.ticks.push_back(rec);
        }
    }
};

// ---------------------------------------------------------------------------
// Whole-run drivers and the transcript
// ---------------------------------------------------------------------------

struct SegmentRecord {
    uint32_t segment_index = 0;
    std::vector<uint32_t> batch_indices;  // permuted order, as executed

    friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

struct TrainingTranscript {
    WorkloadDeclaration declaration;
    std::vector<uint32_t> batch_order;      // full permutation
    std::vector<SegmentRecord> segments;    // per-segment slice of the order
    std::vector<Checkpoint> checkpoints;    // segment_count + 1 entries

    friend bool operator==(const TrainingTranscript&, const TrainingTranscript&) = default;
};

inline void to_json(Json& j, const SegmentRecord& s) {
    j = Json{{"batch_indices", s.batch_indices}, {"segment_index", s.segment_index}};
}
inline void from_json(const Json& j, SegmentRecord& s) {
    j.at("batch_indices").get_to(s.batch_indices);
    j.at("segment_index").get_to(s.segment_index);
}

inline void to_json(Json& j, const TrainingTranscript& t) {
    j = Json{{"batch_order", t.batch_order},
             {"checkpoints", t.checkpoints},
             {"declaration", t.declaration},
             {"segments", t.segments}};
}
inline void from_json(const Json& j, TrainingTranscript& t) {
    j.at("batch_order").get_to(t.batch_order);
    j.at("checkpoints").get_to(t.checkpoints);
    j.at("declaration").get_to(t.declaration);
    j.at("segments").get_to(t.segments);
}

struct TrainingRun {
    TrainingTranscript transcript;
    ExecutionTrace trace;
    std::vector<Batch> batches;  // canonical order (by batch_index)
};

inline TrainingRun run_training(const WorkloadDeclaration& decl, const ClusterSpec& cluster,
                                FaultInjector* fault = nullptr) {
    decl.validate();
    if (decl.kind != WorkloadKind::training) throw std::invalid_argument("run_training: kind mismatch");

    TrainingRun run;
    run.batches = make_batches(decl);
    run.transcript.declaration = decl;
    run.transcript.batch_order = permute_data_order(decl.batch_count(), decl.master_seed);

    TickScheduler sched{&cluster};
    int64_t seg_items = static_cast<int64_t>(decl.batches_per_segment) * decl.batch_size;
    int64_t seg_ops = model_ops_per_item(decl) * seg_items;
    int64_t seg_messages = static_cast<int64_t>(decl.node_count) * decl.batches_per_segment +
                           (decl.node_count - 1);

    Checkpoint current = make_checkpoint(0, init_weights(decl.architecture, decl.master_seed), 0);
    run.transcript.checkpoints.push_back(current);
    std::vector<Batch> slice;
    for (uint32_t seg = 0; seg < decl.segment_count; ++seg) {
        SegmentRecord rec;
        rec.segment_index = seg;
        slice.clear();
        for (uint32_t k = 0; k < decl.batches_per_segment; ++k) {
            uint32_t idx = run.transcript.batch_order[seg * decl.batches_per_segment + k];
            rec.batch_indices.push_back(idx);
            slice.push_back(run.batches[idx]);
        }
        current = train_segment(current, slice, decl, fault);
        run.transcript.segments.push_back(std::move(rec));
        run.transcript.checkpoints.push_back(current);
        sched.emit(run.trace, seg_ops, decl.mfu_ppm, seg_messages);
    }
    return run;
}

struct InferenceRun {
    std::vector<FixedPoint> outputs;  // concatenated batch outputs
    Hash32 outputs_commitment{};
    ExecutionTrace trace;
};

// Batch-level deterministic inference. Optional sampling jitter is keyed on
// the item's content, so permuting items inside a batch permutes outputs.
inline InferenceRun run_inference(const WorkloadDeclaration& decl, std::span<const Batch> batches,
                                  const Weights& weights, const ClusterSpec& cluster,
                                  FaultInjector* fault = nullptr) {
    if (decl.kind != WorkloadKind::inference) throw std::invalid_argument("run_inference: kind mismatch");
    InferenceRun run;
    TickScheduler sched{&cluster};
    int32_t in_dim = weights.architecture.front();
    int32_t out_dim = weights.architecture.back();
    int64_t jitter_span = floor_div64(decl.temperature_ppm * FixedPoint::kOneRaw, 1000000);
    for (const Batch& batch : batches) {
        ForwardResult fwd = forward_batch(weights, batch, fault);
        for (uint32_t s = 0; s < batch.items; ++s) {
            uint64_t item_key = 0;
            if (jitter_span > 0) {
                const FixedPoint* x = batch.inputs.data() + static_cast<size_t>(s) * in_dim;
                Bytes content;
                for (int32_t i = 0; i < in_dim; ++i) append_u32_be(content, static_cast<uint32_t>(x[i].raw));
                item_key = load_u64_be(commit(content).data());
            }
            for (int32_t j = 0; j < out_dim; ++j) {
                FixedPoint y = fwd.outputs[static_cast<size_t>(s) * out_dim + j];
                if (jitter_span > 0) {
                    uint64_t draw = prng_draw(decl.master_seed, "sampling", item_key + static_cast<uint64_t>(j));
                    int64_t jitter = static_cast<int64_t>(draw % (2 * static_cast<uint64_t>(jitter_span) + 1)) -
                                     jitter_span;
                    y = FixedPoint::from_raw(wrap32(static_cast<int64_t>(y.raw) + jitter));
                }
                run.outputs.push_back(y);
            }
        }
        int64_t batch_ops = model_ops_per_item(decl) * batch.items;
        sched.emit(run.trace, batch_ops, decl.mfu_ppm, 0);
        sched.emit_idle(run.trace, 1);  // request-arrival gap between batches
    }
    std::vector<int32_t> raw(run.outputs.size());
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = run.outputs[i].raw;
    Json j = raw;
    run.outputs_commitment = commit(canonical_dump(j));
    return run;
}

// ---------------------------------------------------------------------------
// Overflow behavior demo
// ---------------------------------------------------------------------------

enum class OverflowMode { saturate, wrap };

struct OverflowDemoResult {
    int left_grouping = 0;   // (a + b) + c
    int right_grouping = 0;  // a + (b + c)
};

inline int saturate8(int v) { return v > 127 ? 127 : (v < -128 ? -128 : v); }
inline int wrap8(int v) { return static_cast<int8_t>(static_cast<uint8_t>(v & 0xff)); }

// Adds the same three 8-bit values in both groupings under the chosen overflow
// behavior. Saturation is not associative; wrapping is.
inline OverflowDemoResult overflow_mode_demo(int8_t a, int8_t b, int8_t c, OverflowMode mode) {
    auto add = [mode](int x, int y) {
        int s = x + y;
        return mode == OverflowMode::saturate ? saturate8(s) : wrap8(s);
    };
    OverflowDemoResult r;
    r.left_grouping = add(add(a, b), c);
    r.right_grouping = add(a, add(b, c));
    return r;
}

}  // namespace verifsim::detnet
