#pragma once

// Reference oracles backing the test suite. These deliberately avoid the main
// implementation paths: the rational forward pass uses arbitrary-precision
// rationals instead of wrapping integers, the gradient oracle uses central
// finite differences, and the counting oracles are direct formula evaluations.

#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "verifsim/detnet.hpp"
#include "verifsim/shadow.hpp"

namespace verifsim::oracles {

using BigInt = boost::multiprecision::cpp_int;

struct BigRational {
    BigInt num = 0;
    BigInt den = 1;

    static BigRational from_raw(int32_t raw) { return {BigInt(raw), BigInt(1) << 16}; }

    BigRational operator+(const BigRational& o) const { return {num * o.den + o.num * den, den * o.den}; }
    BigRational operator*(const BigRational& o) const { return {num * o.num, den * o.den}; }

    // floor(x * 2^16): the quantization every rescale site performs.
    BigInt floor_q16() const {
        BigInt n = num << 16;
        BigInt q = n / den;
        if (n % den != 0 && ((n < 0) != (den < 0))) --q;
        return q;
    }
};

// Exact-rational evaluation of the forward pass with the same quantization
// points as the engine: rescale after each dot product, clamp hidden layers,
// square and sum for the loss. No wrapping; valid as an oracle whenever the
// engine's accumulators stay in range, which holds for the fixture scales.
struct RationalForwardResult {
    std::vector<int64_t> output_raw;  // row-major [items][out_dim]
    int64_t loss_raw = 0;
};

inline RationalForwardResult rational_forward(const detnet::Weights& w, const detnet::Batch& batch) {
    const int64_t act_clamp = detnet::kActClampRaw;
    int32_t in_dim = w.architecture.front();
    int32_t out_dim = w.architecture.back();
    RationalForwardResult result;
    BigInt loss_q32 = 0;  // sum of raw*raw products (Q32.32)
    for (uint32_t s = 0; s < batch.items; ++s) {
        std::vector<BigInt> cur(in_dim);
        for (int32_t i = 0; i < in_dim; ++i) cur[i] = batch.inputs[static_cast<size_t>(s) * in_dim + i].raw;
        for (size_t l = 0; l < w.layers.size(); ++l) {
            const detnet::LayerWeights& lw = w.layers[l];
            std::vector<BigInt> next(lw.out_dim);
            for (int32_t j = 0; j < lw.out_dim; ++j) {
                // z_raw = floor(sum(w_raw * x_raw) / 2^16) + b_raw
                BigInt acc = 0;
                for (int32_t i = 0; i < lw.in_dim; ++i) acc += BigInt(lw.at(j, i).raw) * cur[i];
                BigInt z = (acc >> 16) + lw.b[j].raw;
                if (l + 1 < w.layers.size()) {
                    if (z < 0) z = 0;
                    if (z > act_clamp) z = act_clamp;
                }
                next[j] = z;
            }
            cur = std::move(next);
        }
        for (int32_t j = 0; j < out_dim; ++j) {
            result.output_raw.push_back(static_cast<int64_t>(cur[j]));
            BigInt d = cur[j] - BigInt(batch.targets[static_cast<size_t>(s) * out_dim + j].raw);
            loss_q32 += d * d;
        }
    }
    result.loss_raw = static_cast<int64_t>(loss_q32 >> 16);
    return result;
}

// Central finite differences of the shadow loss with respect to every weight
// and bias.
inline detnet::shadow::ShadowGradient finite_difference_gradient(const detnet::shadow::ShadowNet& net,
                                                                 const detnet::shadow::ShadowBatch& batch,
                                                                 double h = 1e-5) {
    detnet::shadow::ShadowGradient grad;
    detnet::shadow::ShadowNet probe = net;
    for (size_t l = 0; l < net.w.size(); ++l) {
        grad.w.emplace_back(net.w[l].size(), 0.0);
        grad.b.emplace_back(net.b[l].size(), 0.0);
        for (size_t i = 0; i < net.w[l].size(); ++i) {
            probe.w[l][i] = net.w[l][i] + h;
            double up = detnet::shadow::forward_loss(probe, batch);
            probe.w[l][i] = net.w[l][i] - h;
            double down = detnet::shadow::forward_loss(probe, batch);
            probe.w[l][i] = net.w[l][i];
            grad.w[l][i] = (up - down) / (2 * h);
        }
        for (size_t i = 0; i < net.b[l].size(); ++i) {
            probe.b[l][i] = net.b[l][i] + h;
            double up = detnet::shadow::forward_loss(probe, batch);
            probe.b[l][i] = net.b[l][i] - h;
            double down = detnet::shadow::forward_loss(probe, batch);
            probe.b[l][i] = net.b[l][i];
            grad.b[l][i] = (up - down) / (2 * h);
        }
    }
    return grad;
}

struct BinomialBounds {
    double mean = 0;
    double sigma = 0;
    double lo3 = 0, hi3 = 0;  // 3-sigma band
    double lo4 = 0, hi4 = 0;  // 4-sigma band
};

inline BinomialBounds binomial_bounds(double n, double p) {
    BinomialBounds b;
    b.mean = n * p;
    b.sigma = std::sqrt(n * p * (1 - p));
    b.lo3 = b.mean - 3 * b.sigma;
    b.hi3 = b.mean + 3 * b.sigma;
    b.lo4 = b.mean - 4 * b.sigma;
    b.hi4 = b.mean + 4 * b.sigma;
    return b;
}

// Probability that at least one of m covert messages lands in a sample taken
// independently at rate p.
inline double covert_detection_probability(double p, int64_t m) {
    return 1.0 - std::pow(1.0 - p, static_cast<double>(m));
}

struct WrapExhaustiveResult {
    int64_t triples_checked = 0;
    int64_t wrap_mismatches = 0;      // should be 0
    int64_t saturate_mismatches = 0;  // > 0, saturation is not associative
};

// Sweeps all 2^24 signed 8-bit triples under both overflow behaviors.
inline WrapExhaustiveResult wrap_exhaustive() {
    WrapExhaustiveResult r;
    for (int a = -128; a <= 127; ++a) {
        for (int b = -128; b <= 127; ++b) {
            for (int c = -128; c <= 127; ++c) {
                ++r.triples_checked;
                auto wrap = detnet::overflow_mode_demo(static_cast<int8_t>(a), static_cast<int8_t>(b),
                                                       static_cast<int8_t>(c), detnet::OverflowMode::wrap);
                if (wrap.left_grouping != wrap.right_grouping) ++r.wrap_mismatches;
                auto sat = detnet::overflow_mode_demo(static_cast<int8_t>(a), static_cast<int8_t>(b),
                                                      static_cast<int8_t>(c), detnet::OverflowMode::saturate);
                if (sat.left_grouping != sat.right_grouping) ++r.saturate_mismatches;
            }
        }
    }
    return r;
}

// Chi-square critical value via the Wilson-Hilferty approximation; good to a
// few parts per thousand for the degrees of freedom used in the tests.
inline double chi_square_critical(double df, double z_upper) {
    double t = 1.0 - 2.0 / (9.0 * df) + z_upper * std::sqrt(2.0 / (9.0 * df));
    return df * t * t * t;
}

}  // namespace verifsim::oracles
