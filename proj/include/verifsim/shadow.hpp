#pragma once

#include <vector>

#include "verifsim/detnet.hpp"

namespace verifsim::detnet::shadow {

// Double-precision mirror of the integer pipeline: same architecture, same
// accumulation order, same clamps, no rounding. Used to check the analytic
// gradient against finite differences, and as a smooth reference for the
// quantized gradient. Never feeds committed data.

struct ShadowNet {
    std::vector<int32_t> architecture;
    std::vector<std::vector<double>> w;  // row-major per layer
    std::vector<std::vector<double>> b;
};

inline ShadowNet from_fixed(const Weights& weights) {
    ShadowNet net;
    net.architecture = weights.architecture;
    for (const auto& l : weights.layers) {
        std::vector<double> wd(l.w.size()), bd(l.b.size());
        for (size_t i = 0; i < l.w.size(); ++i) wd[i] = l.w[i].to_double();
        for (size_t i = 0; i < l.b.size(); ++i) bd[i] = l.b[i].to_double();
        net.w.push_back(std::move(wd));
        net.b.push_back(std::move(bd));
    }
    return net;
}

struct ShadowBatch {
    uint32_t items = 0;
    std::vector<double> inputs;
    std::vector<double> targets;
};

inline ShadowBatch from_fixed(const Batch& batch) {
    ShadowBatch b;
    b.items = batch.items;
    b.inputs.resize(batch.inputs.size());
    b.targets.resize(batch.targets.size());
    for (size_t i = 0; i < batch.inputs.size(); ++i) b.inputs[i] = batch.inputs[i].to_double();
    for (size_t i = 0; i < batch.targets.size(); ++i) b.targets[i] = batch.targets[i].to_double();
    return b;
}

constexpr double kActClamp = 8.0;

inline double clamped_relu(double z) { return z < 0.0 ? 0.0 : (z > kActClamp ? kActClamp : z); }
inline double relu_mask(double z) { return (z > 0.0 && z < kActClamp) ? 1.0 : 0.0; }

// Summed squared-error loss over the batch.
inline double forward_loss(const ShadowNet& net, const ShadowBatch& batch) {
    size_t n_layers = net.w.size();
    int32_t in_dim = net.architecture.front();
    int32_t out_dim = net.architecture.back();
    double loss = 0.0;
    std::vector<double> cur, next;
    for (uint32_t s = 0; s < batch.items; ++s) {
        cur.assign(batch.inputs.begin() + static_cast<size_t>(s) * in_dim,
                   batch.inputs.begin() + static_cast<size_t>(s + 1) * in_dim);
        for (size_t l = 0; l < n_layers; ++l) {
            int32_t rows = net.architecture[l + 1];
            int32_t cols = net.architecture[l];
            next.assign(rows, 0.0);
            for (int32_t j = 0; j < rows; ++j) {
                double acc = 0.0;
                for (int32_t i = 0; i < cols; ++i) acc += net.w[l][static_cast<size_t>(j) * cols + i] * cur[i];
                double z = acc + net.b[l][j];
                next[j] = (l + 1 == n_layers) ? z : clamped_relu(z);
            }
            cur = next;
        }
        for (int32_t j = 0; j < out_dim; ++j) {
            double d = cur[j] - batch.targets[static_cast<size_t>(s) * out_dim + j];
            loss += d * d;
        }
    }
    return loss;
}

struct ShadowGradient {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
};

inline ShadowGradient backward(const ShadowNet& net, const ShadowBatch& batch) {
    size_t n_layers = net.w.size();
    int32_t in_dim = net.architecture.front();
    int32_t out_dim = net.architecture.back();

    ShadowGradient grad;
    for (size_t l = 0; l < n_layers; ++l) {
        grad.w.emplace_back(net.w[l].size(), 0.0);
        grad.b.emplace_back(net.b[l].size(), 0.0);
    }

    std::vector<std::vector<double>> pre(n_layers), post(n_layers);
    std::vector<double> delta, delta_prev;
    for (uint32_t s = 0; s < batch.items; ++s) {
        std::vector<double> x(batch.inputs.begin() + static_cast<size_t>(s) * in_dim,
                              batch.inputs.begin() + static_cast<size_t>(s + 1) * in_dim);
        const std::vector<double>* cur = &x;
        for (size_t l = 0; l < n_layers; ++l) {
            int32_t rows = net.architecture[l + 1];
            int32_t cols = net.architecture[l];
            pre[l].assign(rows, 0.0);
            post[l].assign(rows, 0.0);
            for (int32_t j = 0; j < rows; ++j) {
                double acc = 0.0;
                for (int32_t i = 0; i < cols; ++i) acc += net.w[l][static_cast<size_t>(j) * cols + i] * (*cur)[i];
                pre[l][j] = acc + net.b[l][j];
                post[l][j] = (l + 1 == n_layers) ? pre[l][j] : clamped_relu(pre[l][j]);
            }
            cur = &post[l];
        }

        delta.assign(out_dim, 0.0);
        for (int32_t j = 0; j < out_dim; ++j) {
            delta[j] = 2.0 * (post.back()[j] - batch.targets[static_cast<size_t>(s) * out_dim + j]);
        }
        for (size_t l = n_layers; l-- > 0;) {
            int32_t rows = net.architecture[l + 1];
            int32_t cols = net.architecture[l];
            const std::vector<double>& a_in = (l == 0) ? x : post[l - 1];
            for (int32_t j = 0; j < rows; ++j) {
                for (int32_t i = 0; i < cols; ++i) {
                    grad.w[l][static_cast<size_t>(j) * cols + i] += delta[j] * a_in[i];
                }
                grad.b[l][j] += delta[j];
            }
            if (l > 0) {
                delta_prev.assign(cols, 0.0);
                for (int32_t i = 0; i < cols; ++i) {
                    double acc = 0.0;
                    for (int32_t j = 0; j < rows; ++j) acc += net.w[l][static_cast<size_t>(j) * cols + i] * delta[j];
                    delta_prev[i] = acc * relu_mask(pre[l - 1][i]);
                }
                delta = delta_prev;
            }
        }
    }
    return grad;
}

}  // namespace verifsim::detnet::shadow
