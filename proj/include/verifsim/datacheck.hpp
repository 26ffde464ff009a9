#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "verifsim/core.hpp"
#include "verifsim/detnet.hpp"

namespace verifsim::datacheck {

// ---------------------------------------------------------------------------
// Token frequency analysis
// ---------------------------------------------------------------------------

struct TokenDistribution {
    std::vector<int64_t> counts;
    int64_t total_count = 0;

    void validate() const {
        int64_t sum = 0;
        for (int64_t c : counts) {
            if (c < 0) throw std::invalid_argument("TokenDistribution: negative count");
            sum += c;
        }
        if (sum != total_count) throw std::invalid_argument("TokenDistribution: counts do not sum to total");
    }

    friend bool operator==(const TokenDistribution&, const TokenDistribution&) = default;
};

inline void to_json(Json& j, const TokenDistribution& d) {
    j = Json{{"counts", d.counts}, {"total_count", d.total_count}};
}
inline void from_json(const Json& j, TokenDistribution& d) {
    j.at("counts").get_to(d.counts);
    j.at("total_count").get_to(d.total_count);
    d.validate();
}

constexpr int kTokenBins = 256;

// Bucket Q16.16 values in [-1, 1) into token ids.
inline int32_t token_of(FixedPoint v) {
    int64_t shifted = static_cast<int64_t>(v.raw) + 65536;  // [0, 131072) for in-range data
    int64_t tok = floor_div64(shifted * kTokenBins, 131072);
    if (tok < 0) tok = 0;
    if (tok >= kTokenBins) tok = kTokenBins - 1;
    return static_cast<int32_t>(tok);
}

inline TokenDistribution token_histogram(std::span<const FixedPoint> values) {
    TokenDistribution d;
    d.counts.assign(kTokenBins, 0);
    for (FixedPoint v : values) ++d.counts[token_of(v)];
    d.total_count = static_cast<int64_t>(values.size());
    return d;
}

struct FrequencyCheckResult {
    double chi_square = 0;
    Verdict verdict;
};

// Pearson chi-square distance between the empirical token distribution and a
// reference; a mass of tokens in bins the reference never produces counts as
// an immediate mismatch.
inline FrequencyCheckResult token_frequency_check(const TokenDistribution& data,
                                                  const TokenDistribution& reference,
                                                  double threshold) {
    reference.validate();
    data.validate();
    if (reference.total_count == 0) throw std::invalid_argument("token_frequency_check: empty reference");
    FrequencyCheckResult result;
    if (data.total_count == 0) {
        result.verdict = verdict_inconclusive({{"datacheck.token_frequency", "no data", "non-empty sample"}});
        return result;
    }
    if (data.counts.size() != reference.counts.size()) {
        throw std::invalid_argument("token_frequency_check: histogram sizes differ");
    }
    double n = static_cast<double>(data.total_count);
    double chi = 0;
    for (size_t i = 0; i < data.counts.size(); ++i) {
        double expected = n * static_cast<double>(reference.counts[i]) / reference.total_count;
        double observed = static_cast<double>(data.counts[i]);
        if (expected == 0) {
            if (observed > 0) chi = std::numeric_limits<double>::infinity();
            continue;
        }
        chi += (observed - expected) * (observed - expected) / expected;
    }
    result.chi_square = chi;
    Evidence ev{"datacheck.token_frequency_chi_square", fmt_value(chi), fmt_value(threshold)};
    result.verdict = chi < threshold ? verdict_pass({ev}) : verdict_fail({ev});
    return result;
}

// ---------------------------------------------------------------------------
// Code factorization (optimizer structure) check
// ---------------------------------------------------------------------------

// Verifies that declared per-segment updates have gradient-descent structure:
// the optimizer family is in the allowed set, and replaying each sampled
// segment with the reference backward pass substituted in reproduces the
// declared weight delta within tolerance. "Training" that smuggles in
// precomputed weights cannot survive this substitution.
inline Verdict optimizer_structure_check(const WorkloadDeclaration& decl,
                                         const detnet::TrainingTranscript& transcript,
                                         const std::vector<detnet::Batch>& batches,
                                         const std::vector<uint32_t>& segment_indices,
                                         int64_t tolerance_raw = 0) {
    bool family_ok = decl.optimizer_family == OptimizerFamily::sgd ||
                     decl.optimizer_family == OptimizerFamily::momentum ||
                     decl.optimizer_family == OptimizerFamily::adam_like;
    if (!family_ok) {
        return verdict_fail({{"datacheck.optimizer_family", to_string(decl.optimizer_family), "sgd|momentum|adam_like"}});
    }
    if (transcript.checkpoints.size() != decl.segment_count + 1 ||
        transcript.segments.size() != decl.segment_count) {
        return verdict_inconclusive({{"datacheck.optimizer_structure", "transcript incomplete", "full transcript"}});
    }

    std::vector<Evidence> problems;
    std::vector<detnet::Batch> slice;
    for (uint32_t seg : segment_indices) {
        if (seg >= decl.segment_count) throw std::invalid_argument("optimizer_structure_check: segment out of range");
        slice.clear();
        for (uint32_t idx : transcript.segments[seg].batch_indices) slice.push_back(batches.at(idx));
        detnet::Checkpoint replayed = detnet::train_segment(transcript.checkpoints[seg], slice, decl);

        // Infinity norm of (declared update - reference update).
        int64_t max_dev = 0;
        const detnet::Weights& declared = transcript.checkpoints[seg + 1].weights;
        const detnet::Weights& reference = replayed.weights;
        for (size_t l = 0; l < declared.layers.size(); ++l) {
            for (size_t i = 0; i < declared.layers[l].w.size(); ++i) {
                int64_t d = std::abs(static_cast<int64_t>(declared.layers[l].w[i].raw) -
                                     reference.layers[l].w[i].raw);
                if (d > max_dev) max_dev = d;
            }
            for (size_t i = 0; i < declared.layers[l].b.size(); ++i) {
                int64_t d = std::abs(static_cast<int64_t>(declared.layers[l].b[i].raw) -
                                     reference.layers[l].b[i].raw);
                if (d > max_dev) max_dev = d;
            }
        }
        if (max_dev > tolerance_raw && problems.size() < 16) {
            problems.push_back({"datacheck.update_deviation.segment_" + std::to_string(seg),
                                fmt_value(max_dev), fmt_value(tolerance_raw)});
        }
    }
    if (!problems.empty()) return verdict_fail(std::move(problems));
    return verdict_pass({{"datacheck.optimizer_structure",
                          fmt_value(static_cast<int64_t>(segment_indices.size())),
                          "reference backward reproduces declared updates"}});
}

// ---------------------------------------------------------------------------
// Hash-range sampling
// ---------------------------------------------------------------------------

// Keep an item iff its digest, read as a fraction of 2^64, falls below q.
// Membership is recomputable by anyone from the items alone.
inline bool hash_range_keeps(const Hash32& digest, int64_t q_ppm) {
    uint64_t prefix = load_u64_be(digest.data());
    // prefix / 2^64 < q  <=>  prefix < q * 2^64 / 1e6, computed in 128 bits.
    unsigned __int128 bound = (static_cast<unsigned __int128>(q_ppm) << 64) / 1000000;
    return static_cast<unsigned __int128>(prefix) < bound;
}

inline std::vector<size_t> hash_range_sample(std::span<const Bytes> items, int64_t q_ppm) {
    if (q_ppm <= 0 || q_ppm > 1000000) throw std::invalid_argument("hash_range_sample: q out of (0, 1e6] ppm");
    std::vector<size_t> kept;
    for (size_t i = 0; i < items.size(); ++i) {
        if (hash_range_keeps(commit(items[i]), q_ppm)) kept.push_back(i);
    }
    return kept;
}

// Detects withheld samples: the stored count must sit within 4 sigma of the
// binomial expectation for the declared population and sampling rate.
inline Verdict verify_sample_completeness(int64_t total_count, int64_t q_ppm, int64_t stored_count) {
    if (total_count < 0 || stored_count < 0) throw std::invalid_argument("verify_sample_completeness: negative count");
    if (total_count == 0) {
        return verdict_pass({{"datacheck.sample_completeness", "0", "vacuous (no items)"}});
    }
    double q = static_cast<double>(q_ppm) / 1e6;
    double mean = static_cast<double>(total_count) * q;
    double sigma = std::sqrt(static_cast<double>(total_count) * q * (1 - q));
    double lo = mean - 4 * sigma;
    double hi = mean + 4 * sigma;
    Evidence ev{"datacheck.sample_completeness", fmt_value(static_cast<int64_t>(stored_count)),
                fmt_value(lo) + ".." + fmt_value(hi)};
    if (static_cast<double>(stored_count) >= lo && static_cast<double>(stored_count) <= hi) {
        return verdict_pass({ev});
    }
    return verdict_fail({ev});
}

// ---------------------------------------------------------------------------
// Storage overhead calculators
// ---------------------------------------------------------------------------

struct HardwareCostModel {
    double flops_per_second = 0;
    double params_count = 0;
    double bytes_in = 0;
    double bytes_out = 0;
    double ssd_write_bytes_per_second = 0;
    double ssd_price_per_byte = 0;  // purchase price per byte
    double gpu_price_per_hour = 0;
    double amortization_months = 0;

    void validate() const {
        for (double v : {flops_per_second, params_count, bytes_in, bytes_out,
                         ssd_write_bytes_per_second, ssd_price_per_byte, gpu_price_per_hour,
                         amortization_months}) {
            if (!(v > 0)) throw std::invalid_argument("HardwareCostModel: all fields must be positive");
        }
    }
};

struct StorageOverheadResult {
    double throughput_bytes_per_second = 0;
    double latency_overhead_fraction = 0;
    double cost_overhead_fraction = 0;
};

// Data rate an accelerator can push through a dense model, and the relative
// penalty of logging that stream to SSD: a forward pass costs 2*params FLOP
// per item, so byte throughput is flops * (bytes_in + bytes_out) / (2 *
// params). Storing a byte for one month is compared against the price of
// processing it once.
inline StorageOverheadResult storage_overhead(const HardwareCostModel& model) {
    model.validate();
    StorageOverheadResult r;
    r.throughput_bytes_per_second =
        model.flops_per_second * (model.bytes_in + model.bytes_out) / (2.0 * model.params_count);
    r.latency_overhead_fraction = r.throughput_bytes_per_second / model.ssd_write_bytes_per_second;

    double storage_cost_per_byte_month = model.ssd_price_per_byte / model.amortization_months;
    double seconds_per_item = 2.0 * model.params_count / model.flops_per_second;
    double dollars_per_item = model.gpu_price_per_hour * seconds_per_item / 3600.0;
    double inference_cost_per_byte = dollars_per_item / model.bytes_in;
    r.cost_overhead_fraction = storage_cost_per_byte_month / inference_cost_per_byte;
    return r;
}

}  // namespace verifsim::datacheck
