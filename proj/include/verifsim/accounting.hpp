#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "verifsim/core.hpp"
#include "verifsim/detnet.hpp"

namespace verifsim::accounting {

// ---------------------------------------------------------------------------
// Sensor and efficiency models
// ---------------------------------------------------------------------------

// Linear power-vs-utilization model for the whole cluster: at utilization u a
// chip draws p_idle + (p_max - p_idle) * u watts. Sensor readings carry
// multiplicative lognormal noise with relative standard deviation noise_sigma.
struct EfficiencyModel {
    int64_t peak_ops_per_tick = 0;  // cluster-wide
    double p_idle_watts = 0;        // cluster-wide
    double p_max_watts = 0;         // cluster-wide
    double noise_sigma = 0;

    static EfficiencyModel from_cluster(const ClusterSpec& cluster, int64_t tick_duration_seconds,
                                        double noise_sigma) {
        EfficiencyModel m;
        m.peak_ops_per_tick = floor_div64(
            static_cast<int64_t>(cluster.chip_count) * cluster.peak_ops_per_hour * tick_duration_seconds, 3600);
        m.p_idle_watts = cluster.p_idle_watts() * cluster.chip_count;
        m.p_max_watts = cluster.p_max_watts() * cluster.chip_count;
        m.noise_sigma = noise_sigma;
        m.validate();
        return m;
    }

    void validate() const {
        if (peak_ops_per_tick <= 0) throw std::invalid_argument("EfficiencyModel: peak_ops_per_tick must be positive");
        if (p_idle_watts < 0 || p_max_watts < p_idle_watts) throw std::invalid_argument("EfficiencyModel: bad power range");
        if (noise_sigma < 0) throw std::invalid_argument("EfficiencyModel: negative noise_sigma");
    }

    double watts_at(double utilization) const {
        return p_idle_watts + (p_max_watts - p_idle_watts) * utilization;
    }

    // Inverse of watts_at, clamped to [0, 1]. Requires a non-degenerate range.
    double utilization_at(double watts) const {
        double span = p_max_watts - p_idle_watts;
        if (span <= 0) throw std::domain_error("EfficiencyModel: p_max == p_idle, utilization not inferable");
        double u = (watts - p_idle_watts) / span;
        return u < 0 ? 0 : (u > 1 ? 1 : u);
    }
};

struct SensorSample {
    int64_t tick = 0;
    int64_t milliwatts = 0;  // cluster aggregate

    friend bool operator==(const SensorSample&, const SensorSample&) = default;
};

struct SensorTrace {
    int64_t tick_duration_seconds = 1;
    std::vector<SensorSample> samples;

    void validate() const {
        int64_t prev = std::numeric_limits<int64_t>::min();
        for (const auto& s : samples) {
            if (s.milliwatts < 0) throw std::invalid_argument("SensorTrace: negative sample");
            if (s.tick <= prev) throw std::invalid_argument("SensorTrace: ticks must strictly increase");
            prev = s.tick;
        }
    }

    friend bool operator==(const SensorTrace&, const SensorTrace&) = default;
};

inline void to_json(Json& j, const SensorSample& s) {
    j = Json::array({s.tick, s.milliwatts});
}
inline void from_json(const Json& j, SensorSample& s) {
    s.tick = j.at(0).get<int64_t>();
    s.milliwatts = j.at(1).get<int64_t>();
}
inline void to_json(Json& j, const SensorTrace& t) {
    j = Json{{"samples", t.samples}, {"tick_duration_seconds", t.tick_duration_seconds}};
}
inline void from_json(const Json& j, SensorTrace& t) {
    j.at("samples").get_to(t.samples);
    j.at("tick_duration_seconds").get_to(t.tick_duration_seconds);
    t.validate();
}

struct AccountingParams {
    double mfu_conservative = 0.40;
    double hfu_over_mfu_floor = 1.0;  // 1.0 is the most conservative cap
    double accounted_fraction_threshold = 0.95;

    void validate() const {
        if (mfu_conservative <= 0 || mfu_conservative > 1) throw std::invalid_argument("AccountingParams: mfu out of (0,1]");
        if (hfu_over_mfu_floor < 1) throw std::invalid_argument("AccountingParams: hfu/mfu ratio must be >= 1");
        if (accounted_fraction_threshold <= 0 || accounted_fraction_threshold > 1) {
            throw std::invalid_argument("AccountingParams: threshold out of (0,1]");
        }
    }
};

// ---------------------------------------------------------------------------
// Simulation and estimation
// ---------------------------------------------------------------------------

// Standard normal draw from two uniform draws (Box-Muller).
inline double normal_draw(const Seed32& seed, uint64_t index) {
    double u1 = prng_unit_double(seed, "noise.u1", index);
    double u2 = prng_unit_double(seed, "noise.u2", index);
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Per tick: watts = p_idle + (p_max - p_idle) * utilization, times a lognormal
// factor with unit mean and relative std noise_sigma.
inline SensorTrace simulate_power_trace(const detnet::ExecutionTrace& trace, const ClusterSpec& cluster,
                                        const EfficiencyModel& model, const Seed32& noise_seed) {
    (void)cluster;
    model.validate();
    SensorTrace out;
    out.tick_duration_seconds = 1;
    double s = model.noise_sigma > 0 ? std::sqrt(std::log1p(model.noise_sigma * model.noise_sigma)) : 0.0;
    for (const auto& rec : trace.ticks) {
        double u = static_cast<double>(rec.utilization_ppm) / 1e6;
        double watts = model.watts_at(u);
        if (s > 0) {
            double z = normal_draw(noise_seed, static_cast<uint64_t>(rec.tick));
            watts *= std::exp(s * z - 0.5 * s * s);
        }
        out.samples.push_back({rec.tick, static_cast<int64_t>(std::llround(watts * 1000.0))});
    }
    out.validate();
    return out;
}

struct OpsEstimate {
    double ops = 0;
    double error_bound = 0;        // 3-sigma propagated
    bool gap_detected = false;     // missing tick inside the window
    int64_t ticks_covered = 0;

    double lower_bound() const { return ops - error_bound; }
};

// Discrete version of the power integral: sum P(t) * OP_per_W(P(t)) * dt over
// the window, with OP_per_W realized through the inverse utilization map.
inline OpsEstimate estimate_total_ops(const SensorTrace& trace, const EfficiencyModel& model,
                                      int64_t t_a, int64_t t_b) {
    model.validate();
    OpsEstimate est;
    double variance = 0;
    int64_t expected_tick = t_a;
    for (const auto& s : trace.samples) {
        if (s.tick < t_a || s.tick > t_b) continue;
        if (s.tick != expected_tick) est.gap_detected = true;
        expected_tick = s.tick + 1;
        double watts = static_cast<double>(s.milliwatts) / 1000.0;
        double u = model.utilization_at(watts);
        double ops_tick = static_cast<double>(model.peak_ops_per_tick) * u;
        est.ops += ops_tick;
        variance += (ops_tick * model.noise_sigma) * (ops_tick * model.noise_sigma);
        ++est.ticks_covered;
    }
    if (expected_tick <= t_b) est.gap_detected = true;  // window not fully covered
    est.error_bound = 3.0 * std::sqrt(variance);
    return est;
}

// Measured active chip-hours over a sensor trace: ticks whose inferred
// utilization clears a small floor count as active.
inline double measured_active_chip_hours(const SensorTrace& trace, const EfficiencyModel& model,
                                         const ClusterSpec& cluster, double activity_floor = 0.02) {
    int64_t active_ticks = 0;
    for (const auto& s : trace.samples) {
        double u = model.utilization_at(static_cast<double>(s.milliwatts) / 1000.0);
        if (u > activity_floor) ++active_ticks;
    }
    return static_cast<double>(active_ticks) * trace.tick_duration_seconds * cluster.chip_count / 3600.0;
}

// ---------------------------------------------------------------------------
// Table of accounting options
// ---------------------------------------------------------------------------

// Option A: chip-hours accounted = declared model ops / (peak per-chip ops/hr
// * assumed MFU). The assumed MFU acts as a divisor: assuming a higher MFU
// credits fewer chip-hours for the same declared work.
inline double accounted_chip_hours_option_a(double claimed_model_ops, double peak_ops_per_hour,
                                            double mfu_conservative) {
    if (mfu_conservative <= 0 || mfu_conservative > 1) {
        throw std::invalid_argument("accounted_chip_hours_option_a: mfu must be in (0,1]");
    }
    if (peak_ops_per_hour <= 0) throw std::invalid_argument("accounted_chip_hours_option_a: peak must be positive");
    if (claimed_model_ops < 0) throw std::invalid_argument("accounted_chip_hours_option_a: negative ops");
    return claimed_model_ops / (peak_ops_per_hour * mfu_conservative);
}

// Option B: hardware ops accounted = declared model ops * assumed HFU/MFU
// ratio; 1 is the most conservative choice, and exact for inference where
// HFU = MFU.
inline double accounted_hw_ops_option_b(double claimed_model_ops, double hfu_over_mfu) {
    if (hfu_over_mfu < 1) throw std::invalid_argument("accounted_hw_ops_option_b: ratio must be >= 1");
    if (claimed_model_ops < 0) throw std::invalid_argument("accounted_hw_ops_option_b: negative ops");
    return claimed_model_ops * hfu_over_mfu;
}

struct SignatureResult {
    double distance = 0;
    double threshold = 0;
    Verdict verdict;
};

namespace detail {

// Resample a trace onto `target` samples by averaging equal blocks; the
// source length must be an integer multiple of the target length.
inline std::vector<double> resample_watts(const SensorTrace& t, size_t target) {
    std::vector<double> w;
    w.reserve(t.samples.size());
    for (const auto& s : t.samples) w.push_back(static_cast<double>(s.milliwatts) / 1000.0);
    if (w.size() == target) return w;
    if (target == 0 || w.size() % target != 0) {
        throw std::invalid_argument("signature_distance: trace lengths not alignable");
    }
    size_t block = w.size() / target;
    std::vector<double> out(target, 0.0);
    for (size_t i = 0; i < target; ++i) {
        double acc = 0;
        for (size_t k = 0; k < block; ++k) acc += w[i * block + k];
        out[i] = acc / static_cast<double>(block);
    }
    return out;
}

}  // namespace detail

// Option C: normalized RMS distance between the measured power trace and the
// expected signature (the Verifier's noiseless replay). Pass iff the distance
// sits within the noise allowance.
inline SignatureResult signature_distance_option_c(const SensorTrace& expected, const SensorTrace& measured,
                                                   double noise_sigma,
                                                   std::optional<double> threshold = std::nullopt) {
    size_t target = std::min(expected.samples.size(), measured.samples.size());
    if (target == 0) throw std::invalid_argument("signature_distance: empty trace");
    std::vector<double> e = detail::resample_watts(expected, target);
    std::vector<double> m = detail::resample_watts(measured, target);
    double mean_e = 0, mse = 0;
    for (size_t i = 0; i < target; ++i) {
        mean_e += e[i];
        double d = m[i] - e[i];
        mse += d * d;
    }
    mean_e /= static_cast<double>(target);
    mse /= static_cast<double>(target);
    if (mean_e <= 0) throw std::invalid_argument("signature_distance: degenerate expected trace");

    SignatureResult result;
    result.distance = std::sqrt(mse) / mean_e;
    result.threshold = threshold.value_or(3.0 * noise_sigma + 1e-9);
    Evidence ev{"accounting.signature_distance", fmt_value(result.distance), fmt_value(result.threshold)};
    result.verdict = result.distance <= result.threshold ? verdict_pass({ev}) : verdict_fail({ev});
    return result;
}

// Reconciliation: does the accounted compute cover the estimated total? The
// fraction is taken against the lower bound of the estimate so that sensor
// noise cannot fail an honest Prover.
inline Verdict reconcile(const OpsEstimate& total, const std::vector<double>& accounted,
                         const AccountingParams& params, const std::string& units = "ops") {
    params.validate();
    double sum = 0;
    for (double a : accounted) sum += a;

    if (total.gap_detected) {
        return verdict_inconclusive({{"accounting.reconcile." + units, "trace gap", "contiguous window"}});
    }
    if (total.ops <= 0) {
        if (sum > 0) {
            return verdict_inconclusive({{"accounting.reconcile." + units, fmt_value(sum), "total estimate <= 0"}});
        }
        return verdict_pass({{"accounting.reconcile." + units, "1", fmt_value(params.accounted_fraction_threshold)}});
    }
    double lower = total.lower_bound();
    double fraction = lower > 0 ? sum / lower : std::numeric_limits<double>::infinity();
    Evidence ev{"accounting.reconcile." + units, fmt_value(fraction),
                fmt_value(params.accounted_fraction_threshold)};
    if (fraction >= params.accounted_fraction_threshold) return verdict_pass({ev});
    Evidence residual{"accounting.unaccounted_residual." + units, fmt_value(1.0 - fraction), "0"};
    return verdict_fail({ev, residual});
}

}  // namespace verifsim::accounting
