#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "verifsim/accounting.hpp"
#include "verifsim/oracles.hpp"

using namespace verifsim;
using accounting::EfficiencyModel;
using accounting::SensorTrace;

namespace {

ClusterSpec test_cluster() {
    ClusterSpec c;
    c.cluster_id = "test";
    c.chip_count = 4;
    c.peak_ops_per_hour = 1036800;  // 288 ops/s per chip
    c.p_idle_milliwatts = 100000;
    c.p_max_milliwatts = 700000;
    c.chip_ids = {"a", "b", "c", "d"};
    c.memory_bytes = 1 << 20;
    return c;
}

detnet::ExecutionTrace flat_trace(int64_t ticks, int64_t utilization_ppm, int64_t peak_per_tick) {
    detnet::ExecutionTrace t;
    for (int64_t i = 0; i < ticks; ++i) {
        detnet::TickRecord r;
        r.tick = i;
        r.utilization_ppm = utilization_ppm;
        r.hardware_ops = floor_div64(peak_per_tick * utilization_ppm, 1000000);
        t.ticks.push_back(r);
    }
    return t;
}

WorkloadDeclaration training_decl(uint64_t seed) {
    WorkloadDeclaration d;
    d.workload_id = "acct-" + std::to_string(seed);
    d.kind = WorkloadKind::training;
    d.architecture = {8, 16, 8, 4};
    d.optimizer_params.learning_rate = FixedPoint::from_raw(256);
    d.master_seed = seed_from_u64(seed);
    d.segment_count = 6;
    d.batches_per_segment = 2;
    d.batch_size = 8;
    d.node_count = 2;
    d.data_commitment = detnet::dataset_commitment(detnet::make_batches(d));
    d.claimed_model_ops = static_cast<uint64_t>(detnet::declared_model_ops(d));
    return d;
}

}  // namespace

TEST_CASE("simulate_power_trace endpoints") {
    ClusterSpec cluster = test_cluster();
    EfficiencyModel eff = EfficiencyModel::from_cluster(cluster, 1, 0.0);
    int64_t peak = eff.peak_ops_per_tick;

    SensorTrace idle = accounting::simulate_power_trace(flat_trace(16, 0, peak), cluster, eff, Seed32{});
    for (const auto& s : idle.samples) CHECK(s.milliwatts == 400000);  // 4 chips x 100 W

    SensorTrace busy = accounting::simulate_power_trace(flat_trace(16, 1000000, peak), cluster, eff, Seed32{});
    for (const auto& s : busy.samples) CHECK(s.milliwatts == 2800000);  // 4 chips x 700 W
}

TEST_CASE("lognormal sensor noise has the configured relative spread") {
    ClusterSpec cluster = test_cluster();
    EfficiencyModel eff = EfficiencyModel::from_cluster(cluster, 1, 0.01);
    constexpr int64_t kTicks = 10000;
    SensorTrace noisy = accounting::simulate_power_trace(flat_trace(kTicks, 400000, eff.peak_ops_per_tick),
                                                         cluster, eff, seed_from_u64(5));
    double clean_watts = eff.watts_at(0.4);
    double mean = 0;
    for (const auto& s : noisy.samples) mean += static_cast<double>(s.milliwatts) / 1000.0;
    mean /= kTicks;
    // Law of large numbers: the sample mean sits within 0.1% of the noiseless
    // level (3 sigma would be ~0.03%).
    CHECK(std::abs(mean - clean_watts) / clean_watts < 0.001);
}

TEST_CASE("estimate_total_ops endpoints and error bound") {
    ClusterSpec cluster = test_cluster();
    EfficiencyModel eff = EfficiencyModel::from_cluster(cluster, 1, 0.0);

    SensorTrace idle = accounting::simulate_power_trace(flat_trace(100, 0, eff.peak_ops_per_tick),
                                                        cluster, eff, Seed32{});
    accounting::OpsEstimate zero = accounting::estimate_total_ops(idle, eff, 0, 99);
    CHECK(zero.ops == 0.0);
    CHECK_FALSE(zero.gap_detected);

    // Full power for one hour: exactly chip_count * peak_ops_per_hour.
    SensorTrace busy = accounting::simulate_power_trace(flat_trace(3600, 1000000, eff.peak_ops_per_tick),
                                                        cluster, eff, Seed32{});
    accounting::OpsEstimate full = accounting::estimate_total_ops(busy, eff, 0, 3599);
    CHECK(full.ops == static_cast<double>(cluster.chip_count) * cluster.peak_ops_per_hour);
    CHECK(full.error_bound == 0.0);

    // A missing tick inside the window is flagged.
    SensorTrace gappy = busy;
    gappy.samples.erase(gappy.samples.begin() + 100);
    CHECK(accounting::estimate_total_ops(gappy, eff, 0, 3599).gap_detected);
}

TEST_CASE("noiseless estimate matches the engine's hardware ops within a tick") {
    ClusterSpec cluster = test_cluster();
    EfficiencyModel eff = EfficiencyModel::from_cluster(cluster, 1, 0.0);
    detnet::TrainingRun run = detnet::run_training(training_decl(3), cluster);
    SensorTrace trace = accounting::simulate_power_trace(run.trace, cluster, eff, Seed32{});
    accounting::OpsEstimate est =
        accounting::estimate_total_ops(trace, eff, trace.samples.front().tick, trace.samples.back().tick);
    double truth = static_cast<double>(run.trace.total_hardware_ops());
    CHECK(std::abs(est.ops - truth) <= static_cast<double>(eff.peak_ops_per_tick));
}

TEST_CASE("option A: chip-hours accounted") {
    CHECK(accounting::accounted_chip_hours_option_a(100, 100, 0.5) == 2.0);
    CHECK(accounting::accounted_chip_hours_option_a(0, 100, 0.5) == 0.0);
    CHECK_THROWS_AS(accounting::accounted_chip_hours_option_a(100, 100, 0.0), std::invalid_argument);

    // Assuming a higher MFU credits fewer hours.
    double prev = 1e300;
    for (double mfu = 0.1; mfu <= 1.0; mfu += 0.1) {
        double hours = accounting::accounted_chip_hours_option_a(1e9, 1e6, mfu);
        CHECK(hours < prev);
        prev = hours;
    }
}

TEST_CASE("option B: hardware-ops accounted") {
    CHECK(accounting::accounted_hw_ops_option_b(123456, 1.0) == 123456.0);
    CHECK(accounting::accounted_hw_ops_option_b(1e6, 1.5) == 1.5e6);
    CHECK_THROWS_AS(accounting::accounted_hw_ops_option_b(1e6, 0.99), std::invalid_argument);

    // Conservativeness: with the floor ratio, accounted ops never exceed true
    // hardware ops as long as the true HFU/MFU ratio is at least the assumed
    // one. In this engine inference has HFU = MFU exactly.
    ClusterSpec cluster = test_cluster();
    for (uint64_t seed = 0; seed < 100; ++seed) {
        WorkloadDeclaration d = training_decl(seed);
        d.kind = WorkloadKind::inference;
        d.workload_id = "inf-" + std::to_string(seed);
        d.claimed_model_ops = static_cast<uint64_t>(detnet::declared_model_ops(d));
        std::vector<detnet::Batch> batches = detnet::make_batches(d);
        detnet::Weights w = detnet::init_weights(d.architecture, seed_from_u64(seed + 1));
        detnet::InferenceRun run = detnet::run_inference(d, batches, w, cluster);
        double accounted = accounting::accounted_hw_ops_option_b(static_cast<double>(d.claimed_model_ops), 1.0);
        CHECK(accounted == static_cast<double>(run.trace.total_hardware_ops()));
    }
}

TEST_CASE("option C: signature distance") {
    ClusterSpec cluster = test_cluster();
    EfficiencyModel clean = EfficiencyModel::from_cluster(cluster, 1, 0.0);
    detnet::ExecutionTrace steady = flat_trace(200, 400000, clean.peak_ops_per_tick);
    SensorTrace expected = accounting::simulate_power_trace(steady, cluster, clean, Seed32{});

    // Identical traces: distance 0, pass.
    auto same = accounting::signature_distance_option_c(expected, expected, 0.0);
    CHECK(same.distance == 0.0);
    CHECK(same.verdict.status == VerdictStatus::pass);

    // A duty-cycled (inference-shaped) measured trace against a declared
    // steady training signature: fail.
    detnet::ExecutionTrace bursty;
    for (int64_t i = 0; i < 200; ++i) {
        detnet::TickRecord r;
        r.tick = i;
        r.utilization_ppm = (i % 2 == 0) ? 800000 : 0;
        r.hardware_ops = (i % 2 == 0) ? floor_div64(clean.peak_ops_per_tick * 800000, 1000000) : 0;
        bursty.ticks.push_back(r);
    }
    SensorTrace measured_bursty = accounting::simulate_power_trace(bursty, cluster, clean, Seed32{});
    auto mismatch = accounting::signature_distance_option_c(expected, measured_bursty, 0.01);
    CHECK(mismatch.verdict.status == VerdictStatus::fail);

    // Honest runs under 1% sensor noise pass nearly always.
    EfficiencyModel noisy = EfficiencyModel::from_cluster(cluster, 1, 0.01);
    int passes = 0;
    for (int trial = 0; trial < 100; ++trial) {
        SensorTrace measured =
            accounting::simulate_power_trace(steady, cluster, noisy, seed_from_u64(900 + trial));
        auto r = accounting::signature_distance_option_c(expected, measured, 0.01);
        if (r.verdict.status == VerdictStatus::pass) ++passes;
    }
    CHECK(passes >= 99);
}

TEST_CASE("signature distance resamples integer-ratio traces and rejects others") {
    ClusterSpec cluster = test_cluster();
    EfficiencyModel eff = EfficiencyModel::from_cluster(cluster, 1, 0.0);
    SensorTrace fine = accounting::simulate_power_trace(flat_trace(100, 400000, eff.peak_ops_per_tick),
                                                        cluster, eff, Seed32{});
    SensorTrace coarse = fine;
    coarse.samples.resize(50);
    auto r = accounting::signature_distance_option_c(coarse, fine, 0.0);
    CHECK(r.distance == 0.0);  // averaging a constant trace changes nothing

    SensorTrace odd = fine;
    odd.samples.resize(73);
    CHECK_THROWS_AS(accounting::signature_distance_option_c(odd, fine, 0.0), std::invalid_argument);
}

TEST_CASE("reconcile thresholds and degenerate cases") {
    accounting::AccountingParams params;

    accounting::OpsEstimate total;
    total.ops = 1000.0;
    total.error_bound = 0.0;
    CHECK(accounting::reconcile(total, {1000.0}, params).status == VerdictStatus::pass);
    CHECK(accounting::reconcile(total, {900.0}, params).status == VerdictStatus::fail);

    accounting::OpsEstimate zero;
    CHECK(accounting::reconcile(zero, {10.0}, params).status == VerdictStatus::inconclusive);
    CHECK(accounting::reconcile(zero, {}, params).status == VerdictStatus::pass);

    accounting::OpsEstimate gap;
    gap.ops = 1000.0;
    gap.gap_detected = true;
    CHECK(accounting::reconcile(gap, {1000.0}, params).status == VerdictStatus::inconclusive);

    // The unaccounted residual is reported on failure.
    Verdict fail = accounting::reconcile(total, {700.0}, params);
    REQUIRE(fail.evidence.size() == 2);
    CHECK(fail.evidence[1].check == "accounting.unaccounted_residual.ops");
}

TEST_CASE("reconcile under noise: honest passes, 20% undeclared fails") {
    ClusterSpec cluster = test_cluster();
    accounting::AccountingParams params;
    EfficiencyModel noisy = EfficiencyModel::from_cluster(cluster, 1, 0.01);

    detnet::ExecutionTrace declared = flat_trace(600, 400000, noisy.peak_ops_per_tick);
    double declared_ops = 0;
    for (const auto& t : declared.ticks) declared_ops += static_cast<double>(t.hardware_ops);

    int honest_pass = 0, attack_fail = 0;
    constexpr int kTrials = 100;
    for (int trial = 0; trial < kTrials; ++trial) {
        SensorTrace honest =
            accounting::simulate_power_trace(declared, cluster, noisy, seed_from_u64(3000 + trial));
        accounting::OpsEstimate est = accounting::estimate_total_ops(honest, noisy, 0, 599);
        if (accounting::reconcile(est, {declared_ops}, params).status == VerdictStatus::pass) ++honest_pass;

        detnet::ExecutionTrace padded = declared;
        for (int64_t i = 0; i < 120; ++i) {  // 20% more active ticks, undeclared
            detnet::TickRecord r = declared.ticks[0];
            r.tick = 600 + i;
            padded.ticks.push_back(r);
        }
        SensorTrace attacked =
            accounting::simulate_power_trace(padded, cluster, noisy, seed_from_u64(4000 + trial));
        accounting::OpsEstimate est2 = accounting::estimate_total_ops(attacked, noisy, 0, 719);
        if (accounting::reconcile(est2, {declared_ops}, params).status == VerdictStatus::fail) ++attack_fail;
    }
    CHECK(honest_pass >= 99);
    CHECK(attack_fail >= 99);
}

TEST_CASE("measured active chip-hours ignores idle ticks") {
    ClusterSpec cluster = test_cluster();
    EfficiencyModel eff = EfficiencyModel::from_cluster(cluster, 1, 0.0);
    detnet::ExecutionTrace mixed;
    for (int64_t i = 0; i < 100; ++i) {
        detnet::TickRecord r;
        r.tick = i;
        r.utilization_ppm = (i < 60) ? 400000 : 0;
        r.hardware_ops = (i < 60) ? floor_div64(eff.peak_ops_per_tick * 400000, 1000000) : 0;
        mixed.ticks.push_back(r);
    }
    SensorTrace trace = accounting::simulate_power_trace(mixed, cluster, eff, Seed32{});
    double hours = accounting::measured_active_chip_hours(trace, eff, cluster);
    CHECK(hours == Catch::Approx(60.0 * 4 / 3600.0));
}
