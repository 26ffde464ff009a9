// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Every tolerance is pinned here, in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "verifsim/io.hpp"
#include "verifsim/oracles.hpp"
#include "verifsim/scenario.hpp"
#include "verifsim/shadow.hpp"

using namespace verifsim;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %2d. %s: %s\n", ok ? "PASS" : "FAIL", number, name.c_str(), detail.c_str());
    if (!ok) ++g_failures;
}

ClusterSpec acceptance_cluster() {
    ClusterSpec c;
    c.cluster_id = "acceptance";
    c.chip_count = 4;
    c.peak_ops_per_hour = 1036800;
    c.p_idle_milliwatts = 100000;
    c.p_max_milliwatts = 700000;
    c.chip_ids = {"a", "b", "c", "d"};
    c.memory_bytes = 1 << 20;
    return c;
}

WorkloadDeclaration make_decl(uint64_t seed, std::vector<int32_t> arch, uint32_t segments,
                              OptimizerFamily family = OptimizerFamily::sgd) {
    WorkloadDeclaration d;
    d.workload_id = "acc-" + std::to_string(seed);
    d.kind = WorkloadKind::training;
    d.architecture = std::move(arch);
    d.optimizer_family = family;
    d.optimizer_params.learning_rate = FixedPoint::from_raw(256);
    d.master_seed = seed_from_u64(seed);
    d.segment_count = segments;
    d.batches_per_segment = 2;
    d.batch_size = 8;
    d.node_count = 2;
    d.data_commitment = detnet::dataset_commitment(detnet::make_batches(d));
    d.claimed_model_ops = static_cast<uint64_t>(detnet::declared_model_ops(d));
    return d;
}

// --------------------------------------------------------------------------

void criterion_1_overhead_arithmetic() {
    datacheck::HardwareCostModel model;
    model.flops_per_second = 1.98e15;
    model.params_count = 70e9;
    model.bytes_in = 2;
    model.bytes_out = 2;
    model.ssd_write_bytes_per_second = 7e9;
    model.ssd_price_per_byte = 90.0 / 2e12;
    model.gpu_price_per_hour = 2.0;
    model.amortization_months = 12;
    auto r = datacheck::storage_overhead(model);

    double throughput_kbs = r.throughput_bytes_per_second / 1000.0;
    bool throughput_ok = std::abs(throughput_kbs - 57.0) <= 1.0;
    bool cost_ok = r.cost_overhead_fraction >= 0.5e-4 && r.cost_overhead_fraction <= 5e-4;
    char buf[160];
    std::snprintf(buf, sizeof buf, "throughput %.2f KB/s (want 57 +/- 1), cost overhead %.3g (want [5e-5, 5e-4])",
                  throughput_kbs, r.cost_overhead_fraction);
    report(1, "storage overhead arithmetic", throughput_ok && cost_ok, buf);
}

void criterion_2_cluster_equivalence() {
    int64_t got = cluster_equivalent_chips(660600000000000LL, 100, 1979000000000000LL);
    report(2, "cluster equivalence", got == 33, "100 gaming GPUs = " + std::to_string(got) + " reference chips (want 33)");
}

void criterion_3_saturation_demo() {
    auto sat = detnet::overflow_mode_demo(127, 50, -50, detnet::OverflowMode::saturate);
    auto wrap = detnet::overflow_mode_demo(127, 50, -50, detnet::OverflowMode::wrap);
    bool demo_ok = sat.left_grouping == 77 && sat.right_grouping == 127 &&
                   wrap.left_grouping == 127 && wrap.right_grouping == 127;
    auto t0 = std::chrono::steady_clock::now();
    oracles::WrapExhaustiveResult sweep = oracles::wrap_exhaustive();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool sweep_ok = sweep.triples_checked == (1 << 24) && sweep.wrap_mismatches == 0 &&
                    sweep.saturate_mismatches > 0 && secs < 10.0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "saturate 77 vs 127, wrap associative over %lld triples (%lld saturate violations) in %.2fs",
                  static_cast<long long>(sweep.triples_checked),
                  static_cast<long long>(sweep.saturate_mismatches), secs);
    report(3, "overflow behavior demo", demo_ok && sweep_ok, buf);
}

void criterion_4_bit_exact_replay() {
    const std::vector<std::vector<int32_t>> archs = {
        {8, 16, 8, 4}, {16, 24, 8, 4}, {4, 32, 16, 2}, {24, 16, 24}};
    ClusterSpec cluster = acceptance_cluster();
    auto t0 = std::chrono::steady_clock::now();
    int mismatches = 0;
    for (uint64_t run_idx = 0; run_idx < 100; ++run_idx) {
        const auto& arch = archs[run_idx % archs.size()];
        uint32_t segments = 5 + static_cast<uint32_t>(run_idx % 16);  // up to 20
        OptimizerFamily family = static_cast<OptimizerFamily>(run_idx % 3);
        WorkloadDeclaration d = make_decl(42000 + run_idx, arch, segments, family);
        detnet::TrainingRun run = detnet::run_training(d, cluster);
        reexec::SegmentSample all = reexec::select_segments(segments, seed_from_u64(run_idx), segments);
        Verdict v = reexec::verify_faithfulness(d, run.transcript, all, run.batches);
        if (v.status != VerdictStatus::pass) ++mismatches;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[160];
    std::snprintf(buf, sizeof buf, "100 seeded runs fully re-executed, %d commitment mismatches in %.1fs (budget 60s)",
                  mismatches, secs);
    report(4, "bit-exact replay", mismatches == 0 && secs < 60.0, buf);
}

void criterion_5_gradient_oracle() {
    int checked = 0;
    int violations = 0;
    double worst = 0;
    uint64_t seed_value = 77000;
    while (checked < 50) {
        // Nets of at most 64 weights.
        std::vector<int32_t> arch = (checked % 2 == 0) ? std::vector<int32_t>{3, 4, 2}
                                                       : std::vector<int32_t>{4, 6, 2};
        WorkloadDeclaration d = make_decl(seed_value, arch, 1);
        d.batch_size = 4;
        detnet::Weights w = detnet::init_weights(arch, d.master_seed);
        detnet::Batch batch = detnet::make_batch(d, 0);
        auto net = detnet::shadow::from_fixed(w);
        auto sb = detnet::shadow::from_fixed(batch);
        ++seed_value;

        // Finite differences need smoothness: skip fixtures whose hidden
        // pre-activations sit within h of a clamp kink.
        bool near_kink = false;
        for (uint32_t s = 0; s < sb.items && !near_kink; ++s) {
            std::vector<double> cur(sb.inputs.begin() + s * arch.front(),
                                    sb.inputs.begin() + (s + 1) * arch.front());
            for (size_t l = 0; l + 1 < arch.size(); ++l) {
                std::vector<double> next(arch[l + 1], 0.0);
                for (int32_t j = 0; j < arch[l + 1]; ++j) {
                    double acc = 0;
                    for (int32_t i = 0; i < arch[l]; ++i) {
                        acc += net.w[l][static_cast<size_t>(j) * arch[l] + i] * cur[i];
                    }
                    double z = acc + net.b[l][j];
                    if (l + 2 < arch.size() &&
                        (std::abs(z) < 1e-3 || std::abs(z - detnet::shadow::kActClamp) < 1e-3)) {
                        near_kink = true;
                    }
                    next[j] = (l + 2 < arch.size()) ? detnet::shadow::clamped_relu(z) : z;
                }
                cur = next;
            }
        }
        if (near_kink) continue;

        auto analytic = detnet::shadow::backward(net, sb);
        auto fd = oracles::finite_difference_gradient(net, sb);
        double num = 0, den = 0;
        for (size_t l = 0; l < analytic.w.size(); ++l) {
            for (size_t i = 0; i < analytic.w[l].size(); ++i) {
                double dv = analytic.w[l][i] - fd.w[l][i];
                num += dv * dv;
                den += fd.w[l][i] * fd.w[l][i];
            }
            for (size_t i = 0; i < analytic.b[l].size(); ++i) {
                double dv = analytic.b[l][i] - fd.b[l][i];
                num += dv * dv;
                den += fd.b[l][i] * fd.b[l][i];
            }
        }
        double rel = std::sqrt(num / std::max(den, 1e-12));
        worst = std::max(worst, rel);
        if (rel >= 1e-3) ++violations;
        ++checked;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "50 fixture nets, worst relative error %.2e (tolerance 1e-3)", worst);
    report(5, "gradient vs finite differences", violations == 0, buf);
}

void criterion_6_glue_detection() {
    ClusterSpec cluster = acceptance_cluster();
    auto run_for = [&](uint64_t seed) { return detnet::run_training(make_decl(seed, {8, 16, 8, 4}, 10), cluster); };

    int detected_at_seam = 0;
    constexpr uint32_t kSeam = 5;
    for (uint64_t t = 0; t < 100; ++t) {
        detnet::TrainingRun a = run_for(61000 + t);
        WorkloadDeclaration foreign = make_decl(61000 + t, {8, 16, 8, 4}, 10);
        foreign.master_seed = seed_from_u64(81000 + t);
        foreign.data_commitment = detnet::dataset_commitment(detnet::make_batches(foreign));
        detnet::TrainingRun b = detnet::run_training(foreign, cluster);
        detnet::TrainingTranscript glued = a.transcript;
        for (uint32_t i = kSeam + 1; i <= 10; ++i) glued.checkpoints[i] = b.transcript.checkpoints[i];
        Verdict v = reexec::detect_glue(glued, a.batches);
        if (v.status != VerdictStatus::fail) continue;
        for (const auto& ev : v.evidence) {
            if (ev.check.find("boundary_" + std::to_string(kSeam)) != std::string::npos) {
                ++detected_at_seam;
                break;
            }
        }
    }

    int false_positives = 0;
    for (uint64_t t = 0; t < 200; ++t) {
        detnet::TrainingRun honest = run_for(91000 + t);
        if (reexec::detect_glue(honest.transcript, honest.batches).status != VerdictStatus::pass) {
            ++false_positives;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "seam flagged %d/100 (need >= 95), honest false positives %d/200 (need 0)",
                  detected_at_seam, false_positives);
    report(6, "glue detection", detected_at_seam >= 95 && false_positives == 0, buf);
}

void criterion_7_accounting_detection() {
    ClusterSpec cluster = acceptance_cluster();
    accounting::AccountingParams params;  // threshold 0.95
    accounting::EfficiencyModel eff = accounting::EfficiencyModel::from_cluster(cluster, 1, 0.01);

    // The declared cluster timeline: a steady training-shaped load.
    detnet::ExecutionTrace declared;
    int64_t per_tick = floor_div64(eff.peak_ops_per_tick * 400000, 1000000);
    for (int64_t i = 0; i < 600; ++i) {
        detnet::TickRecord r;
        r.tick = i;
        r.utilization_ppm = 400000;
        r.hardware_ops = per_tick;
        declared.ticks.push_back(r);
    }
    double declared_ops = static_cast<double>(declared.total_hardware_ops());

    auto detection_count = [&](double extra_fraction, uint64_t seed_base) {
        int fails = 0;
        for (uint64_t t = 0; t < 100; ++t) {
            detnet::ExecutionTrace timeline = declared;
            int64_t extra = static_cast<int64_t>(600 * extra_fraction);
            for (int64_t i = 0; i < extra; ++i) {
                detnet::TickRecord r = declared.ticks[0];
                r.tick = 600 + i;
                timeline.ticks.push_back(r);
            }
            accounting::SensorTrace trace =
                accounting::simulate_power_trace(timeline, cluster, eff, seed_from_u64(seed_base + t));
            accounting::OpsEstimate est =
                accounting::estimate_total_ops(trace, eff, 0, 600 + extra - 1);
            if (accounting::reconcile(est, {declared_ops}, params).status == VerdictStatus::fail) ++fails;
        }
        return fails;
    };

    int rate_0 = detection_count(0.00, 100000);
    int rate_5 = detection_count(0.05, 200000);
    int rate_10 = detection_count(0.10, 300000);
    int rate_20 = detection_count(0.20, 400000);
    int honest_passes = 100 - rate_0;

    bool monotone = rate_0 <= rate_5 && rate_5 <= rate_10 && rate_10 <= rate_20;
    bool ok = honest_passes >= 99 && rate_20 >= 99 && monotone;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "honest pass %d/100 (need >= 99); detection at {0,5,10,20}%% = {%d,%d,%d,%d}/100, 20%% needs >= 99, monotone %s",
                  honest_passes, rate_0, rate_5, rate_10, rate_20, monotone ? "yes" : "no");
    report(7, "accounting detection", ok, buf);
}

void criterion_8_certificate_completeness() {
    Hash32 fw = commit(std::string("fw"));
    attest::BootResult boot = attest::boot_chip("acc-chip", fw, {fw});
    attest::ChipState chip = *boot.chip;
    chip.license_expiry_tick = 1000000;
    std::vector<attest::WorkloadCertificate> certs;
    for (int i = 0; i < 10; ++i) {
        certs.push_back(*attest::issue_certificate(chip, commit(std::string("d")),
                                                   commit(std::string("r")), 100));
    }

    int deletions_caught = 0;
    for (size_t victim = 0; victim < certs.size(); ++victim) {
        std::vector<attest::WorkloadCertificate> partial = certs;
        partial.erase(partial.begin() + static_cast<ptrdiff_t>(victim));
        if (attest::check_counter_continuity(partial, 10).status == VerdictStatus::fail) ++deletions_caught;
    }

    Bytes body = canonical_encode(certs[0].body);
    attest::PublicKey pk = attest::chip_public_key("acc-chip");
    size_t flips_caught = 0;
    size_t total_flips = body.size() * 8;
    for (size_t bit = 0; bit < total_flips; ++bit) {
        Bytes flipped = body;
        flipped[bit / 8] ^= static_cast<uint8_t>(1u << (bit % 8));
        if (!attest::verify_detached(certs[0].signature, flipped, pk)) ++flips_caught;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "deletions caught %d/10, body bit flips caught %zu/%zu",
                  deletions_caught, flips_caught, total_flips);
    report(8, "certificate completeness", deletions_caught == 10 && flips_caught == total_flips, buf);
}

void criterion_9_tap_detection() {
    WorkloadDeclaration d = make_decl(95000, {4, 8, 2}, 5);
    d.batch_size = 8;
    std::vector<detnet::Batch> batches = detnet::make_batches(d);
    std::vector<nettap::ClusterMessage> honest = nettap::emit_training_messages(d, batches);

    auto measure = [&](double p, int m, uint64_t seed_base) {
        std::vector<nettap::ClusterMessage> stream = honest;
        for (int i = 0; i < m; ++i) {
            nettap::ClusterMessage covert;
            covert.tick = 5000 + i;
            covert.src_node = 0;
            covert.dst_node = 1;
            covert.kind = nettap::MessageKind::other;
            covert.payload_commitment = seed_from_u64(777000 + i);
            covert.payload_bytes = 256;
            stream.insert(stream.begin() + (i * 5) % static_cast<int>(stream.size()), covert);
        }
        int64_t rate_ppm = static_cast<int64_t>(p * 1e6);
        int detected = 0;
        constexpr int kTrials = 1000;
        for (int t = 0; t < kTrials; ++t) {
            nettap::TapLog log = nettap::tap_sample(stream, rate_ppm, seed_from_u64(seed_base + t));
            for (const auto& e : log.entries) {
                if (e.message.kind == nettap::MessageKind::other) {
                    ++detected;
                    break;
                }
            }
        }
        return static_cast<double>(detected) / kTrials;
    };

    bool ok = true;
    std::string detail;
    for (auto [p, m, base] : {std::tuple<double, int, uint64_t>{0.5, 10, 500000},
                              std::tuple<double, int, uint64_t>{0.1, 50, 600000}}) {
        double expected = oracles::covert_detection_probability(p, m);
        double sigma = std::sqrt(expected * (1 - expected) / 1000.0);
        double measured = measure(p, m, base);
        bool within = std::abs(measured - expected) <= 3 * sigma;
        ok = ok && within;
        char buf[120];
        std::snprintf(buf, sizeof buf, "(p=%.1f,m=%d): measured %.4f expected %.4f (3 sigma %.4f); ", p, m,
                      measured, expected, 3 * sigma);
        detail += buf;
    }
    report(9, "tap detection formula", ok, detail);
}

void criterion_10_option_b_conservativeness() {
    ClusterSpec cluster = acceptance_cluster();
    int exact = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        WorkloadDeclaration d = make_decl(33000 + seed, {8, 16, 4}, 1);
        d.kind = WorkloadKind::inference;
        d.batches_per_segment = 4;
        d.claimed_model_ops = static_cast<uint64_t>(detnet::declared_model_ops(d));
        std::vector<detnet::Batch> batches = detnet::make_batches(d);
        detnet::Weights w = detnet::init_weights(d.architecture, seed_from_u64(seed));
        detnet::InferenceRun run = detnet::run_inference(d, batches, w, cluster);
        double accounted =
            accounting::accounted_hw_ops_option_b(static_cast<double>(d.claimed_model_ops), 1.0);
        if (accounted == static_cast<double>(run.trace.total_hardware_ops())) ++exact;
    }
    report(10, "option B conservativeness (inference)", exact == 100,
           "accounted == true hardware ops in " + std::to_string(exact) + "/100 runs (ratio 1)");
}

std::string file_digest(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return to_hex(commit(ss.str()));
}

void criterion_11_end_to_end_determinism() {
#ifndef VERIFSIM_CLI_PATH
#error "VERIFSIM_CLI_PATH must be defined"
#endif
    fs::path cli = VERIFSIM_CLI_PATH;
    fs::path scenario_file =
        fs::path(VERIFSIM_SOURCE_DIR) / "fixtures" / "scenarios" / "honest.scenario.json";
    fs::path base = fs::temp_directory_path() / "verifsim-acceptance";
    fs::remove_all(base);
    fs::create_directories(base);

    auto run_pipeline = [&](const std::string& name) {
        fs::path dir = base / name;
        std::string sim = cli.string() + " simulate --scenario " + scenario_file.string() +
                          " --seed 2024 --out " + dir.string() + " > /dev/null";
        std::string ver = cli.string() + " verify " + dir.string() + " > /dev/null";
        if (std::system(sim.c_str()) != 0) return std::string("simulate failed");
        if (std::system(ver.c_str()) != 0) return std::string("verify failed");
        return std::string();
    };

    std::string err = run_pipeline("a");
    if (err.empty()) err = run_pipeline("b");
    bool identical = err.empty();
    int files_compared = 0;
    if (identical) {
        for (const auto& entry : fs::directory_iterator(base / "a")) {
            fs::path other = base / "b" / entry.path().filename();
            ++files_compared;
            if (!fs::exists(other) || file_digest(entry.path()) != file_digest(other)) {
                identical = false;
                err = "mismatch at " + entry.path().filename().string();
                break;
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d artifacts hash-identical across two simulate+verify runs%s%s",
                  files_compared, err.empty() ? "" : "; ", err.c_str());
    report(11, "end-to-end determinism", identical && files_compared > 30, buf);
    fs::remove_all(base);
}

}  // namespace

int main() {
    std::printf("verifsim acceptance suite\n");
    criterion_1_overhead_arithmetic();
    criterion_2_cluster_equivalence();
    criterion_3_saturation_demo();
    criterion_4_bit_exact_replay();
    criterion_5_gradient_oracle();
    criterion_6_glue_detection();
    criterion_7_accounting_detection();
    criterion_8_certificate_completeness();
    criterion_9_tap_detection();
    criterion_10_option_b_conservativeness();
    criterion_11_end_to_end_determinism();
    if (g_failures == 0) {
        std::printf("all 11 criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures == 0 ? 0 : 1;
}
