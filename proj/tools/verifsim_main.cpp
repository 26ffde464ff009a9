// verifsim: deterministic Prover/Verifier simulator for compute-use
// verification. File-based pipeline: `simulate` writes a run directory,
// `verify` checks it and writes a report, `attack` measures detection rates
// over seeded trials, `report` renders results, `oracle` emits the reference
// values used by the test suite.

#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "verifsim/io.hpp"
#include "verifsim/oracles.hpp"
#include "verifsim/svg.hpp"

namespace {

using namespace verifsim;

constexpr int kExitOk = 0;
constexpr int kExitBadConfig = 2;
constexpr int kExitNonCompliant = 3;
constexpr int kExitInconclusive = 4;

std::string resolve_out(const std::string& flag_value) {
    // The environment override wins; batch pipelines use it to redirect whole
    // job trees without touching argv.
    if (const char* env = std::getenv("VERIFSIM_OUT")) {
        if (*env) return env;
    }
    return flag_value;
}

scenario::MechanismToggles parse_toggles(const std::vector<std::string>& toggle_flags) {
    scenario::MechanismToggles toggles;
    for (const std::string& t : toggle_flags) {
        size_t eq = t.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--toggle expects <mechanism>=<on|off>");
        std::string name = t.substr(0, eq);
        std::string value = t.substr(eq + 1);
        const auto& known = scenario::known_mechanisms();
        if (std::find(known.begin(), known.end(), name) == known.end()) {
            throw CLI::ValidationError("unknown mechanism: " + name);
        }
        if (value != "on" && value != "off") throw CLI::ValidationError("--toggle value must be on or off");
        toggles.overrides[name] = (value == "on");
    }
    return toggles;
}

int cmd_simulate(const std::string& scenario_path, std::optional<uint64_t> seed,
                 std::optional<double> noise_sigma, const std::string& out_dir) {
    scenario::Scenario sc = io::read_json_file<scenario::Scenario>(scenario_path);
    if (seed) sc.seed = *seed;
    if (noise_sigma) sc.noise_sigma_ppm = static_cast<int64_t>(*noise_sigma * 1e6);
    sc.validate();
    scenario::RunArtifacts art = scenario::simulate_prover(sc);
    io::write_run_dir(out_dir, art);
    std::cout << "simulated scenario '" << sc.name << "' (behavior " << scenario::to_string(sc.behavior)
              << ", seed " << sc.seed << ") into " << out_dir << "\n";
    for (const auto& e : art.event_log) std::cout << "  event: " << e << "\n";
    return kExitOk;
}

int cmd_verify(const std::string& run_dir, uint64_t verifier_seed,
               const scenario::MechanismToggles& toggles) {
    scenario::RunArtifacts art = io::read_run_dir(run_dir);
    scenario::VerifierConfig config;
    config.toggles = toggles;
    config.verifier_seed = verifier_seed;
    VerificationReport report = scenario::run_verifier(art, config);
    io::write_json_file(io::fs::path(run_dir) / "report.report.json", report);

    for (const auto& [subgoal, verdicts] : report.subgoals) {
        for (const auto& v : verdicts) {
            std::cout << to_string(subgoal) << " " << to_string(v.status);
            if (!v.evidence.empty()) {
                std::cout << "  [" << v.evidence.front().check << " = " << v.evidence.front().measured
                          << ", threshold " << v.evidence.front().threshold << "]";
            }
            std::cout << "\n";
        }
    }
    std::cout << "overall: " << to_string(report.overall) << "\n";
    switch (report.overall) {
        case OverallStatus::compliant: return kExitOk;
        case OverallStatus::non_compliant: return kExitNonCompliant;
        case OverallStatus::inconclusive: return kExitInconclusive;
    }
    return kExitBadConfig;
}

scenario::DetectionSummary run_trials_parallel(const scenario::Scenario& tmpl, int64_t trials,
                                               const scenario::VerifierConfig& config, int jobs) {
    if (jobs <= 1 || trials < 4) return scenario::detection_rate(tmpl, trials, config);
    // Deterministic partition: each worker owns a contiguous trial range and
    // trial seeds depend only on the trial index, so the merged summary is
    // independent of the job count.
    std::vector<scenario::DetectionSummary> parts(static_cast<size_t>(jobs));
    std::vector<std::thread> workers;
    int64_t chunk = (trials + jobs - 1) / jobs;
    for (int w = 0; w < jobs; ++w) {
        int64_t begin = w * chunk;
        int64_t end = std::min(trials, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&, w, begin, end] {
            scenario::DetectionSummary local;
            local.trials = end - begin;
            for (int64_t t = begin; t < end; ++t) {
                scenario::Scenario s = tmpl;
                s.seed = load_u64_be(derive_seed(seed_from_u64(tmpl.seed), "trial", t).data());
                scenario::VerifierConfig cfg = config;
                cfg.verifier_seed = s.seed ^ 0x5eedf00dULL;
                scenario::ScenarioRun run = scenario::run_scenario(s, cfg);
                bool any_fail = false;
                for (const auto& [subgoal, verdicts] : run.report.subgoals) {
                    bool subgoal_fail = false;
                    for (const auto& v : verdicts) {
                        if (v.status == VerdictStatus::fail) {
                            subgoal_fail = true;
                            ++local.per_mechanism[scenario::mechanism_of(v)];
                        }
                    }
                    if (subgoal_fail) {
                        ++local.per_subgoal[subgoal];
                        any_fail = true;
                    }
                }
                if (any_fail) ++local.overall_detected;
            }
            parts[static_cast<size_t>(w)] = std::move(local);
        });
    }
    for (auto& t : workers) t.join();

    scenario::DetectionSummary merged;
    merged.scenario_name = tmpl.name;
    merged.trials = trials;
    for (const auto& p : parts) {
        merged.overall_detected += p.overall_detected;
        for (const auto& [k, v] : p.per_mechanism) merged.per_mechanism[k] += v;
        for (const auto& [k, v] : p.per_subgoal) merged.per_subgoal[k] += v;
    }
    double weakest = 1.0;
    bool any = false;
    for (const auto& [subgoal, count] : merged.per_subgoal) {
        if (count > 0) {
            any = true;
            weakest = std::min(weakest, static_cast<double>(count) / trials);
        }
    }
    merged.weakest_link_rate = any ? weakest : 0.0;
    return merged;
}

int cmd_attack(const std::string& scenario_path, std::optional<uint64_t> seed, int64_t trials, int jobs,
               const std::string& sweep, const std::string& format,
               const scenario::MechanismToggles& toggles, const std::string& out_dir) {
    scenario::Scenario tmpl = io::read_json_file<scenario::Scenario>(scenario_path);
    if (seed) tmpl.seed = *seed;
    tmpl.validate();
    scenario::VerifierConfig config;
    config.toggles = toggles;

    io::fs::create_directories(out_dir);
    std::vector<int64_t> magnitudes;
    if (!sweep.empty()) {
        std::stringstream ss(sweep);
        std::string part;
        while (std::getline(ss, part, ',')) magnitudes.push_back(std::stoll(part));
    } else {
        magnitudes.push_back(tmpl.magnitude_ppm);
    }

    Json all = Json::array();
    svg::Series curve{"detection rate", "#c0392b", {}, {}};
    for (int64_t mag : magnitudes) {
        scenario::Scenario s = tmpl;
        if (mag > 0) {
            s.magnitude_ppm = mag;
        } else if (magnitudes.size() > 1) {
            s.behavior = scenario::Behavior::honest;  // zero magnitude = honest baseline
        }
        scenario::DetectionSummary summary = run_trials_parallel(s, trials, config, jobs);
        double rate = static_cast<double>(summary.overall_detected) / summary.trials;
        std::cout << "scenario " << s.name << " magnitude_ppm " << mag << ": detected "
                  << summary.overall_detected << "/" << summary.trials << " (weakest link "
                  << summary.weakest_link_rate << ")\n";
        for (const auto& [mech, count] : summary.per_mechanism) {
            std::cout << "  " << mech << ": " << count << "/" << summary.trials << "\n";
        }
        Json entry = summary;
        entry["magnitude_ppm"] = mag;
        all.push_back(entry);
        curve.x.push_back(static_cast<double>(mag) / 1e6);
        curve.y.push_back(rate);
    }
    io::write_file(io::fs::path(out_dir) / (tmpl.name + ".summary.json"), canonical_dump(all));
    if (format == "svg" && curve.x.size() > 1) {
        io::write_file(io::fs::path(out_dir) / (tmpl.name + "_detection.svg"),
                       svg::line_chart({curve}, "detection rate vs attack magnitude"));
    }
    return kExitOk;
}

int cmd_report(const std::string& run_dir, const std::string& format, const std::string& out_path) {
    if (format == "json") {
        std::cout << io::read_file(io::fs::path(run_dir) / "report.report.json") << "\n";
        return kExitOk;
    }
    // svg: measured power trace against the Verifier's noiseless replay.
    scenario::RunArtifacts art = io::read_run_dir(run_dir);
    detnet::ExecutionTrace expected_engine = scenario::detail::replay_expected_trace(art);
    accounting::EfficiencyModel eff = accounting::EfficiencyModel::from_cluster(art.cluster, 1, 0.0);
    accounting::SensorTrace expected =
        accounting::simulate_power_trace(expected_engine, art.cluster, eff, Seed32{});

    svg::Series measured{"measured", "#2980b9", {}, {}};
    for (const auto& s : art.sensor_trace.samples) {
        measured.x.push_back(static_cast<double>(s.tick));
        measured.y.push_back(static_cast<double>(s.milliwatts) / 1000.0);
    }
    svg::Series exp{"expected (replay)", "#27ae60", {}, {}};
    for (const auto& s : expected.samples) {
        exp.x.push_back(static_cast<double>(s.tick));
        exp.y.push_back(static_cast<double>(s.milliwatts) / 1000.0);
    }
    std::string path = out_path.empty() ? (io::fs::path(run_dir) / "trace_comparison.svg").string()
                                        : out_path;
    io::write_file(path, svg::line_chart({exp, measured}, "cluster power: measured vs expected"));
    std::cout << "wrote " << path << "\n";
    return kExitOk;
}

int cmd_oracle(const std::string& kind, double p, int64_t m, int64_t n, double q,
               const std::string& out_path) {
    Json out;
    if (kind == "rational_forward") {
        // Reference outputs for the fixture net used by the engine tests.
        Seed32 seed = seed_from_u64(7);
        detnet::Weights w = detnet::init_weights({2, 2, 1}, seed);
        WorkloadDeclaration d;
        d.workload_id = "oracle";
        d.kind = WorkloadKind::training;
        d.architecture = {2, 2, 1};
        d.master_seed = seed;
        d.segment_count = 1;
        d.batches_per_segment = 1;
        d.batch_size = 4;
        detnet::Batch batch = detnet::make_batch(d, 0);
        oracles::RationalForwardResult r = oracles::rational_forward(w, batch);
        out = Json{{"loss_raw", r.loss_raw}, {"output_raw", r.output_raw}};
    } else if (kind == "finite_diff") {
        Seed32 seed = seed_from_u64(11);
        detnet::Weights w = detnet::init_weights({3, 4, 2}, seed);
        WorkloadDeclaration d;
        d.workload_id = "oracle";
        d.kind = WorkloadKind::training;
        d.architecture = {3, 4, 2};
        d.master_seed = seed;
        d.segment_count = 1;
        d.batches_per_segment = 1;
        d.batch_size = 4;
        detnet::Batch batch = detnet::make_batch(d, 0);
        auto net = detnet::shadow::from_fixed(w);
        auto sb = detnet::shadow::from_fixed(batch);
        auto fd = oracles::finite_difference_gradient(net, sb);
        Json grads = Json::array();
        for (const auto& layer : fd.w) {
            std::vector<int64_t> micro(layer.size());
            for (size_t i = 0; i < layer.size(); ++i) micro[i] = static_cast<int64_t>(layer[i] * 1e6);
            grads.push_back(micro);
        }
        out = Json{{"w_grad_micro", grads}};
    } else if (kind == "binomial_bounds") {
        auto b = oracles::binomial_bounds(static_cast<double>(n), q);
        out = Json{{"hi3_micro", static_cast<int64_t>(b.hi3 * 1e6)},
                   {"hi4_micro", static_cast<int64_t>(b.hi4 * 1e6)},
                   {"lo3_micro", static_cast<int64_t>(b.lo3 * 1e6)},
                   {"lo4_micro", static_cast<int64_t>(b.lo4 * 1e6)},
                   {"mean_micro", static_cast<int64_t>(b.mean * 1e6)},
                   {"sigma_micro", static_cast<int64_t>(b.sigma * 1e6)}};
    } else if (kind == "detection_formula") {
        double rate = oracles::covert_detection_probability(p, m);
        out = Json{{"detection_probability_ppb", static_cast<int64_t>(rate * 1e9)},
                   {"m", m},
                   {"p_ppm", static_cast<int64_t>(p * 1e6)}};
    } else if (kind == "wrap_exhaustive") {
        auto r = oracles::wrap_exhaustive();
        out = Json{{"saturate_mismatches", r.saturate_mismatches},
                   {"triples_checked", r.triples_checked},
                   {"wrap_mismatches", r.wrap_mismatches}};
    } else {
        std::cerr << "unknown oracle kind: " << kind << "\n";
        return kExitBadConfig;
    }
    std::string text = canonical_dump(out);
    if (!out_path.empty()) {
        io::write_file(out_path, text);
    }
    std::cout << text << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic Prover/Verifier simulator for large-scale compute verification"};
    app.require_subcommand(1);

    std::string scenario_path, run_dir, out = "out", format = "json", sweep, oracle_kind;
    std::optional<uint64_t> seed;
    std::optional<double> noise_sigma;
    uint64_t verifier_seed = 1;
    int64_t trials = 100, oracle_m = 10, oracle_n = 10000;
    int jobs = 1;
    double oracle_p = 0.5, oracle_q = 0.1;
    std::vector<std::string> toggle_flags;

    CLI::App* sim = app.add_subcommand("simulate", "run a Prover scenario and serialize its evidence");
    sim->add_option("--scenario", scenario_path, "scenario file (.scenario.json)")->required();
    sim->add_option("--seed", seed, "override the scenario seed");
    sim->add_option("--noise-sigma", noise_sigma, "sensor noise relative std dev");
    sim->add_option("--out", out, "output run directory");

    CLI::App* ver = app.add_subcommand("verify", "run every Verifier mechanism against a run directory");
    ver->add_option("run_dir", run_dir, "run directory from simulate")->required();
    ver->add_option("--seed", verifier_seed, "verifier sampling seed");
    ver->add_option("--toggle", toggle_flags, "mechanism=on|off (repeatable)");

    CLI::App* atk = app.add_subcommand("attack", "measure detection rates over seeded trials");
    atk->add_option("--scenario", scenario_path, "scenario template file")->required();
    atk->add_option("--seed", seed, "override the template seed");
    atk->add_option("--trials", trials, "trials per point");
    atk->add_option("--jobs", jobs, "worker threads");
    atk->add_option("--sweep", sweep, "comma-separated magnitude_ppm values");
    atk->add_option("--format", format, "json|svg")->check(CLI::IsMember({"json", "svg"}));
    atk->add_option("--toggle", toggle_flags, "mechanism=on|off (repeatable)");
    atk->add_option("--out", out, "output directory");

    CLI::App* rep = app.add_subcommand("report", "render a verification report or trace comparison");
    rep->add_option("run_dir", run_dir, "run directory")->required();
    rep->add_option("--format", format, "json|svg")->check(CLI::IsMember({"json", "svg"}));
    rep->add_option("--out", out, "output file for svg");

    CLI::App* orc = app.add_subcommand("oracle", "emit reference values used by the test suite");
    orc->add_option("kind", oracle_kind,
                    "rational_forward|finite_diff|binomial_bounds|detection_formula|wrap_exhaustive")
        ->required();
    orc->add_option("--p", oracle_p, "sampling probability");
    orc->add_option("--m", oracle_m, "covert message count");
    orc->add_option("--n", oracle_n, "population size");
    orc->add_option("--q", oracle_q, "sampling fraction");
    orc->add_option("--out", out, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitBadConfig;
    }

    try {
        scenario::MechanismToggles toggles = parse_toggles(toggle_flags);
        if (sim->parsed()) return cmd_simulate(scenario_path, seed, noise_sigma, resolve_out(out));
        if (ver->parsed()) return cmd_verify(run_dir, verifier_seed, toggles);
        if (atk->parsed()) {
            return cmd_attack(scenario_path, seed, trials, jobs, sweep, format, toggles, resolve_out(out));
        }
        if (rep->parsed()) return cmd_report(run_dir, format, rep->count("--out") ? out : "");
        if (orc->parsed()) return cmd_oracle(oracle_kind, oracle_p, oracle_m, oracle_n, oracle_q,
                                             orc->count("--out") ? resolve_out(out) : "");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadConfig;
    }
    return kExitBadConfig;
}
