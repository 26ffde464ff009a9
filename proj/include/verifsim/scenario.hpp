#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "verifsim/accounting.hpp"
#include "verifsim/attest.hpp"
#include "verifsim/core.hpp"
#include "verifsim/datacheck.hpp"
#include "verifsim/detnet.hpp"
#include "verifsim/nettap.hpp"
#include "verifsim/reexec.hpp"

namespace verifsim::scenario {

// ---------------------------------------------------------------------------
// Scenario definitions
// ---------------------------------------------------------------------------

enum class Behavior {
    honest,
    glue,
    precomputed_weights,
    duplicate_inflation,
    undeclared_extra_workload,
    covert_traffic,
    deleted_certificate,
    hidden_chips,
    hidden_memory,
};

inline std::string to_string(Behavior b) {
    switch (b) {
        case Behavior::honest: return "honest";
        case Behavior::glue: return "glue";
        case Behavior::precomputed_weights: return "precomputed_weights";
        case Behavior::duplicate_inflation: return "duplicate_inflation";
        case Behavior::undeclared_extra_workload: return "undeclared_extra_workload";
        case Behavior::covert_traffic: return "covert_traffic";
        case Behavior::deleted_certificate: return "deleted_certificate";
        case Behavior::hidden_chips: return "hidden_chips";
        case Behavior::hidden_memory: return "hidden_memory";
    }
    throw std::logic_error("unknown Behavior");
}

inline Behavior behavior_from_string(const std::string& s) {
    for (Behavior b : {Behavior::honest, Behavior::glue, Behavior::precomputed_weights,
                       Behavior::duplicate_inflation, Behavior::undeclared_extra_workload,
                       Behavior::covert_traffic, Behavior::deleted_certificate, Behavior::hidden_chips,
                       Behavior::hidden_memory}) {
        if (to_string(b) == s) return b;
    }
    throw std::invalid_argument("unknown prover behavior: " + s);
}

struct Scenario {
    std::string name = "unnamed";
    Behavior behavior = Behavior::honest;
    uint64_t seed = 0;
    // Magnitudes; which ones apply depends on the behavior.
    int64_t magnitude_ppm = 200000;       // undeclared workload / hidden memory fraction
    int64_t covert_message_count = 10;    // covert_traffic
    int64_t duplicate_count = 10;         // duplicate_inflation
    // Environment knobs.
    int64_t noise_sigma_ppm = 10000;      // sensor noise, 1%
    int64_t tap_rate_ppm = 500000;        // tap sampling probability
    int64_t fill_ppm = 900000;            // memory fill fraction

    void validate() const {
        switch (behavior) {
            case Behavior::undeclared_extra_workload:
            case Behavior::hidden_memory:
                if (magnitude_ppm <= 0 || magnitude_ppm > 1000000) {
                    throw std::invalid_argument("Scenario: magnitude_ppm out of (0, 1e6]");
                }
                break;
            case Behavior::covert_traffic:
                if (covert_message_count < 1) throw std::invalid_argument("Scenario: need >= 1 covert message");
                break;
            case Behavior::duplicate_inflation:
                if (duplicate_count < 2) throw std::invalid_argument("Scenario: need >= 2 duplicates");
                break;
            default:
                break;
        }
        if (noise_sigma_ppm < 0) throw std::invalid_argument("Scenario: negative noise sigma");
        if (tap_rate_ppm <= 0 || tap_rate_ppm > 1000000) throw std::invalid_argument("Scenario: tap rate out of (0,1e6]");
    }

    Seed32 world_seed() const { return derive_seed(seed_from_u64(seed), "world"); }
};

inline void to_json(Json& j, const Scenario& s) {
    j = Json{{"behavior", to_string(s.behavior)},
             {"covert_message_count", s.covert_message_count},
             {"duplicate_count", s.duplicate_count},
             {"fill_ppm", s.fill_ppm},
             {"magnitude_ppm", s.magnitude_ppm},
             {"name", s.name},
             {"noise_sigma_ppm", s.noise_sigma_ppm},
             {"seed", s.seed},
             {"tap_rate_ppm", s.tap_rate_ppm}};
}
inline void from_json(const Json& j, Scenario& s) {
    s.behavior = behavior_from_string(j.at("behavior").get<std::string>());
    j.at("covert_message_count").get_to(s.covert_message_count);
    j.at("duplicate_count").get_to(s.duplicate_count);
    j.at("fill_ppm").get_to(s.fill_ppm);
    j.at("magnitude_ppm").get_to(s.magnitude_ppm);
    j.at("name").get_to(s.name);
    j.at("noise_sigma_ppm").get_to(s.noise_sigma_ppm);
    j.at("seed").get_to(s.seed);
    j.at("tap_rate_ppm").get_to(s.tap_rate_ppm);
    s.validate();
}

// Per-mechanism on/off switches for layer-robustness studies.
struct MechanismToggles {
    std::map<std::string, bool> overrides;

    bool enabled(const std::string& mechanism) const {
        auto it = overrides.find(mechanism);
        return it == overrides.end() ? true : it->second;
    }
};

inline const std::vector<std::string>& known_mechanisms() {
    static const std::vector<std::string> k = {
        "faithfulness",     "init_order",          "glue",        "duplicates",
        "optimizer_structure", "token_frequency",  "tap",         "inference_replay",
        "sample_completeness", "classification",   "properties",  "reconcile_ops",
        "reconcile_hours",  "signature",           "counters",    "certificates",
        "accounting_link",  "memory_fill",         "registry",    "license_audit",
    };
    return k;
}

// ---------------------------------------------------------------------------
// The simulated world
// ---------------------------------------------------------------------------

// Protocol constants shared by Prover and Verifier.
constexpr int64_t kIdleSeparatorTicks = 5;
constexpr uint32_t kFaithfulnessSampleSize = 3;
// Measured separation on the restricted-task benchmark: models trained on
// their own declared task score around -1.4 or below, models trained to
// convergence on the benchmark itself score around -0.45.
constexpr double kCapabilityThreshold = -1.0;
constexpr double kAccountingLinkTolerance = 0.05;
constexpr double kDuplicateRateThreshold = 0.05;
constexpr double kSilentChipThreshold = 0.20;
constexpr int64_t kNonAiTicks = 60;
constexpr int64_t kNonAiUtilizationPpm = 500000;
constexpr int64_t kSampleStoreQppm = 250000;

inline Hash32 approved_firmware_hash() { return commit(std::string("verifsim.firmware.v1")); }

// Everything the Prover hands over (or the Verifier's own devices captured)
// for one run. This is exactly what the run directory serializes.
struct RunArtifacts {
    Scenario scenario;
    ClusterSpec cluster;

    WorkloadDeclaration train_decl;
    detnet::TrainingTranscript transcript;

    WorkloadDeclaration inference_decl;
    Hash32 inference_result_commitment{};

    WorkloadDeclaration nonai_decl;
    bool nonai_classified_non_ai = false;

    // All declarations submitted for accounting (duplicates show up here).
    std::vector<WorkloadDeclaration> declaration_set;

    accounting::SensorTrace sensor_trace;  // the Verifier's own measurement

    std::vector<attest::WorkloadCertificate> certificates;
    std::map<std::string, uint64_t> attested_final_counters;
    std::vector<attest::LicenseGrant> licenses;

    nettap::TapLog tap_log;
    nettap::FillTranscript fill;

    int64_t sample_total = 0;
    int64_t sample_q_ppm = kSampleStoreQppm;
    int64_t sample_stored = 0;

    std::vector<std::string> event_log;
};

namespace detail {

inline WorkloadDeclaration make_training_declaration(const Seed32& world_seed) {
    WorkloadDeclaration d;
    d.workload_id = "w-train";
    d.kind = WorkloadKind::training;
    d.architecture = {8, 16, 8, 4};
    d.optimizer_family = OptimizerFamily::sgd;
    d.optimizer_params.learning_rate = FixedPoint::from_raw(256);  // 1/256
    d.master_seed = derive_seed(world_seed, "train");
    d.segment_count = 10;
    d.batches_per_segment = 2;
    d.batch_size = 8;
    d.node_count = 2;
    d.mfu_ppm = 400000;
    d.data_commitment = detnet::dataset_commitment(detnet::make_batches(d));
    d.claimed_model_ops = static_cast<uint64_t>(detnet::declared_model_ops(d));
    return d;
}

inline WorkloadDeclaration make_inference_declaration(const Seed32& world_seed) {
    WorkloadDeclaration d;
    d.workload_id = "w-infer";
    d.kind = WorkloadKind::inference;
    d.architecture = {8, 16, 4};
    d.master_seed = derive_seed(world_seed, "infer");
    d.segment_count = 1;
    d.batches_per_segment = 4;
    d.batch_size = 8;
    d.node_count = 1;
    d.mfu_ppm = 400000;
    d.temperature_ppm = 0;
    d.data_commitment = detnet::dataset_commitment(detnet::make_batches(d));
    d.claimed_model_ops = static_cast<uint64_t>(detnet::declared_model_ops(d));
    return d;
}

inline WorkloadDeclaration make_nonai_declaration(const Seed32& world_seed) {
    WorkloadDeclaration d;
    d.workload_id = "w-nonai";
    d.kind = WorkloadKind::non_ai;
    d.master_seed = derive_seed(world_seed, "nonai");
    d.segment_count = 1;
    d.mfu_ppm = kNonAiUtilizationPpm;
    d.data_commitment = commit(std::string("nonai-input-data"));
    return d;
}

inline ClusterSpec make_cluster() {
    ClusterSpec c;
    c.cluster_id = "cluster-a";
    c.chip_count = 4;
    c.peak_ops_per_hour = 1036800;  // 288 ops/s per chip: desk-scale hardware
    c.p_idle_milliwatts = 100000;
    c.p_max_milliwatts = 700000;
    c.chip_ids = {"chip-00", "chip-01", "chip-02", "chip-03"};
    c.memory_bytes = 1 << 20;
    c.validate();
    return c;
}

// Append a trace, renumbering ticks to follow the tail of `combined`.
// Returns the number of active (ops > 0) ticks appended.
inline int64_t append_trace(detnet::ExecutionTrace& combined, const detnet::ExecutionTrace& part,
                            int64_t& next_tick) {
    int64_t active = 0;
    for (detnet::TickRecord rec : part.ticks) {
        rec.tick = next_tick++;
        if (rec.hardware_ops > 0) ++active;
        combined.ticks.push_back(rec);
    }
    return active;
}

inline void append_idle(detnet::ExecutionTrace& combined, int64_t n, int64_t& next_tick) {
    for (int64_t i = 0; i < n; ++i) {
        detnet::TickRecord rec;
        rec.tick = next_tick++;
        combined.ticks.push_back(rec);
    }
}

inline detnet::ExecutionTrace make_nonai_trace(const ClusterSpec& cluster) {
    detnet::ExecutionTrace t;
    detnet::TickScheduler sched{&cluster};
    int64_t per_tick = floor_div64(sched.peak_ops_per_tick() * kNonAiUtilizationPpm, 1000000);
    sched.emit(t, per_tick * kNonAiTicks, kNonAiUtilizationPpm, 0);
    return t;
}

inline int64_t active_ticks_of(const detnet::ExecutionTrace& t) {
    int64_t n = 0;
    for (const auto& rec : t.ticks) {
        if (rec.hardware_ops > 0) ++n;
    }
    return n;
}

inline int64_t chip_hours_milli(int64_t active_ticks, const ClusterSpec& cluster) {
    return floor_div64(active_ticks * cluster.chip_count * 1000, 3600);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Prover simulation (honest run plus attack mutations)
// ---------------------------------------------------------------------------

inline RunArtifacts simulate_prover(const Scenario& scenario) {
    scenario.validate();
    Seed32 world = scenario.world_seed();

    RunArtifacts art;
    art.scenario = scenario;
    art.cluster = detail::make_cluster();
    art.train_decl = detail::make_training_declaration(world);
    art.inference_decl = detail::make_inference_declaration(world);
    art.nonai_decl = detail::make_nonai_declaration(world);
    art.nonai_classified_non_ai = true;

    // --- Training workload ---
    detnet::TrainingRun training = detnet::run_training(art.train_decl, art.cluster);
    art.transcript = training.transcript;

    // --- Inference workload (a separately deployed model) ---
    std::vector<detnet::Batch> inference_batches = detnet::make_batches(art.inference_decl);
    detnet::Weights inference_model =
        detnet::init_weights(art.inference_decl.architecture, derive_seed(world, "deployed-model"));
    detnet::InferenceRun inference =
        detnet::run_inference(art.inference_decl, inference_batches, inference_model, art.cluster);
    art.inference_result_commitment = inference.outputs_commitment;

    // --- Non-AI workload (routing option: classified, not re-executed) ---
    detnet::ExecutionTrace nonai_trace = detail::make_nonai_trace(art.cluster);
    {
        int64_t per_tick =
            floor_div64(detnet::TickScheduler{&art.cluster}.peak_ops_per_tick() * kNonAiUtilizationPpm, 1000000);
        art.nonai_decl.claimed_model_ops = static_cast<uint64_t>(per_tick * kNonAiTicks);
    }

    // --- Combined cluster timeline ---
    detnet::ExecutionTrace combined;
    int64_t next_tick = 0;
    int64_t train_active = detail::append_trace(combined, training.trace, next_tick);
    detail::append_idle(combined, kIdleSeparatorTicks, next_tick);
    int64_t infer_active = detail::append_trace(combined, inference.trace, next_tick);
    detail::append_idle(combined, kIdleSeparatorTicks, next_tick);
    int64_t nonai_active = detail::append_trace(combined, nonai_trace, next_tick);

    art.train_decl.claimed_chip_hours_milli = detail::chip_hours_milli(train_active, art.cluster);
    art.inference_decl.claimed_chip_hours_milli = detail::chip_hours_milli(infer_active, art.cluster);
    art.nonai_decl.claimed_chip_hours_milli = detail::chip_hours_milli(nonai_active, art.cluster);
    // The transcript carries the final declaration including claimed hours.
    art.transcript.declaration = art.train_decl;

    // --- Attack: undeclared extra workload appended to the timeline ---
    if (scenario.behavior == Behavior::undeclared_extra_workload) {
        int64_t declared_active = train_active + infer_active + nonai_active;
        int64_t extra_ticks = floor_div64(declared_active * scenario.magnitude_ppm, 1000000);
        detnet::TickScheduler sched{&art.cluster};
        sched.next_tick = next_tick;
        int64_t per_tick = floor_div64(sched.peak_ops_per_tick() * 400000, 1000000);
        detail::append_idle(combined, kIdleSeparatorTicks, next_tick);
        sched.next_tick = next_tick;
        detnet::ExecutionTrace extra;
        sched.emit(extra, per_tick * extra_ticks, 400000, 0);
        detail::append_trace(combined, extra, next_tick);
        art.event_log.push_back("prover ran undeclared extra workload: " + std::to_string(extra_ticks) +
                                " ticks");
    }

    // --- Sensor trace (the Verifier's own analog measurement) ---
    accounting::EfficiencyModel eff = accounting::EfficiencyModel::from_cluster(
        art.cluster, 1, static_cast<double>(scenario.noise_sigma_ppm) / 1e6);
    art.sensor_trace = accounting::simulate_power_trace(combined, art.cluster, eff, derive_seed(world, "sensor"));

    // --- Declaration set for accounting ---
    art.declaration_set = {art.train_decl, art.inference_decl, art.nonai_decl};
    if (scenario.behavior == Behavior::duplicate_inflation) {
        for (int64_t i = 1; i < scenario.duplicate_count; ++i) {
            WorkloadDeclaration dup = art.train_decl;
            dup.workload_id = "w-train-copy-" + std::to_string(i);
            art.declaration_set.push_back(dup);
        }
        art.event_log.push_back("prover declared the same workload " +
                                std::to_string(scenario.duplicate_count) + " times");
    }

    // --- Glue attack: splice checkpoints of an unrelated run ---
    if (scenario.behavior == Behavior::glue) {
        WorkloadDeclaration foreign = art.train_decl;
        foreign.master_seed = derive_seed(world, "train-foreign");
        foreign.data_commitment = detnet::dataset_commitment(detnet::make_batches(foreign));
        detnet::TrainingRun foreign_run = detnet::run_training(foreign, art.cluster);
        uint32_t seam = art.train_decl.segment_count / 2;
        for (uint32_t i = seam + 1; i <= art.train_decl.segment_count; ++i) {
            art.transcript.checkpoints[i] = foreign_run.transcript.checkpoints[i];
        }
        art.event_log.push_back("prover glued a foreign run at segment " + std::to_string(seam));
    }

    // --- Precomputed-weights attack: updates are loads, not gradient steps ---
    if (scenario.behavior == Behavior::precomputed_weights) {
        for (uint32_t i = 1; i <= art.train_decl.segment_count; ++i) {
            detnet::Weights fake = detnet::init_weights(art.train_decl.architecture,
                                                        derive_seed(world, "precomp", i));
            art.transcript.checkpoints[i] = detnet::make_checkpoint(
                i, std::move(fake), art.transcript.checkpoints[i].rng_cursor);
        }
        art.event_log.push_back("prover overwrote checkpoints with data-encoded weights");
    }

    // --- Certificates (signed by secure-boot chips, round robin) ---
    Hash32 fw = approved_firmware_hash();
    std::vector<Hash32> approved = {fw};
    attest::KeyPair authority = attest::license_authority_keypair();
    int64_t horizon = next_tick + 1000;

    std::vector<attest::ChipState> chips;
    for (const std::string& chip_id : art.cluster.chip_ids) {
        attest::BootResult boot = attest::boot_chip(chip_id, fw, approved);
        attest::LicenseGrant grant =
            attest::make_license(authority.sk, chip_id, horizon, "g-" + chip_id);
        art.licenses.push_back(grant);
        attest::ChipState chip =
            attest::license_cycle(*boot.chip, grant, 0, authority.pk, &art.event_log);
        chips.push_back(std::move(chip));
    }

    Hash32 train_commit = commit_value(art.train_decl);
    Hash32 train_result = art.transcript.checkpoints.back().weights_commitment;
    size_t rr = 0;
    auto issue = [&](const Hash32& decl_commit, const Hash32& result_commit, int64_t hours_milli) {
        attest::ChipState& chip = chips[rr++ % chips.size()];
        std::string refusal;
        auto cert = attest::issue_certificate(chip, decl_commit, result_commit, hours_milli, &refusal);
        if (cert) {
            art.certificates.push_back(*cert);
        } else {
            art.event_log.push_back("certificate refused on " + chip.chip_id + ": " + refusal);
        }
    };

    // Per-segment training certificates; hours split evenly with the remainder
    // on the last certificate.
    {
        int64_t total = art.train_decl.claimed_chip_hours_milli;
        int64_t n = art.train_decl.segment_count;
        int64_t share = floor_div64(total, n);
        for (uint32_t seg = 0; seg < art.train_decl.segment_count; ++seg) {
            int64_t hours = (seg + 1 == art.train_decl.segment_count) ? total - share * (n - 1) : share;
            issue(train_commit, art.transcript.checkpoints[seg + 1].weights_commitment, hours);
        }
    }
    issue(commit_value(art.inference_decl), art.inference_result_commitment,
          art.inference_decl.claimed_chip_hours_milli);
    issue(commit_value(art.nonai_decl), commit(std::string("nonai-result")),
          art.nonai_decl.claimed_chip_hours_milli);

    // --- Hidden chips: an undeclared cluster whose certificates surface ---
    if (scenario.behavior == Behavior::hidden_chips) {
        for (const std::string& ghost_id : {std::string("ghost-00"), std::string("ghost-01")}) {
            attest::BootResult boot = attest::boot_chip(ghost_id, fw, approved, std::nullopt,
                                                        /*initial_license_expiry_tick=*/50);
            attest::ChipState ghost = *boot.chip;
            std::string refusal;
            auto cert = attest::issue_certificate(ghost, commit(std::string("hidden-workload")),
                                                  commit(std::string("hidden-result")), 5000, &refusal);
            if (cert) art.certificates.push_back(*cert);
            art.attested_final_counters[ghost_id] = ghost.monotonic_counter;
            // Past the grace window the unlicensed ghost throttles; later
            // issuance attempts are refused.
            ghost = attest::license_cycle(ghost, std::nullopt, 51, authority.pk, &art.event_log);
            auto refused = attest::issue_certificate(ghost, commit(std::string("hidden-workload-2")),
                                                     commit(std::string("hidden-result-2")), 5000, &refusal);
            if (!refused) {
                art.event_log.push_back("ghost chip " + ghost_id + " issuance refused: " + refusal);
            }
        }
        art.event_log.push_back("prover operated unregistered chips");
    }

    for (const attest::ChipState& chip : chips) {
        art.attested_final_counters[chip.chip_id] = chip.monotonic_counter;
    }

    // --- Deleted certificate: hide one record, counters do not lie ---
    if (scenario.behavior == Behavior::deleted_certificate) {
        size_t victim = static_cast<size_t>(prng_draw(world, "delete-cert", 0) % art.certificates.size());
        art.event_log.push_back("prover deleted certificate with counter " +
                                std::to_string(art.certificates[victim].body.counter_value) + " on " +
                                art.certificates[victim].body.chip_id);
        art.certificates.erase(art.certificates.begin() + static_cast<ptrdiff_t>(victim));
    }

    // --- Network tap over the training traffic ---
    std::vector<nettap::ClusterMessage> stream =
        nettap::emit_training_messages(art.train_decl, training.batches);
    if (scenario.behavior == Behavior::covert_traffic) {
        size_t declared_count = stream.size();
        size_t stride = declared_count / static_cast<size_t>(scenario.covert_message_count) + 1;
        for (int64_t i = 0; i < scenario.covert_message_count; ++i) {
            nettap::ClusterMessage covert;
            covert.tick = 1000 + i;  // outside the declared schedule
            covert.src_node = 0;
            covert.dst_node = 1;
            covert.kind = nettap::MessageKind::other;
            covert.payload_commitment = derive_seed(world, "covert-payload", static_cast<uint64_t>(i));
            covert.payload_bytes = 4096;
            size_t pos = std::min(stream.size(), static_cast<size_t>(i) * stride);
            stream.insert(stream.begin() + static_cast<ptrdiff_t>(pos), covert);
        }
        art.event_log.push_back("prover exchanged " + std::to_string(scenario.covert_message_count) +
                                " covert messages");
    }
    art.tap_log = nettap::tap_sample(stream, scenario.tap_rate_ppm, derive_seed(world, "tap"));

    // --- Memory fill challenge ---
    nettap::ClusterMemoryState memory{art.cluster.memory_bytes, 0};
    if (scenario.behavior == Behavior::hidden_memory) {
        memory.hidden_bytes = floor_div64(art.cluster.memory_bytes * scenario.magnitude_ppm, 1000000);
        art.event_log.push_back("prover hoards undeclared data in " +
                                std::to_string(memory.hidden_bytes) + " bytes of memory");
    }
    art.fill = nettap::prover_fill_echoes(memory, derive_seed(world, "fill"), scenario.fill_ppm);

    // --- Sensitive-data sample store for the inference usage data ---
    {
        std::vector<Bytes> items;
        for (const auto& batch : inference_batches) items.push_back(canonical_encode(batch));
        art.sample_total = static_cast<int64_t>(items.size());
        art.sample_stored =
            static_cast<int64_t>(datacheck::hash_range_sample(items, art.sample_q_ppm).size());
    }

    return art;
}

// ---------------------------------------------------------------------------
// Verifier pipeline
// ---------------------------------------------------------------------------

struct VerifierConfig {
    MechanismToggles toggles;
    uint64_t verifier_seed = 1;
    accounting::AccountingParams params;
    bool fault_injection_mode = false;
};

namespace detail {

inline void add_verdict(std::map<SubgoalId, std::vector<Verdict>>& sink, SubgoalId subgoal,
                        Verdict verdict) {
    sink[subgoal].push_back(std::move(verdict));
}

// Expected cluster timeline from the declarations alone (the Verifier's
// replay); used for the physical-signature check.
inline detnet::ExecutionTrace replay_expected_trace(const RunArtifacts& art) {
    detnet::TrainingRun training = detnet::run_training(art.train_decl, art.cluster);
    std::vector<detnet::Batch> inference_batches = detnet::make_batches(art.inference_decl);
    detnet::Weights inference_model = detnet::init_weights(
        art.inference_decl.architecture, derive_seed(art.scenario.world_seed(), "deployed-model"));
    detnet::InferenceRun inference =
        detnet::run_inference(art.inference_decl, inference_batches, inference_model, art.cluster);
    detnet::ExecutionTrace nonai_trace = make_nonai_trace(art.cluster);

    detnet::ExecutionTrace combined;
    int64_t next_tick = 0;
    append_trace(combined, training.trace, next_tick);
    append_idle(combined, kIdleSeparatorTicks, next_tick);
    append_trace(combined, inference.trace, next_tick);
    append_idle(combined, kIdleSeparatorTicks, next_tick);
    append_trace(combined, nonai_trace, next_tick);
    return combined;
}

}  // namespace detail

inline VerificationReport run_verifier(const RunArtifacts& art, const VerifierConfig& config = {}) {
    const MechanismToggles& on = config.toggles;
    std::map<SubgoalId, std::vector<Verdict>> verdicts;
    Seed32 vseed = derive_seed(seed_from_u64(config.verifier_seed), "verifier");

    std::vector<detnet::Batch> train_batches = detnet::make_batches(art.train_decl);

    // ---- Subgoal 1.A.1: declared training happened as declared ----
    if (on.enabled("faithfulness")) {
        reexec::SegmentSample sample = reexec::select_segments(
            art.train_decl.segment_count, vseed,
            std::min(kFaithfulnessSampleSize, art.train_decl.segment_count));
        reexec::FaithfulnessConfig fc;
        fc.fault_injection_mode = config.fault_injection_mode;
        if (config.fault_injection_mode) {
            fc.verifier_fault.period_ops = 40000000;
            fc.verifier_fault.seed = derive_seed(vseed, "replay-hw");
        }
        detail::add_verdict(verdicts, SubgoalId::S1A1,
                            reexec::verify_faithfulness(art.train_decl, art.transcript, sample,
                                                        train_batches, fc));
    }
    if (on.enabled("init_order")) {
        detail::add_verdict(verdicts, SubgoalId::S1A1,
                            reexec::verify_init_and_order(art.train_decl, art.transcript));
    }
    if (on.enabled("glue")) {
        detail::add_verdict(verdicts, SubgoalId::S1A1, reexec::detect_glue(art.transcript, train_batches));
    }
    if (on.enabled("duplicates")) {
        detail::add_verdict(verdicts, SubgoalId::S1A1,
                            reexec::check_inflated_compute(art.declaration_set, kDuplicateRateThreshold));
    }
    if (on.enabled("optimizer_structure")) {
        std::vector<uint32_t> all_segments(art.train_decl.segment_count);
        for (uint32_t i = 0; i < art.train_decl.segment_count; ++i) all_segments[i] = i;
        detail::add_verdict(verdicts, SubgoalId::S1A1,
                            datacheck::optimizer_structure_check(art.train_decl, art.transcript,
                                                                 train_batches, all_segments));
    }
    if (on.enabled("token_frequency")) {
        std::vector<FixedPoint> values;
        for (const auto& b : train_batches) {
            values.insert(values.end(), b.inputs.begin(), b.inputs.end());
            values.insert(values.end(), b.targets.begin(), b.targets.end());
        }
        datacheck::TokenDistribution data = datacheck::token_histogram(values);
        datacheck::TokenDistribution reference;
        reference.counts.assign(datacheck::kTokenBins, 1000);
        reference.total_count = 1000 * datacheck::kTokenBins;
        double threshold = 395.0;  // chi-square, 255 dof, ~1e-8 upper tail
        detail::add_verdict(verdicts, SubgoalId::S1A1,
                            datacheck::token_frequency_check(data, reference, threshold).verdict);
    }
    if (on.enabled("tap")) {
        Verdict tap_verdict = nettap::analyze_tap_log(art.tap_log, art.train_decl, train_batches);
        detail::add_verdict(verdicts, SubgoalId::S1A1, tap_verdict);
        detail::add_verdict(verdicts, SubgoalId::S2A, tap_verdict);
    }

    // ---- Subgoal 1.A.2: declared inference happened as declared ----
    if (on.enabled("inference_replay")) {
        std::vector<detnet::Batch> inference_batches = detnet::make_batches(art.inference_decl);
        detnet::Weights inference_model = detnet::init_weights(
            art.inference_decl.architecture, derive_seed(art.scenario.world_seed(), "deployed-model"));
        detnet::InferenceRun replay =
            detnet::run_inference(art.inference_decl, inference_batches, inference_model, art.cluster);
        bool match = replay.outputs_commitment == art.inference_result_commitment;
        Evidence ev{"reexec.inference_replay", match ? "bit-identical" : "mismatch",
                    to_hex(art.inference_result_commitment)};
        detail::add_verdict(verdicts, SubgoalId::S1A2, match ? verdict_pass({ev}) : verdict_fail({ev}));
    }
    if (on.enabled("sample_completeness")) {
        detail::add_verdict(verdicts, SubgoalId::S1A2,
                            datacheck::verify_sample_completeness(art.sample_total, art.sample_q_ppm,
                                                                  art.sample_stored));
    }

    // ---- Subgoal 1.A.3: non-AI workload routing (classification option) ----
    if (on.enabled("classification")) {
        bool ok = art.nonai_decl.kind == WorkloadKind::non_ai && art.nonai_classified_non_ai;
        Evidence ev{"datacheck.nonai_classification", ok ? "classified non-AI" : "unclassified",
                    "declared non-AI workload classified as non-AI"};
        detail::add_verdict(verdicts, SubgoalId::S1A3, ok ? verdict_pass({ev}) : verdict_fail({ev}));
    }

    // ---- Subgoal 1.B: required model properties ----
    if (on.enabled("properties")) {
        std::vector<detnet::Batch> benchmark;
        WorkloadDeclaration bench_decl = art.train_decl;
        bench_decl.master_seed = seed_from_u64(0x45564131);  // fixed restricted-task benchmark
        for (uint32_t i = 0; i < 4; ++i) benchmark.push_back(detnet::make_batch(bench_decl, i));
        detail::add_verdict(verdicts, SubgoalId::S1B,
                            reexec::evaluate_properties(art.transcript.checkpoints.back().weights,
                                                        benchmark, kCapabilityThreshold));
    }

    // ---- Subgoal 2.A: accounting over the declared cluster ----
    accounting::EfficiencyModel eff = accounting::EfficiencyModel::from_cluster(
        art.cluster, art.sensor_trace.tick_duration_seconds,
        static_cast<double>(art.scenario.noise_sigma_ppm) / 1e6);

    accounting::OpsEstimate total_ops{};
    if (!art.sensor_trace.samples.empty()) {
        total_ops = accounting::estimate_total_ops(art.sensor_trace, eff, art.sensor_trace.samples.front().tick,
                                                   art.sensor_trace.samples.back().tick);
    }
    if (on.enabled("reconcile_ops")) {
        std::vector<double> accounted;
        for (const auto& d : art.declaration_set) {
            accounted.push_back(accounting::accounted_hw_ops_option_b(
                static_cast<double>(d.claimed_model_ops), config.params.hfu_over_mfu_floor));
        }
        detail::add_verdict(verdicts, SubgoalId::S2A,
                            accounting::reconcile(total_ops, accounted, config.params, "ops"));
    }
    if (on.enabled("reconcile_hours")) {
        double measured_hours = accounting::measured_active_chip_hours(art.sensor_trace, eff, art.cluster);
        accounting::OpsEstimate hours_estimate;
        hours_estimate.ops = measured_hours;
        hours_estimate.error_bound = 2.0 * art.cluster.chip_count / 3600.0;  // tick quantization
        std::vector<double> accounted;
        for (const auto& d : art.declaration_set) {
            accounted.push_back(accounting::accounted_chip_hours_option_a(
                static_cast<double>(d.claimed_model_ops), static_cast<double>(art.cluster.peak_ops_per_hour),
                static_cast<double>(d.mfu_ppm) / 1e6));
        }
        detail::add_verdict(verdicts, SubgoalId::S2A,
                            accounting::reconcile(hours_estimate, accounted, config.params, "chip_hours"));
    }
    if (on.enabled("signature")) {
        detnet::ExecutionTrace expected_engine = detail::replay_expected_trace(art);
        accounting::EfficiencyModel clean = eff;
        clean.noise_sigma = 0;
        accounting::SensorTrace expected =
            accounting::simulate_power_trace(expected_engine, art.cluster, clean, Seed32{});
        if (expected.samples.size() == art.sensor_trace.samples.size()) {
            detail::add_verdict(verdicts, SubgoalId::S2A,
                                accounting::signature_distance_option_c(expected, art.sensor_trace,
                                                                        eff.noise_sigma)
                                    .verdict);
        } else {
            detail::add_verdict(
                verdicts, SubgoalId::S2A,
                verdict_inconclusive({{"accounting.signature_distance",
                                       "trace length " + std::to_string(art.sensor_trace.samples.size()),
                                       "expected " + std::to_string(expected.samples.size())}}));
        }
    }
    if (on.enabled("counters")) {
        std::map<std::string, std::vector<attest::WorkloadCertificate>> by_chip;
        for (const auto& c : art.certificates) by_chip[c.body.chip_id].push_back(c);
        for (const auto& [chip_id, final_counter] : art.attested_final_counters) {
            Verdict v = attest::check_counter_continuity(by_chip[chip_id], final_counter);
            detail::add_verdict(verdicts, SubgoalId::S2A, std::move(v));
        }
    }
    if (on.enabled("certificates")) {
        std::vector<Evidence> problems;
        for (const auto& cert : art.certificates) {
            Verdict v = attest::verify_certificate(cert, attest::chip_public_key(cert.body.chip_id));
            if (v.status == VerdictStatus::fail && problems.size() < 16) {
                problems.push_back({"attest.bad_certificate.counter_" +
                                        std::to_string(cert.body.counter_value),
                                    cert.body.chip_id, "valid signature"});
            }
        }
        detail::add_verdict(verdicts, SubgoalId::S2A,
                            problems.empty()
                                ? verdict_pass({{"attest.certificate_signatures",
                                                 fmt_value(static_cast<int64_t>(art.certificates.size())),
                                                 "all signatures valid"}})
                                : verdict_fail(std::move(problems)));
    }
    if (on.enabled("accounting_link")) {
        double measured_hours = accounting::measured_active_chip_hours(art.sensor_trace, eff, art.cluster);
        detail::add_verdict(verdicts, SubgoalId::S2A,
                            attest::compute_accounting_link(art.certificates, measured_hours,
                                                            kAccountingLinkTolerance));
    }
    if (on.enabled("memory_fill")) {
        detail::add_verdict(verdicts, SubgoalId::S2A,
                            nettap::verify_fill_transcript(art.cluster.memory_bytes, art.fill));
    }

    // ---- Subgoal 2.B.1: no hidden clusters in the declared estate ----
    if (on.enabled("registry")) {
        std::vector<std::string> observed;
        for (const auto& c : art.certificates) observed.push_back(c.body.chip_id);
        detail::add_verdict(verdicts, SubgoalId::S2B1,
                            attest::registry_reconcile(art.cluster.chip_ids, observed, kSilentChipThreshold));
    }

    // ---- Subgoal 2.B.2: no hidden standalone clusters (offline licensing) ----
    if (on.enabled("license_audit")) {
        std::set<std::string> licensed;
        attest::KeyPair authority = attest::license_authority_keypair();
        for (const auto& grant : art.licenses) {
            if (attest::verify_detached(grant.signature, canonical_encode(grant.body), authority.pk)) {
                licensed.insert(grant.body.chip_id);
            }
        }
        std::vector<Evidence> problems;
        std::set<std::string> seen;
        for (const auto& c : art.certificates) {
            if (!seen.insert(c.body.chip_id).second) continue;
            if (!licensed.count(c.body.chip_id) && problems.size() < 16) {
                problems.push_back({"attest.unlicensed_chip", c.body.chip_id, "valid license grant"});
            }
        }
        detail::add_verdict(verdicts, SubgoalId::S2B2,
                            problems.empty()
                                ? verdict_pass({{"attest.license_audit",
                                                 fmt_value(static_cast<int64_t>(licensed.size())),
                                                 "every certificate-issuing chip holds a license"}})
                                : verdict_fail(std::move(problems)));
    }

    return aggregate_report(std::move(verdicts));
}

// ---------------------------------------------------------------------------
// Scenario runner and detection-rate harness
// ---------------------------------------------------------------------------

struct ScenarioRun {
    RunArtifacts artifacts;
    VerificationReport report;
};

inline ScenarioRun run_scenario(const Scenario& scenario, const VerifierConfig& config = {}) {
    ScenarioRun run;
    run.artifacts = simulate_prover(scenario);
    run.report = run_verifier(run.artifacts, config);
    return run;
}

struct DetectionSummary {
    std::string scenario_name;
    int64_t trials = 0;
    std::map<std::string, int64_t> per_mechanism;  // mechanism prefix -> fail count
    std::map<SubgoalId, int64_t> per_subgoal;
    int64_t overall_detected = 0;
    double weakest_link_rate = 0;
};

inline void to_json(Json& j, const DetectionSummary& s) {
    Json mech = Json::object();
    for (const auto& [k, v] : s.per_mechanism) mech[k] = v;
    Json sub = Json::object();
    for (const auto& [k, v] : s.per_subgoal) sub[to_string(k)] = v;
    j = Json{{"overall_detected", s.overall_detected},
             {"per_mechanism", mech},
             {"per_subgoal", sub},
             {"scenario_name", s.scenario_name},
             {"trials", s.trials},
             {"weakest_link_rate_ppm", static_cast<int64_t>(s.weakest_link_rate * 1e6)}};
}

// Mechanism attribution: the evidence check names carry a module prefix
// ("reexec.replay_mismatch..."), which is what operators see in summaries.
inline std::string mechanism_of(const Verdict& v) {
    if (v.evidence.empty()) return "unknown";
    const std::string& check = v.evidence.front().check;
    size_t dot = check.find('.');
    size_t second = dot == std::string::npos ? std::string::npos : check.find('.', dot + 1);
    return second == std::string::npos ? check : check.substr(0, second);
}

inline DetectionSummary detection_rate(const Scenario& scenario_template, int64_t trials,
                                       const VerifierConfig& config = {}) {
    if (trials < 1) throw std::invalid_argument("detection_rate: trials must be >= 1");
    DetectionSummary summary;
    summary.scenario_name = scenario_template.name;
    summary.trials = trials;
    for (int64_t t = 0; t < trials; ++t) {
        Scenario s = scenario_template;
        s.seed = load_u64_be(derive_seed(seed_from_u64(scenario_template.seed), "trial", t).data());
        VerifierConfig cfg = config;
        cfg.verifier_seed = s.seed ^ 0x5eedf00dULL;
        ScenarioRun run = run_scenario(s, cfg);
        bool any_fail = false;
        for (const auto& [subgoal, verdict_list] : run.report.subgoals) {
            bool subgoal_fail = false;
            for (const auto& v : verdict_list) {
                if (v.status == VerdictStatus::fail) {
                    subgoal_fail = true;
                    ++summary.per_mechanism[mechanism_of(v)];
                }
            }
            if (subgoal_fail) {
                ++summary.per_subgoal[subgoal];
                any_fail = true;
            }
        }
        if (any_fail) ++summary.overall_detected;
    }
    double weakest = 1.0;
    bool any = false;
    for (const auto& [subgoal, count] : summary.per_subgoal) {
        if (count > 0) {
            any = true;
            double rate = static_cast<double>(count) / trials;
            if (rate < weakest) weakest = rate;
        }
    }
    summary.weakest_link_rate = any ? weakest : 0.0;
    return summary;
}

}  // namespace verifsim::scenario
