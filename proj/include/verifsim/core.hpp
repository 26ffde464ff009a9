#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "verifsim/canonical.hpp"
#include "verifsim/fixed.hpp"
#include "verifsim/prng.hpp"

namespace verifsim {

// ---------------------------------------------------------------------------
// Subgoal taxonomy
// ---------------------------------------------------------------------------

// The seven verification subgoals every mechanism reports into:
//   S1A1 declared training is accurate        S1A2 declared inference is accurate
//   S1A3 declared non-AI use is accurate      S1B  declared artifacts have required properties
//   S2A  no undeclared use of declared clusters
//   S2B1 no hidden clusters inside known data centers
//   S2B2 no hidden standalone clusters
enum class SubgoalId { S1A1, S1A2, S1A3, S1B, S2A, S2B1, S2B2 };

inline const std::vector<SubgoalId>& all_subgoals() {
    static const std::vector<SubgoalId> k = {SubgoalId::S1A1, SubgoalId::S1A2, SubgoalId::S1A3,
                                             SubgoalId::S1B,  SubgoalId::S2A,  SubgoalId::S2B1,
                                             SubgoalId::S2B2};
    return k;
}

inline std::string to_string(SubgoalId id) {
    switch (id) {
        case SubgoalId::S1A1: return "S1A1";
        case SubgoalId::S1A2: return "S1A2";
        case SubgoalId::S1A3: return "S1A3";
        case SubgoalId::S1B: return "S1B";
        case SubgoalId::S2A: return "S2A";
        case SubgoalId::S2B1: return "S2B1";
        case SubgoalId::S2B2: return "S2B2";
    }
    throw std::logic_error("unknown SubgoalId");
}

inline SubgoalId subgoal_from_string(const std::string& s) {
    for (SubgoalId id : all_subgoals()) {
        if (to_string(id) == s) return id;
    }
    throw std::invalid_argument("unknown subgoal: " + s);
}

// ---------------------------------------------------------------------------
// Verdicts and reports
// ---------------------------------------------------------------------------

enum class VerdictStatus { pass, fail, inconclusive };

inline std::string to_string(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::pass: return "pass";
        case VerdictStatus::fail: return "fail";
        case VerdictStatus::inconclusive: return "inconclusive";
    }
    throw std::logic_error("unknown VerdictStatus");
}

inline VerdictStatus verdict_status_from_string(const std::string& s) {
    if (s == "pass") return VerdictStatus::pass;
    if (s == "fail") return VerdictStatus::fail;
    if (s == "inconclusive") return VerdictStatus::inconclusive;
    throw std::invalid_argument("unknown verdict status: " + s);
}

// Deterministic formatting for measured values that go into evidence. Values
// are carried as strings so reports stay canonical (integer-or-string JSON).
inline std::string fmt_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
}
inline std::string fmt_value(int64_t v) { return std::to_string(v); }
inline std::string fmt_value(uint64_t v) { return std::to_string(v); }

struct Evidence {
    std::string check;
    std::string measured;
    std::string threshold;

    friend bool operator==(const Evidence&, const Evidence&) = default;
};

struct Verdict {
    VerdictStatus status = VerdictStatus::inconclusive;
    std::vector<Evidence> evidence;

    void validate() const {
        if ((status == VerdictStatus::pass || status == VerdictStatus::fail) && evidence.empty()) {
            throw std::invalid_argument("pass/fail verdicts require at least one evidence entry");
        }
    }

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline Verdict verdict_pass(std::vector<Evidence> ev) {
    Verdict v{VerdictStatus::pass, std::move(ev)};
    v.validate();
    return v;
}
inline Verdict verdict_fail(std::vector<Evidence> ev) {
    Verdict v{VerdictStatus::fail, std::move(ev)};
    v.validate();
    return v;
}
inline Verdict verdict_inconclusive(std::vector<Evidence> ev = {}) {
    return Verdict{VerdictStatus::inconclusive, std::move(ev)};
}

enum class OverallStatus { compliant, non_compliant, inconclusive };

inline std::string to_string(OverallStatus s) {
    switch (s) {
        case OverallStatus::compliant: return "compliant";
        case OverallStatus::non_compliant: return "non_compliant";
        case OverallStatus::inconclusive: return "inconclusive";
    }
    throw std::logic_error("unknown OverallStatus");
}

inline OverallStatus overall_from_string(const std::string& s) {
    if (s == "compliant") return OverallStatus::compliant;
    if (s == "non_compliant") return OverallStatus::non_compliant;
    if (s == "inconclusive") return OverallStatus::inconclusive;
    throw std::invalid_argument("unknown overall status: " + s);
}

struct VerificationReport {
    std::map<SubgoalId, std::vector<Verdict>> subgoals;
    OverallStatus overall = OverallStatus::inconclusive;
};

// Weakest-link aggregation: one fail anywhere makes the whole report
// non-compliant; compliance additionally requires positive coverage (at least
// one pass) on every subgoal.
inline VerificationReport aggregate_report(std::map<SubgoalId, std::vector<Verdict>> verdicts) {
    VerificationReport report;
    report.subgoals = std::move(verdicts);
    bool any_fail = false;
    bool full_coverage = true;
    for (SubgoalId id : all_subgoals()) {
        auto it = report.subgoals.find(id);
        bool has_pass = false;
        if (it != report.subgoals.end()) {
            for (const Verdict& v : it->second) {
                v.validate();
                if (v.status == VerdictStatus::fail) any_fail = true;
                if (v.status == VerdictStatus::pass) has_pass = true;
            }
        }
        if (!has_pass) full_coverage = false;
    }
    if (any_fail) {
        report.overall = OverallStatus::non_compliant;
    } else if (full_coverage) {
        report.overall = OverallStatus::compliant;
    } else {
        report.overall = OverallStatus::inconclusive;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Cluster and workload declarations
// ---------------------------------------------------------------------------

struct ClusterSpec {
    std::string cluster_id;
    uint32_t chip_count = 0;
    int64_t peak_ops_per_hour = 0;  // per chip
    int64_t p_idle_milliwatts = 0;  // per chip
    int64_t p_max_milliwatts = 0;   // per chip
    std::vector<std::string> chip_ids;
    int64_t memory_bytes = 0;  // cluster memory visible to the fill challenge

    void validate() const {
        if (chip_count < 1) throw std::invalid_argument("ClusterSpec: chip_count must be >= 1");
        if (p_idle_milliwatts < 0 || p_max_milliwatts < 0 || p_idle_milliwatts > p_max_milliwatts) {
            throw std::invalid_argument("ClusterSpec: need 0 <= p_idle <= p_max");
        }
        if (chip_ids.size() != chip_count) {
            throw std::invalid_argument("ClusterSpec: chip_ids length must equal chip_count");
        }
        std::set<std::string> uniq(chip_ids.begin(), chip_ids.end());
        if (uniq.size() != chip_ids.size()) throw std::invalid_argument("ClusterSpec: duplicate chip_ids");
        if (peak_ops_per_hour <= 0) throw std::invalid_argument("ClusterSpec: peak_ops_per_hour must be positive");
        if (memory_bytes < 0) throw std::invalid_argument("ClusterSpec: negative memory");
    }

    double p_idle_watts() const { return static_cast<double>(p_idle_milliwatts) / 1000.0; }
    double p_max_watts() const { return static_cast<double>(p_max_milliwatts) / 1000.0; }

    friend bool operator==(const ClusterSpec&, const ClusterSpec&) = default;
};

enum class WorkloadKind { training, inference, non_ai };

inline std::string to_string(WorkloadKind k) {
    switch (k) {
        case WorkloadKind::training: return "training";
        case WorkloadKind::inference: return "inference";
        case WorkloadKind::non_ai: return "non_ai";
    }
    throw std::logic_error("unknown WorkloadKind");
}

inline WorkloadKind workload_kind_from_string(const std::string& s) {
    if (s == "training") return WorkloadKind::training;
    if (s == "inference") return WorkloadKind::inference;
    if (s == "non_ai") return WorkloadKind::non_ai;
    throw std::invalid_argument("unknown workload kind: " + s);
}

enum class OptimizerFamily { sgd, momentum, adam_like };

inline std::string to_string(OptimizerFamily f) {
    switch (f) {
        case OptimizerFamily::sgd: return "sgd";
        case OptimizerFamily::momentum: return "momentum";
        case OptimizerFamily::adam_like: return "adam_like";
    }
    throw std::logic_error("unknown OptimizerFamily");
}

inline OptimizerFamily optimizer_family_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerFamily::sgd;
    if (s == "momentum") return OptimizerFamily::momentum;
    if (s == "adam_like") return OptimizerFamily::adam_like;
    throw std::invalid_argument("unknown optimizer family: " + s);
}

struct OptimizerParams {
    FixedPoint learning_rate = FixedPoint::from_raw(1024);  // 1/64
    FixedPoint momentum = FixedPoint::from_raw(58982);      // ~0.9
    FixedPoint beta1 = FixedPoint::from_raw(58982);         // ~0.9
    FixedPoint beta2 = FixedPoint::from_raw(64881);         // ~0.99
    FixedPoint epsilon = FixedPoint::from_raw(655);         // ~0.01

    friend bool operator==(const OptimizerParams&, const OptimizerParams&) = default;
};

struct WorkloadDeclaration {
    std::string workload_id;
    WorkloadKind kind = WorkloadKind::training;
    std::vector<int32_t> architecture;  // layer sizes, empty for non_ai
    OptimizerFamily optimizer_family = OptimizerFamily::sgd;
    OptimizerParams optimizer_params;
    Seed32 master_seed{};
    Hash32 data_commitment{};
    uint32_t segment_count = 1;
    uint32_t batches_per_segment = 1;
    uint32_t batch_size = 1;
    uint32_t node_count = 1;
    uint64_t claimed_model_ops = 0;
    int64_t claimed_chip_hours_milli = 0;
    int64_t mfu_ppm = 400000;        // claimed model FLOP utilization, parts per million
    int64_t temperature_ppm = 0;     // inference sampling temperature

    void validate() const {
        if (segment_count < 1) throw std::invalid_argument("WorkloadDeclaration: segment_count must be >= 1");
        if (mfu_ppm <= 0 || mfu_ppm > 1000000) {
            throw std::invalid_argument("WorkloadDeclaration: mfu_ppm must be in (0, 1e6]");
        }
        if (claimed_chip_hours_milli < 0) throw std::invalid_argument("WorkloadDeclaration: negative chip hours");
        if (kind == WorkloadKind::non_ai) {
            if (!architecture.empty()) {
                throw std::invalid_argument("WorkloadDeclaration: non_ai workloads carry no architecture");
            }
        } else {
            if (architecture.size() < 2) {
                throw std::invalid_argument("WorkloadDeclaration: architecture needs at least input and output layer");
            }
            for (int32_t dim : architecture) {
                if (dim < 1) throw std::invalid_argument("WorkloadDeclaration: layer sizes must be positive");
            }
            if (batches_per_segment < 1 || batch_size < 1 || node_count < 1) {
                throw std::invalid_argument("WorkloadDeclaration: batch/node shape must be positive");
            }
        }
    }

    uint32_t batch_count() const { return segment_count * batches_per_segment; }

    friend bool operator==(const WorkloadDeclaration&, const WorkloadDeclaration&) = default;
};

// ---------------------------------------------------------------------------
// Scale arithmetic
// ---------------------------------------------------------------------------

// How many reference chips a cluster of `count` chips at `cluster_ops_per_chip`
// is worth, floor rounded.
inline int64_t cluster_equivalent_chips(int64_t cluster_ops_per_chip, int64_t count,
                                        int64_t reference_ops) {
    if (reference_ops == 0) throw std::invalid_argument("cluster_equivalent_chips: reference_ops is zero");
    if (cluster_ops_per_chip <= 0 || count <= 0 || reference_ops < 0) {
        throw std::invalid_argument("cluster_equivalent_chips: inputs must be positive");
    }
    __int128 total = static_cast<__int128>(cluster_ops_per_chip) * count;
    return static_cast<int64_t>(total / reference_ops);
}

// ---------------------------------------------------------------------------
// JSON bindings
// ---------------------------------------------------------------------------

inline void to_json(Json& j, const Evidence& e) {
    j = Json{{"check", e.check}, {"measured", e.measured}, {"threshold", e.threshold}};
}
inline void from_json(const Json& j, Evidence& e) {
    j.at("check").get_to(e.check);
    j.at("measured").get_to(e.measured);
    j.at("threshold").get_to(e.threshold);
}

inline void to_json(Json& j, const Verdict& v) {
    j = Json{{"status", to_string(v.status)}, {"evidence", v.evidence}};
}
inline void from_json(const Json& j, Verdict& v) {
    v.status = verdict_status_from_string(j.at("status").get<std::string>());
    j.at("evidence").get_to(v.evidence);
    v.validate();
}

inline void to_json(Json& j, const VerificationReport& r) {
    Json subgoals = Json::object();
    for (const auto& [id, verdicts] : r.subgoals) subgoals[to_string(id)] = verdicts;
    j = Json{{"subgoals", subgoals}, {"overall", to_string(r.overall)}};
}
inline void from_json(const Json& j, VerificationReport& r) {
    r.subgoals.clear();
    for (auto it = j.at("subgoals").begin(); it != j.at("subgoals").end(); ++it) {
        r.subgoals[subgoal_from_string(it.key())] = it.value().get<std::vector<Verdict>>();
    }
    r.overall = overall_from_string(j.at("overall").get<std::string>());
}

inline void to_json(Json& j, const ClusterSpec& c) {
    j = Json{{"chip_count", c.chip_count},
             {"chip_ids", c.chip_ids},
             {"cluster_id", c.cluster_id},
             {"memory_bytes", c.memory_bytes},
             {"p_idle_milliwatts", c.p_idle_milliwatts},
             {"p_max_milliwatts", c.p_max_milliwatts},
             {"peak_ops_per_hour", c.peak_ops_per_hour}};
}
inline void from_json(const Json& j, ClusterSpec& c) {
    j.at("chip_count").get_to(c.chip_count);
    j.at("chip_ids").get_to(c.chip_ids);
    j.at("cluster_id").get_to(c.cluster_id);
    j.at("memory_bytes").get_to(c.memory_bytes);
    j.at("p_idle_milliwatts").get_to(c.p_idle_milliwatts);
    j.at("p_max_milliwatts").get_to(c.p_max_milliwatts);
    j.at("peak_ops_per_hour").get_to(c.peak_ops_per_hour);
    c.validate();
}

inline void to_json(Json& j, const OptimizerParams& p) {
    j = Json{{"beta1_raw", p.beta1.raw},
             {"beta2_raw", p.beta2.raw},
             {"epsilon_raw", p.epsilon.raw},
             {"learning_rate_raw", p.learning_rate.raw},
             {"momentum_raw", p.momentum.raw}};
}
inline void from_json(const Json& j, OptimizerParams& p) {
    p.beta1 = FixedPoint::from_raw(j.at("beta1_raw").get<int32_t>());
    p.beta2 = FixedPoint::from_raw(j.at("beta2_raw").get<int32_t>());
    p.epsilon = FixedPoint::from_raw(j.at("epsilon_raw").get<int32_t>());
    p.learning_rate = FixedPoint::from_raw(j.at("learning_rate_raw").get<int32_t>());
    p.momentum = FixedPoint::from_raw(j.at("momentum_raw").get<int32_t>());
}

inline void to_json(Json& j, const WorkloadDeclaration& d) {
    j = Json{{"architecture", d.architecture},
             {"batch_size", d.batch_size},
             {"batches_per_segment", d.batches_per_segment},
             {"claimed_chip_hours_milli", d.claimed_chip_hours_milli},
             {"claimed_model_ops", d.claimed_model_ops},
             {"data_commitment", to_hex(d.data_commitment)},
             {"kind", to_string(d.kind)},
             {"master_seed", to_hex(d.master_seed)},
             {"mfu_ppm", d.mfu_ppm},
             {"node_count", d.node_count},
             {"optimizer_family", to_string(d.optimizer_family)},
             {"optimizer_params", d.optimizer_params},
             {"segment_count", d.segment_count},
             {"temperature_ppm", d.temperature_ppm},
             {"workload_id", d.workload_id}};
}
inline void from_json(const Json& j, WorkloadDeclaration& d) {
    j.at("architecture").get_to(d.architecture);
    j.at("batch_size").get_to(d.batch_size);
    j.at("batches_per_segment").get_to(d.batches_per_segment);
    j.at("claimed_chip_hours_milli").get_to(d.claimed_chip_hours_milli);
    j.at("claimed_model_ops").get_to(d.claimed_model_ops);
    d.data_commitment = array_from_hex<32>(j.at("data_commitment").get<std::string>());
    d.kind = workload_kind_from_string(j.at("kind").get<std::string>());
    d.master_seed = array_from_hex<32>(j.at("master_seed").get<std::string>());
    j.at("mfu_ppm").get_to(d.mfu_ppm);
    j.at("node_count").get_to(d.node_count);
    d.optimizer_family = optimizer_family_from_string(j.at("optimizer_family").get<std::string>());
    j.at("optimizer_params").get_to(d.optimizer_params);
    j.at("segment_count").get_to(d.segment_count);
    j.at("temperature_ppm").get_to(d.temperature_ppm);
    j.at("workload_id").get_to(d.workload_id);
    d.validate();
}

}  // namespace verifsim
