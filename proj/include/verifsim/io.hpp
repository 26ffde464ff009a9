#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "verifsim/scenario.hpp"

namespace verifsim::io {

namespace fs = std::filesystem;

inline void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename T>
void write_json_file(const fs::path& path, const T& value) {
    Json j = value;
    write_file(path, canonical_dump(j));
}

template <typename T>
T read_json_file(const fs::path& path) {
    Json j = Json::parse(read_file(path));
    return j.get<T>();
}

// ---------------------------------------------------------------------------
// Run directory layout
//
//   scenario.scenario.json      the scenario that produced the run
//   cluster.json                declared cluster registry entry
//   train.decl.json             training declaration
//   inference.decl.json         inference declaration
//   nonai.decl.json             non-AI declaration
//   manifest.json               classification flag, sample-store counts
//   transcript.json             training transcript (order, segments)
//   ckpt_NNN.ckpt.json          checkpoints, canonical raw-integer dumps
//   batch_NNN.data.json         declared batch data, flat integer arrays
//   sensors.trace.json          measured power trace
//   cert_NNN.cert.json          workload certificates
//   counters.json               attested final counters per chip
//   licenses.json               license grants
//   tap.tap.json                sampled network tap log
//   fill.fill.json              memory fill challenge transcript
//   inference_result.json       claimed inference output commitment
//   report.report.json          written by `verify`
// ---------------------------------------------------------------------------

inline std::string zero_pad(uint64_t v, int width = 3) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

inline void write_run_dir(const fs::path& dir, const scenario::RunArtifacts& art) {
    fs::create_directories(dir);
    write_json_file(dir / "scenario.scenario.json", art.scenario);
    write_json_file(dir / "cluster.json", art.cluster);
    write_json_file(dir / "train.decl.json", art.train_decl);
    write_json_file(dir / "inference.decl.json", art.inference_decl);
    write_json_file(dir / "nonai.decl.json", art.nonai_decl);

    Json manifest{{"event_log", art.event_log},
                  {"inference_result_commitment", to_hex(art.inference_result_commitment)},
                  {"nonai_classified_non_ai", art.nonai_classified_non_ai},
                  {"sample_q_ppm", art.sample_q_ppm},
                  {"sample_stored", art.sample_stored},
                  {"sample_total", art.sample_total}};
    write_file(dir / "manifest.json", canonical_dump(manifest));

    write_json_file(dir / "transcript.json", art.transcript);
    for (size_t i = 0; i < art.transcript.checkpoints.size(); ++i) {
        write_json_file(dir / ("ckpt_" + zero_pad(i) + ".ckpt.json"), art.transcript.checkpoints[i]);
    }
    std::vector<detnet::Batch> batches = detnet::make_batches(art.train_decl);
    for (size_t i = 0; i < batches.size(); ++i) {
        write_json_file(dir / ("batch_" + zero_pad(i) + ".data.json"), batches[i]);
    }

    write_json_file(dir / "sensors.trace.json", art.sensor_trace);

    for (size_t i = 0; i < art.certificates.size(); ++i) {
        write_json_file(dir / ("cert_" + zero_pad(i) + ".cert.json"), art.certificates[i]);
    }
    Json counters = Json::object();
    for (const auto& [chip, value] : art.attested_final_counters) counters[chip] = value;
    write_file(dir / "counters.json", canonical_dump(counters));
    write_json_file(dir / "licenses.json", art.licenses);

    write_json_file(dir / "tap.tap.json", art.tap_log);
    write_json_file(dir / "fill.fill.json", art.fill);

    Json inference_result{{"outputs_commitment", to_hex(art.inference_result_commitment)}};
    write_file(dir / "inference_result.json", canonical_dump(inference_result));

    // The extra declarations of a duplicate-inflation submission.
    write_json_file(dir / "declarations.json", art.declaration_set);
}

inline scenario::RunArtifacts read_run_dir(const fs::path& dir) {
    scenario::RunArtifacts art;
    art.scenario = read_json_file<scenario::Scenario>(dir / "scenario.scenario.json");
    art.cluster = read_json_file<ClusterSpec>(dir / "cluster.json");
    art.train_decl = read_json_file<WorkloadDeclaration>(dir / "train.decl.json");
    art.inference_decl = read_json_file<WorkloadDeclaration>(dir / "inference.decl.json");
    art.nonai_decl = read_json_file<WorkloadDeclaration>(dir / "nonai.decl.json");

    Json manifest = Json::parse(read_file(dir / "manifest.json"));
    manifest.at("event_log").get_to(art.event_log);
    art.inference_result_commitment =
        array_from_hex<32>(manifest.at("inference_result_commitment").get<std::string>());
    manifest.at("nonai_classified_non_ai").get_to(art.nonai_classified_non_ai);
    manifest.at("sample_q_ppm").get_to(art.sample_q_ppm);
    manifest.at("sample_stored").get_to(art.sample_stored);
    manifest.at("sample_total").get_to(art.sample_total);

    art.transcript = read_json_file<detnet::TrainingTranscript>(dir / "transcript.json");
    art.sensor_trace = read_json_file<accounting::SensorTrace>(dir / "sensors.trace.json");

    for (size_t i = 0;; ++i) {
        fs::path p = dir / ("cert_" + zero_pad(i) + ".cert.json");
        if (!fs::exists(p)) break;
        art.certificates.push_back(read_json_file<attest::WorkloadCertificate>(p));
    }
    Json counters = Json::parse(read_file(dir / "counters.json"));
    for (auto it = counters.begin(); it != counters.end(); ++it) {
        art.attested_final_counters[it.key()] = it.value().get<uint64_t>();
    }
    art.licenses = read_json_file<std::vector<attest::LicenseGrant>>(dir / "licenses.json");
    art.tap_log = read_json_file<nettap::TapLog>(dir / "tap.tap.json");
    art.fill = read_json_file<nettap::FillTranscript>(dir / "fill.fill.json");
    art.declaration_set = read_json_file<std::vector<WorkloadDeclaration>>(dir / "declarations.json");
    return art;
}

}  // namespace verifsim::io
