#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <sodium.h>

#include "verifsim/core.hpp"

namespace verifsim::attest {

// ---------------------------------------------------------------------------
// Ed25519 wrappers
// ---------------------------------------------------------------------------

using PublicKey = std::array<uint8_t, crypto_sign_PUBLICKEYBYTES>;
using SecretKey = std::array<uint8_t, crypto_sign_SECRETKEYBYTES>;
using Signature = std::array<uint8_t, crypto_sign_BYTES>;

struct KeyPair {
    PublicKey pk{};
    SecretKey sk{};
};

inline KeyPair keypair_from_seed(const Seed32& seed) {
    ensure_sodium();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
    return kp;
}

inline Signature sign_detached(const Bytes& msg, const SecretKey& sk) {
    ensure_sodium();
    Signature sig{};
    crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), sk.data());
    return sig;
}

inline bool verify_detached(const Signature& sig, const Bytes& msg, const PublicKey& pk) {
    ensure_sodium();
    return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

// Chip signing keys are derived from the chip id so fixtures replay; real
// deployments would provision keys from hardware randomness instead.
inline KeyPair chip_keypair(const std::string& chip_id) {
    return keypair_from_seed(commit("verifsim.chip-key." + chip_id));
}

inline PublicKey chip_public_key(const std::string& chip_id) { return chip_keypair(chip_id).pk; }

// The licensing authority (Verifier side) has its own key.
inline KeyPair license_authority_keypair() {
    return keypair_from_seed(commit(std::string("verifsim.license-authority")));
}

// ---------------------------------------------------------------------------
// Chip state and secure boot
// ---------------------------------------------------------------------------

// What survives power-off: the monotonic certificate counter.
struct ChipNvram {
    uint64_t monotonic_counter = 0;
};

struct ChipState {
    std::string chip_id;
    KeyPair keys;
    Hash32 firmware_hash{};
    uint64_t monotonic_counter = 0;
    int64_t license_expiry_tick = 0;
    bool throttled = false;

    ChipNvram nvram() const { return ChipNvram{monotonic_counter}; }
};

struct BootRefusal {
    std::string chip_id;
    std::string reason;
};

struct BootResult {
    std::optional<ChipState> chip;
    std::optional<BootRefusal> refusal;

    bool booted() const { return chip.has_value(); }
};

// Secure boot: the chip only comes up under approved system software. An
// unapproved image produces a refusal record (a tamper-evidence event), not a
// running chip. Counters persist across reboots via nvram.
inline BootResult boot_chip(const std::string& chip_id, const Hash32& firmware_hash,
                            const std::vector<Hash32>& approved_hashes,
                            std::optional<ChipNvram> nvram = std::nullopt,
                            int64_t initial_license_expiry_tick = 0) {
    BootResult result;
    bool approved = std::find(approved_hashes.begin(), approved_hashes.end(), firmware_hash) !=
                    approved_hashes.end();
    if (!approved) {
        result.refusal = BootRefusal{chip_id, "firmware hash not in approved set"};
        return result;
    }
    ChipState chip;
    chip.chip_id = chip_id;
    chip.keys = chip_keypair(chip_id);
    chip.firmware_hash = firmware_hash;
    chip.monotonic_counter = nvram ? nvram->monotonic_counter : 0;
    chip.license_expiry_tick = initial_license_expiry_tick;
    chip.throttled = false;
    result.chip = std::move(chip);
    return result;
}

// ---------------------------------------------------------------------------
// Workload certificates
// ---------------------------------------------------------------------------

struct CertificateBody {
    std::string chip_id;
    uint64_t counter_value = 0;
    Hash32 declaration_commitment{};
    Hash32 result_commitment{};
    int64_t chip_hours_milli = 0;

    friend bool operator==(const CertificateBody&, const CertificateBody&) = default;
};

inline void to_json(Json& j, const CertificateBody& b) {
    j = Json{{"chip_hours_milli", b.chip_hours_milli},
             {"chip_id", b.chip_id},
             {"counter_value", b.counter_value},
             {"declaration_commitment", to_hex(b.declaration_commitment)},
             {"result_commitment", to_hex(b.result_commitment)}};
}
inline void from_json(const Json& j, CertificateBody& b) {
    j.at("chip_hours_milli").get_to(b.chip_hours_milli);
    j.at("chip_id").get_to(b.chip_id);
    j.at("counter_value").get_to(b.counter_value);
    b.declaration_commitment = array_from_hex<32>(j.at("declaration_commitment").get<std::string>());
    b.result_commitment = array_from_hex<32>(j.at("result_commitment").get<std::string>());
}

struct WorkloadCertificate {
    CertificateBody body;
    Signature signature{};

    friend bool operator==(const WorkloadCertificate&, const WorkloadCertificate&) = default;
};

inline void to_json(Json& j, const WorkloadCertificate& c) {
    j = Json{{"body", c.body}, {"signature", to_base64(c.signature)}};
}
inline void from_json(const Json& j, WorkloadCertificate& c) {
    j.at("body").get_to(c.body);
    Bytes sig = from_base64(j.at("signature").get<std::string>());
    if (sig.size() != c.signature.size()) throw std::invalid_argument("certificate: bad signature length");
    std::copy(sig.begin(), sig.end(), c.signature.begin());
}

// Issue a certificate and bump the monotonic counter by exactly one. A
// throttled chip (license lapsed) refuses.
inline std::optional<WorkloadCertificate> issue_certificate(ChipState& chip,
                                                            const Hash32& declaration_commitment,
                                                            const Hash32& result_commitment,
                                                            int64_t chip_hours_milli,
                                                            std::string* refusal_reason = nullptr) {
    if (chip.throttled) {
        if (refusal_reason) *refusal_reason = "chip throttled: license expired";
        return std::nullopt;
    }
    WorkloadCertificate cert;
    cert.body.chip_id = chip.chip_id;
    cert.body.counter_value = chip.monotonic_counter;
    cert.body.declaration_commitment = declaration_commitment;
    cert.body.result_commitment = result_commitment;
    cert.body.chip_hours_milli = chip_hours_milli;
    cert.signature = sign_detached(canonical_encode(cert.body), chip.keys.sk);
    chip.monotonic_counter += 1;
    return cert;
}

inline Verdict verify_certificate(const WorkloadCertificate& cert, const PublicKey& pk) {
    Bytes msg;
    try {
        msg = canonical_encode(cert.body);
    } catch (const std::exception& e) {
        return verdict_fail({{"attest.certificate_parse", e.what(), "canonical body"}});
    }
    bool ok = verify_detached(cert.signature, msg, pk);
    Evidence ev{"attest.certificate_signature", ok ? "valid" : "invalid", "valid"};
    return ok ? verdict_pass({ev}) : verdict_fail({ev});
}

// Certificate completeness: counters must be exactly 0..final-1. A gap means a
// certificate was hidden or deleted; a duplicate suggests cloning.
inline Verdict check_counter_continuity(std::vector<WorkloadCertificate> certs,
                                        uint64_t attested_final_counter) {
    std::sort(certs.begin(), certs.end(), [](const auto& a, const auto& b) {
        return a.body.counter_value < b.body.counter_value;
    });
    std::vector<Evidence> problems;
    uint64_t expected = 0;
    for (const auto& c : certs) {
        uint64_t v = c.body.counter_value;
        if (v < expected) {
            problems.push_back({"attest.counter_duplicate", fmt_value(v), "unique counters"});
        } else if (v > expected) {
            for (uint64_t missing = expected; missing < v && problems.size() < 64; ++missing) {
                problems.push_back({"attest.counter_missing", fmt_value(missing), "present"});
            }
            expected = v + 1;
        } else {
            expected = v + 1;
        }
    }
    if (expected != attested_final_counter) {
        for (uint64_t missing = expected; missing < attested_final_counter && problems.size() < 64; ++missing) {
            problems.push_back({"attest.counter_missing", fmt_value(missing), "present"});
        }
        if (expected > attested_final_counter) {
            problems.push_back({"attest.counter_overrun", fmt_value(expected), fmt_value(attested_final_counter)});
        }
    }
    if (!problems.empty()) return verdict_fail(std::move(problems));
    return verdict_pass({{"attest.counter_continuity", fmt_value(attested_final_counter), "0..final-1 complete"}});
}

// Link certificates to measured compute: the chip-hours on disclosed
// certificates must cover the independently verified total.
inline Verdict compute_accounting_link(const std::vector<WorkloadCertificate>& certs,
                                       double verified_total_chip_hours, double tolerance) {
    double sum_hours = 0;
    for (const auto& c : certs) sum_hours += static_cast<double>(c.body.chip_hours_milli) / 1000.0;
    double lo = verified_total_chip_hours * (1.0 - tolerance);
    // A small absolute allowance covers tick quantization on tiny fixtures.
    double hi = verified_total_chip_hours + 1e-9;
    Evidence ev{"attest.accounting_link", fmt_value(sum_hours),
                fmt_value(lo) + ".." + fmt_value(verified_total_chip_hours)};
    if (sum_hours >= lo && sum_hours <= hi) return verdict_pass({ev});
    Evidence residual{"attest.unaccounted_chip_hours",
                      fmt_value(verified_total_chip_hours - sum_hours), "0"};
    return verdict_fail({ev, residual});
}

// ---------------------------------------------------------------------------
// Offline licensing
// ---------------------------------------------------------------------------

struct LicenseBody {
    std::string chip_id;
    int64_t expiry_tick = 0;
    std::string grant_id;

    friend bool operator==(const LicenseBody&, const LicenseBody&) = default;
};

inline void to_json(Json& j, const LicenseBody& b) {
    j = Json{{"chip_id", b.chip_id}, {"expiry_tick", b.expiry_tick}, {"grant_id", b.grant_id}};
}
inline void from_json(const Json& j, LicenseBody& b) {
    j.at("chip_id").get_to(b.chip_id);
    j.at("expiry_tick").get_to(b.expiry_tick);
    j.at("grant_id").get_to(b.grant_id);
}

struct LicenseGrant {
    LicenseBody body;
    Signature signature{};
};

inline void to_json(Json& j, const LicenseGrant& g) {
    j = Json{{"body", g.body}, {"signature", to_base64(g.signature)}};
}
inline void from_json(const Json& j, LicenseGrant& g) {
    j.at("body").get_to(g.body);
    Bytes sig = from_base64(j.at("signature").get<std::string>());
    if (sig.size() != g.signature.size()) throw std::invalid_argument("license: bad signature length");
    std::copy(sig.begin(), sig.end(), g.signature.begin());
}

inline LicenseGrant make_license(const SecretKey& authority_sk, const std::string& chip_id,
                                 int64_t expiry_tick, const std::string& grant_id) {
    LicenseGrant g;
    g.body.chip_id = chip_id;
    g.body.expiry_tick = expiry_tick;
    g.body.grant_id = grant_id;
    g.signature = sign_detached(canonical_encode(g.body), authority_sk);
    return g;
}

// Advance a chip through one licensing cycle. A valid grant extends the
// expiry; an invalid one is ignored and logged. A chip past expiry throttles
// and refuses to issue certificates until re-licensed.
inline ChipState license_cycle(ChipState chip, const std::optional<LicenseGrant>& license,
                               int64_t current_tick, const PublicKey& authority_pk,
                               std::vector<std::string>* event_log = nullptr) {
    if (license) {
        bool sig_ok = verify_detached(license->signature, canonical_encode(license->body), authority_pk);
        bool id_ok = license->body.chip_id == chip.chip_id;
        if (sig_ok && id_ok) {
            if (license->body.expiry_tick > chip.license_expiry_tick) {
                chip.license_expiry_tick = license->body.expiry_tick;
            }
        } else if (event_log) {
            event_log->push_back("ignored invalid license grant for chip " + chip.chip_id +
                                 (sig_ok ? " (chip id mismatch)" : " (bad signature)"));
        }
    }
    chip.throttled = current_tick > chip.license_expiry_tick;
    return chip;
}

// ---------------------------------------------------------------------------
// Chip registry
// ---------------------------------------------------------------------------

// Certificates from chips outside the declared registry reveal hidden
// hardware; declared chips that never produce certificates (beyond a silence
// allowance) suggest diverted hardware.
inline Verdict registry_reconcile(const std::vector<std::string>& declared_chip_ids,
                                  const std::vector<std::string>& observed_certificate_chip_ids,
                                  double silent_fraction_threshold = 0.20) {
    std::set<std::string> declared(declared_chip_ids.begin(), declared_chip_ids.end());
    std::set<std::string> observed(observed_certificate_chip_ids.begin(),
                                   observed_certificate_chip_ids.end());
    std::vector<Evidence> problems;
    for (const auto& id : observed) {
        if (!declared.count(id)) {
            problems.push_back({"attest.unregistered_chip", id, "declared in registry"});
        }
    }
    size_t silent = 0;
    for (const auto& id : declared) {
        if (!observed.count(id)) ++silent;
    }
    double silent_fraction = declared.empty() ? 0.0 : static_cast<double>(silent) / declared.size();
    if (silent_fraction > silent_fraction_threshold) {
        problems.push_back({"attest.silent_chips", fmt_value(silent_fraction),
                            fmt_value(silent_fraction_threshold)});
    }
    if (!problems.empty()) return verdict_fail(std::move(problems));
    return verdict_pass({{"attest.registry", fmt_value(silent_fraction),
                          fmt_value(silent_fraction_threshold)}});
}

}  // namespace verifsim::attest
