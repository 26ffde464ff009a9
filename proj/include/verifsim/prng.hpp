#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "verifsim/bytes.hpp"
#include "verifsim/commit.hpp"

namespace verifsim {

// Deterministic, seedable randomness. Draw i of stream (seed, tag) is the
// leading 64 bits of SHA-256(seed || len(tag) || tag || i). Disjoint tags give
// independent streams, and any party holding the seed can recompute any draw.
inline uint64_t prng_draw(const Seed32& seed, std::string_view domain_tag, uint64_t index) {
    Bytes msg;
    msg.reserve(32 + 4 + domain_tag.size() + 8);
    append_bytes(msg, seed.data(), seed.size());
    append_u32_be(msg, static_cast<uint32_t>(domain_tag.size()));
    append_bytes(msg, domain_tag.data(), domain_tag.size());
    append_u64_be(msg, index);
    Hash32 digest = commit(msg);
    return load_u64_be(digest.data());
}

inline std::vector<uint64_t> prng_stream(const Seed32& seed, std::string_view domain_tag, size_t n) {
    std::vector<uint64_t> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(prng_draw(seed, domain_tag, i));
    return out;
}

// Sub-seed derivation for trials and per-component streams.
inline Seed32 derive_seed(const Seed32& seed, std::string_view tag) {
    Bytes msg;
    append_bytes(msg, seed.data(), seed.size());
    append_u32_be(msg, static_cast<uint32_t>(tag.size()));
    append_bytes(msg, tag.data(), tag.size());
    return commit(msg);
}

inline Seed32 derive_seed(const Seed32& seed, std::string_view tag, uint64_t index) {
    Bytes msg;
    append_bytes(msg, seed.data(), seed.size());
    append_u32_be(msg, static_cast<uint32_t>(tag.size()));
    append_bytes(msg, tag.data(), tag.size());
    append_u64_be(msg, index);
    return commit(msg);
}

// Expand a plain integer (e.g. a --seed flag) into a 32-byte seed.
inline Seed32 seed_from_u64(uint64_t v) {
    Bytes msg;
    append_u64_be(msg, v);
    return commit(msg);
}

// Uniform double in [0,1) from one draw. Only used on simulation paths that
// are allowed to touch floating point (sensor noise); committed data never is.
inline double prng_unit_double(const Seed32& seed, std::string_view tag, uint64_t index) {
    // 53 uniform bits.
    return static_cast<double>(prng_draw(seed, tag, index) >> 11) * 0x1.0p-53;
}

}  // namespace verifsim
