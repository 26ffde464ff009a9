#pragma once

#include <cstring>
#include <string_view>

#include <sodium.h>

#include "verifsim/bytes.hpp"

namespace verifsim {

// Content addressing: SHA-256 over raw bytes. All commitments in the protocol
// (weights, declarations, payloads, certificates) go through here.
inline Hash32 commit(const uint8_t* data, size_t n) {
    ensure_sodium();
    Hash32 out{};
    crypto_hash_sha256(out.data(), data, static_cast<unsigned long long>(n));
    return out;
}

inline Hash32 commit(const Bytes& b) { return commit(b.data(), b.size()); }

inline Hash32 commit(std::string_view s) {
    return commit(reinterpret_cast<const uint8_t*>(s.data()), s.size());
}

// Digest of a concatenation of digests; used for dataset commitments.
inline Hash32 commit_all(const std::vector<Hash32>& parts) {
    Bytes cat;
    cat.reserve(parts.size() * 32);
    for (const auto& h : parts) append_bytes(cat, h.data(), h.size());
    return commit(cat);
}

}  // namespace verifsim
