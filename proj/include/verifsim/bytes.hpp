#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <sodium.h>

namespace verifsim {

using Bytes = std::vector<uint8_t>;
using Hash32 = std::array<uint8_t, 32>;
using Seed32 = std::array<uint8_t, 32>;

inline void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

inline std::string to_hex(const uint8_t* data, size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out(n * 2, '0');
    for (size_t i = 0; i < n; ++i) {
        out[2 * i] = digits[data[i] >> 4];
        out[2 * i + 1] = digits[data[i] & 0xf];
    }
    return out;
}

template <size_t N>
std::string to_hex(const std::array<uint8_t, N>& a) {
    return to_hex(a.data(), N);
}

inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline Bytes from_hex(std::string_view s) {
    if (s.size() % 2 != 0) throw std::invalid_argument("from_hex: odd length");
    Bytes out(s.size() / 2);
    for (size_t i = 0; i < out.size(); ++i) {
        int hi = hex_nibble(s[2 * i]);
        int lo = hex_nibble(s[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("from_hex: bad digit");
        out[i] = static_cast<uint8_t>((hi << 4) | lo);
    }
    return out;
}

template <size_t N>
std::array<uint8_t, N> array_from_hex(std::string_view s) {
    Bytes b = from_hex(s);
    if (b.size() != N) throw std::invalid_argument("array_from_hex: wrong length");
    std::array<uint8_t, N> out{};
    std::copy(b.begin(), b.end(), out.begin());
    return out;
}

inline std::string to_base64(const uint8_t* data, size_t n) {
    ensure_sodium();
    std::string out(sodium_base64_encoded_len(n, sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(out.data(), out.size(), data, n, sodium_base64_VARIANT_ORIGINAL);
    out.resize(out.find('\0') == std::string::npos ? out.size() : out.find('\0'));
    return out;
}

inline std::string to_base64(const Bytes& b) { return to_base64(b.data(), b.size()); }

template <size_t N>
std::string to_base64(const std::array<uint8_t, N>& a) {
    return to_base64(a.data(), N);
}

inline Bytes from_base64(std::string_view s) {
    ensure_sodium();
    Bytes out(s.size());  // decoded size is always smaller
    size_t real_len = 0;
    if (sodium_base642bin(out.data(), out.size(), s.data(), s.size(), nullptr, &real_len,
                          nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
        throw std::invalid_argument("from_base64: malformed input");
    }
    out.resize(real_len);
    return out;
}

inline void append_bytes(Bytes& out, const void* data, size_t n) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    out.insert(out.end(), p, p + n);
}

inline void append_u32_be(Bytes& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

inline void append_u64_be(Bytes& out, uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<uint8_t>(v >> shift));
}

inline uint64_t load_u64_be(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
}

}  // namespace verifsim
