#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace verifsim {

// Two's-complement wrap of a 64-bit value to 32 bits.
inline int32_t wrap32(int64_t v) {
    return static_cast<int32_t>(static_cast<uint32_t>(static_cast<uint64_t>(v)));
}

// Wrapping 32-bit add/sub/mul performed on unsigned representations, so signed
// overflow never occurs in C++ terms.
inline int32_t wrap_add32(int32_t a, int32_t b) {
    return static_cast<int32_t>(static_cast<uint32_t>(a) + static_cast<uint32_t>(b));
}
inline int32_t wrap_sub32(int32_t a, int32_t b) {
    return static_cast<int32_t>(static_cast<uint32_t>(a) - static_cast<uint32_t>(b));
}
inline int64_t wrap_add64(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) + static_cast<uint64_t>(b));
}
inline int64_t wrap_mul64(int64_t a, int64_t b) {
    return static_cast<int64_t>(static_cast<uint64_t>(a) * static_cast<uint64_t>(b));
}

// The only two rounding primitives in the numeric pipeline. Every division or
// rescale site routes through one of these; the rounding-site audit test counts
// call sites against a frozen manifest.
//
// floor_shift64: arithmetic right shift, rounds toward negative infinity.
inline int64_t floor_shift64(int64_t v, int bits) {
    return v >> bits;  // arithmetic shift is defined for signed types in C++20
}

// floor_div64: integer division rounding toward negative infinity.
inline int64_t floor_div64(int64_t num, int64_t den) {
    if (den == 0) throw std::domain_error("floor_div64: division by zero");
    int64_t q = num / den;
    int64_t r = num % den;
    if (r != 0 && ((r < 0) != (den < 0))) --q;
    return q;
}

// Q16.16 signed fixed point with wrapping (modular) overflow. Wrapping keeps
// addition associative, which is what makes replay bit-exact regardless of
// accumulation order.
struct FixedPoint {
    int32_t raw = 0;

    static constexpr int kFracBits = 16;
    static constexpr int32_t kOneRaw = 1 << kFracBits;

    static constexpr FixedPoint from_raw(int32_t r) { return FixedPoint{r}; }
    static constexpr FixedPoint zero() { return FixedPoint{0}; }
    static constexpr FixedPoint one() { return FixedPoint{kOneRaw}; }

    static FixedPoint from_int(int32_t i) { return FixedPoint{wrap32(static_cast<int64_t>(i) << kFracBits)}; }

    // Construction from double is for fixtures and diagnostics only; committed
    // data always carries raw integers.
    static FixedPoint from_double(double d) {
        double scaled = d * static_cast<double>(kOneRaw);
        if (!(scaled >= static_cast<double>(std::numeric_limits<int32_t>::min()) &&
              scaled <= static_cast<double>(std::numeric_limits<int32_t>::max()))) {
            throw std::range_error("FixedPoint::from_double: out of Q16.16 range");
        }
        return FixedPoint{static_cast<int32_t>(scaled)};
    }

    double to_double() const { return static_cast<double>(raw) / kOneRaw; }

    friend bool operator==(FixedPoint a, FixedPoint b) { return a.raw == b.raw; }
    friend bool operator!=(FixedPoint a, FixedPoint b) { return a.raw != b.raw; }
    friend bool operator<(FixedPoint a, FixedPoint b) { return a.raw < b.raw; }
    friend bool operator<=(FixedPoint a, FixedPoint b) { return a.raw <= b.raw; }
    friend bool operator>(FixedPoint a, FixedPoint b) { return a.raw > b.raw; }
    friend bool operator>=(FixedPoint a, FixedPoint b) { return a.raw >= b.raw; }
};

inline FixedPoint fx_add(FixedPoint a, FixedPoint b) { return FixedPoint{wrap_add32(a.raw, b.raw)}; }
inline FixedPoint fx_sub(FixedPoint a, FixedPoint b) { return FixedPoint{wrap_sub32(a.raw, b.raw)}; }
inline FixedPoint fx_neg(FixedPoint a) { return FixedPoint{wrap_sub32(0, a.raw)}; }

// Multiply: exact 64-bit product, floor rescale, wrap to 32 bits.
inline FixedPoint fx_mul(FixedPoint a, FixedPoint b) {
    int64_t prod = static_cast<int64_t>(a.raw) * static_cast<int64_t>(b.raw);
    return FixedPoint{wrap32(floor_shift64(prod, FixedPoint::kFracBits))};
}

// Divide: floor rounding toward negative infinity.
inline FixedPoint fx_div(FixedPoint a, FixedPoint b) {
    if (b.raw == 0) throw std::domain_error("fx_div: division by zero");
    int64_t num = static_cast<int64_t>(a.raw) << FixedPoint::kFracBits;
    return FixedPoint{wrap32(floor_div64(num, static_cast<int64_t>(b.raw)))};
}

inline FixedPoint fx_clamp(FixedPoint v, FixedPoint lo, FixedPoint hi) {
    if (v.raw < lo.raw) return lo;
    if (v.raw > hi.raw) return hi;
    return v;
}

inline FixedPoint fx_min(FixedPoint a, FixedPoint b) { return a.raw < b.raw ? a : b; }
inline FixedPoint fx_max(FixedPoint a, FixedPoint b) { return a.raw > b.raw ? a : b; }

inline FixedPoint fx_abs(FixedPoint a) {
    // abs of INT32_MIN wraps back to itself; callers stay far from that value.
    return a.raw < 0 ? fx_neg(a) : a;
}

// Integer square root of a Q16.16 value, floor rounded. Input must be
// non-negative. Used by the adam-like optimizer.
inline FixedPoint fx_sqrt(FixedPoint v) {
    if (v.raw < 0) throw std::domain_error("fx_sqrt: negative input");
    // sqrt(raw / 2^16) in Q16.16 is isqrt(raw << 16).
    uint64_t x = static_cast<uint64_t>(static_cast<uint32_t>(v.raw)) << FixedPoint::kFracBits;
    uint64_t r = 0;
    uint64_t bit = uint64_t{1} << 46;  // highest power of 4 <= 2^47 range
    while (bit > x) bit >>= 2;
    while (bit != 0) {
        if (x >= r + bit) {
            x -= r + bit;
            r = (r >> 1) + bit;
        } else {
            r >>= 1;
        }
        bit >>= 2;
    }
    return FixedPoint{wrap32(static_cast<int64_t>(r))};
}

// Rescale a Q32.32 wrapping accumulator (sum of raw*raw products) back to a
// Q16.16 value: floor shift then wrap.
inline FixedPoint fx_from_acc(int64_t acc) {
    return FixedPoint{wrap32(floor_shift64(acc, FixedPoint::kFracBits))};
}

}  // namespace verifsim
