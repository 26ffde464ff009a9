#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "verifsim/bytes.hpp"
#include "verifsim/commit.hpp"

namespace verifsim {

using Json = nlohmann::json;

struct EncodingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Canonical form: UTF-8, object keys sorted lexicographically, no insignificant
// whitespace, and integer-only numerics. Floats are banned from anything that
// gets committed; fractional quantities are carried as scaled integers (raw
// Q16.16, ppm, milli units). nlohmann::json stores objects as std::map, so
// dump() already emits sorted keys.
inline void reject_non_canonical(const Json& j, const std::string& path) {
    switch (j.type()) {
        case Json::value_t::number_float:
            throw EncodingError("canonical encoding forbids floats at " + path);
        case Json::value_t::binary:
        case Json::value_t::discarded:
            throw EncodingError("non-representable value at " + path);
        case Json::value_t::object:
            for (auto it = j.begin(); it != j.end(); ++it) {
                reject_non_canonical(it.value(), path + "/" + it.key());
            }
            break;
        case Json::value_t::array: {
            size_t i = 0;
            for (const auto& item : j) reject_non_canonical(item, path + "/" + std::to_string(i++));
            break;
        }
        default:
            break;
    }
}

inline std::string canonical_dump(const Json& j) {
    reject_non_canonical(j, "");
    return j.dump();
}

// canonical_encode for any type with a to_json overload.
template <typename T>
Bytes canonical_encode(const T& value) {
    Json j = value;
    std::string text = canonical_dump(j);
    return Bytes(text.begin(), text.end());
}

template <typename T>
Hash32 commit_value(const T& value) {
    return commit(canonical_encode(value));
}

template <typename T>
T canonical_decode(const Bytes& bytes) {
    Json j = Json::parse(bytes.begin(), bytes.end());
    return j.get<T>();
}

template <typename T>
T canonical_decode(const std::string& text) {
    Json j = Json::parse(text);
    return j.get<T>();
}

}  // namespace verifsim
