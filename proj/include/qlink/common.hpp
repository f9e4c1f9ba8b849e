// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlink {

using Bytes = std::vector<uint8_t>;
using Hash256 = std::array<uint8_t, 32>;

/// Identifies a validator. Wire encodings use the raw 64-bit value.
struct ValidatorId {
    uint64_t value = 0;

    constexpr ValidatorId() = default;
    constexpr explicit ValidatorId(uint64_t v) : value(v) {}

    friend constexpr bool operator==(ValidatorId a, ValidatorId b) { return a.value == b.value; }
    friend constexpr bool operator!=(ValidatorId a, ValidatorId b) { return a.value != b.value; }
    friend constexpr bool operator<(ValidatorId a, ValidatorId b) { return a.value < b.value; }
};

enum class QuorumMode {
    Count2f1,             // T = 2*floor((n-1)/3) + 1 over the active count
    WeightSupermajority,  // smallest integer T with T > (2/3) * W
};

// Errors thrown on contract/parameter violations. Expected runtime outcomes
// (insufficient key, failed verification, rejected mints) are returned as
// values, not exceptions.
struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyRegistry : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CertificateRequired : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DuplicateKey : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidScenario : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void append_bytes(Bytes& out, const void* data, size_t len) {
    const auto* p = static_cast<const uint8_t*>(data);
    out.insert(out.end(), p, p + len);
}

inline void append_u64_le(Bytes& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void append_u32_le(Bytes& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline uint64_t read_u64_le(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

inline std::string to_hex(const uint8_t* data, size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        s.push_back(digits[data[i] >> 4]);
        s.push_back(digits[data[i] & 0xf]);
    }
    return s;
}

inline std::string to_hex(const Hash256& h) { return to_hex(h.data(), h.size()); }
inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

}  // namespace qlink
