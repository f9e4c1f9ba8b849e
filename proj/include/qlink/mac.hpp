// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cstdint>
#include <span>

#include "qlink/bits.hpp"

namespace qlink::crypto {

// One-time polynomial MAC over sealed messages.
//
// Two independent polynomial-evaluation hashes over GF(2^61 - 1), each keyed
// with (r, s) drawn from 32 fresh key bytes, tags packed as two 64-bit
// big-endian words (128-bit tag). The message is consumed in 56-bit chunks so
// every chunk is already a canonical field element, and the bit length is
// absorbed as the final chunk. With single-use keys the forgery bound is
// (chunks+1)/2^61 per component.
class PolyMac {
public:
    static constexpr size_t kKeyBytes = 32;   // 256 fresh key bits per message
    static constexpr size_t kTagBytes = 16;   // 128-bit tag

    using Tag = std::array<uint8_t, kTagBytes>;

    static Tag compute(std::span<const uint8_t> key, const BitVec& message) {
        if (key.size() != kKeyBytes) throw InvalidParameter("PolyMac: key must be 32 bytes");
        uint64_t r1 = read_u64_le(key.data()) % kPrime;
        uint64_t s1 = read_u64_le(key.data() + 8) % kPrime;
        uint64_t r2 = read_u64_le(key.data() + 16) % kPrime;
        uint64_t s2 = read_u64_le(key.data() + 24) % kPrime;

        uint64_t h1 = hash_one(r1, s1, message);
        uint64_t h2 = hash_one(r2, s2, message);

        Tag tag{};
        for (int i = 0; i < 8; ++i) {
            tag[i] = static_cast<uint8_t>(h1 >> (8 * (7 - i)));
            tag[8 + i] = static_cast<uint8_t>(h2 >> (8 * (7 - i)));
        }
        return tag;
    }

    static bool verify(std::span<const uint8_t> key, const BitVec& message, const Tag& tag) {
        return compute(key, message) == tag;
    }

private:
    static constexpr uint64_t kPrime = (1ull << 61) - 1;

    static uint64_t mul_mod(uint64_t a, uint64_t b) {
        unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
        uint64_t lo = static_cast<uint64_t>(p & kPrime);
        uint64_t hi = static_cast<uint64_t>(p >> 61);
        uint64_t r = lo + hi;
        if (r >= kPrime) r -= kPrime;
        return r;
    }

    static uint64_t add_mod(uint64_t a, uint64_t b) {
        uint64_t r = a + b;
        if (r >= kPrime) r -= kPrime;
        return r;
    }

    static uint64_t hash_one(uint64_t r, uint64_t s, const BitVec& message) {
        const Bytes& data = message.bytes();
        uint64_t acc = 0;
        size_t i = 0;
        while (i < data.size()) {
            // 7 bytes -> 56-bit chunk, strictly below the field modulus
            uint64_t chunk = 0;
            size_t take = std::min<size_t>(7, data.size() - i);
            for (size_t b = 0; b < take; ++b) chunk |= static_cast<uint64_t>(data[i + b]) << (8 * b);
            i += take;
            acc = mul_mod(add_mod(acc, chunk), r);
        }
        acc = mul_mod(add_mod(acc, message.size_bits() % kPrime), r);
        return add_mod(acc, s);
    }
};

}  // namespace qlink::crypto
