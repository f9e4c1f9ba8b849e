// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cstdint>
#include <span>

#include "qlink/common.hpp"

namespace qlink {

// Bit string with explicit length. Key accounting is bit-exact (payloads are
// not byte-aligned), so sizes are carried in bits everywhere. Bit i lives at
// byte i/8, MSB first; trailing bits of the last byte are kept zero.
class BitVec {
public:
    BitVec() = default;

    BitVec(Bytes bytes, uint64_t nbits) : bytes_(std::move(bytes)), nbits_(nbits) {
        if (bytes_.size() != byte_len(nbits)) throw InvalidParameter("BitVec: byte/bit length mismatch");
        mask_tail();
    }

    static BitVec from_bytes(std::span<const uint8_t> data) {
        return BitVec(Bytes(data.begin(), data.end()), data.size() * 8);
    }

    static BitVec zeros(uint64_t nbits) { return BitVec(Bytes(byte_len(nbits), 0), nbits); }

    static constexpr uint64_t byte_len(uint64_t nbits) { return (nbits + 7) / 8; }

    uint64_t size_bits() const { return nbits_; }
    bool empty() const { return nbits_ == 0; }
    const Bytes& bytes() const { return bytes_; }

    bool bit(uint64_t i) const { return (bytes_[i / 8] >> (7 - (i % 8))) & 1; }

    void set_bit(uint64_t i, bool v) {
        uint8_t mask = static_cast<uint8_t>(1u << (7 - (i % 8)));
        if (v) bytes_[i / 8] |= mask; else bytes_[i / 8] &= static_cast<uint8_t>(~mask);
    }

    uint64_t count_ones() const {
        uint64_t n = 0;
        for (uint8_t b : bytes_) n += static_cast<uint64_t>(__builtin_popcount(b));
        return n;
    }

    BitVec xor_with(const BitVec& other) const {
        if (nbits_ != other.nbits_) throw InvalidParameter("BitVec: xor length mismatch");
        Bytes out(bytes_.size());
        for (size_t i = 0; i < bytes_.size(); ++i) out[i] = bytes_[i] ^ other.bytes_[i];
        return BitVec(std::move(out), nbits_);
    }

    friend bool operator==(const BitVec& a, const BitVec& b) {
        return a.nbits_ == b.nbits_ && a.bytes_ == b.bytes_;
    }
    friend bool operator!=(const BitVec& a, const BitVec& b) { return !(a == b); }

private:
    void mask_tail() {
        if (nbits_ % 8 != 0 && !bytes_.empty()) {
            uint8_t keep = static_cast<uint8_t>(0xFFu << (8 - (nbits_ % 8)));
            bytes_.back() &= keep;
        }
    }

    Bytes bytes_;
    uint64_t nbits_ = 0;
};

}  // namespace qlink
