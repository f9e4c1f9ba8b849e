// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qlink/bits.hpp"
#include "qlink/sha256.hpp"

namespace qlink {

// Deterministic 64-bit generator (splitmix64). Used for everything that needs
// plain simulation randomness: fault strategy draws, shuffles, payload bytes.
// std::uniform_* distributions are avoided so that streams stay identical
// regardless of the standard library.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, bound) by rejection
    uint64_t next_below(uint64_t bound) {
        if (bound == 0) throw InvalidParameter("next_below: zero bound");
        uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    double next_unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

    Bytes next_bytes(size_t n) {
        Bytes out(n);
        size_t i = 0;
        while (i < n) {
            uint64_t v = next();
            for (int b = 0; b < 8 && i < n; ++b, ++i) out[i] = static_cast<uint8_t>(v >> (8 * b));
        }
        return out;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[next_below(i)]);
    }

private:
    uint64_t state_;
};

// Derives an independent sub-seed from a root seed and a label.
inline uint64_t derive_seed(uint64_t root, std::string_view label, uint64_t index = 0) {
    crypto::Sha256 h;
    h.update_u64(root);
    h.update(label);
    h.update_u64(index);
    Hash256 d = h.finalize();
    return read_u64_le(d.data());
}

// Offset-addressable deterministic bit stream. Models the identical key
// material a QKD link delivers at both endpoints: block k of the stream is
// sha256(seed || k), and any bit range can be reproduced from (seed, offset).
class Keystream {
public:
    Keystream() = default;
    explicit Keystream(const Hash256& seed) : seed_(seed) {}

    static Keystream for_link(uint64_t scenario_seed, uint64_t link_a, uint64_t link_b) {
        crypto::Sha256 h;
        h.update("qkd-keystream");
        h.update_u64(scenario_seed);
        h.update_u64(link_a);
        h.update_u64(link_b);
        return Keystream(h.finalize());
    }

    // Bits [offset_bits, offset_bits + nbits) of the stream.
    BitVec bits(uint64_t offset_bits, uint64_t nbits) const {
        if (nbits == 0) return BitVec();
        uint64_t first_byte = offset_bits / 8;
        uint64_t last_byte = (offset_bits + nbits - 1) / 8;
        uint64_t nbytes = last_byte - first_byte + 1;
        Bytes raw(nbytes + 1, 0);  // one spare byte for the shift below
        fill_bytes(first_byte, std::span<uint8_t>(raw.data(), nbytes));

        unsigned shift = static_cast<unsigned>(offset_bits % 8);
        Bytes out(BitVec::byte_len(nbits));
        for (size_t i = 0; i < out.size(); ++i) {
            out[i] = static_cast<uint8_t>((raw[i] << shift) | (shift ? (raw[i + 1] >> (8 - shift)) : 0));
        }
        return BitVec(std::move(out), nbits);
    }

    void fill_bytes(uint64_t byte_offset, std::span<uint8_t> out) const {
        uint64_t pos = byte_offset;
        size_t written = 0;
        while (written < out.size()) {
            uint64_t block_idx = pos / 32;
            size_t in_block = static_cast<size_t>(pos % 32);
            const Hash256& b = block(block_idx);
            size_t take = std::min(out.size() - written, 32 - in_block);
            std::memcpy(out.data() + written, b.data() + in_block, take);
            written += take;
            pos += take;
        }
    }

private:
    const Hash256& block(uint64_t k) const {
        if (k != cached_index_) {
            crypto::Sha256 h;
            h.update(std::span<const uint8_t>(seed_.data(), seed_.size()));
            h.update_u64(k);
            cache_ = h.finalize();
            cached_index_ = k;
        }
        return cache_;
    }

    Hash256 seed_{};
    mutable uint64_t cached_index_ = ~0ull;
    mutable Hash256 cache_{};
};

}  // namespace qlink
