// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qlink/bits.hpp"
#include "qlink/common.hpp"
#include "qlink/mac.hpp"
#include "qlink/rng.hpp"

namespace qlink {

// ---------------------------------------------------------------------------
// Channel model
// ---------------------------------------------------------------------------

// Exponential fiber attenuation: rate(d) = r0 * exp(-lambda * d).
struct ChannelModel {
    double base_rate_r0 = 0.0;        // bits/second at d = 0
    double attenuation_lambda = 0.0;  // per km
};

inline double key_rate(double distance_km, const ChannelModel& model) {
    if (distance_km < 0.0) throw InvalidParameter("key_rate: negative distance");
    return model.base_rate_r0 * std::exp(-model.attenuation_lambda * distance_km);
}

struct FitResult {
    ChannelModel model;
    // relative residual per input point: (predicted - observed) / observed
    std::vector<double> residuals;
};

// Calibrates (r0, lambda) from measured (distance, rate) points. Two points
// solve the system exactly; three or more go through least squares on
// log(rate).
inline FitResult fit_channel_params(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) throw FitError("fit_channel_params: need at least 2 points");
    for (const auto& [d, r] : points) {
        if (r <= 0.0) throw FitError("fit_channel_params: non-positive rate");
    }
    for (size_t i = 0; i < points.size(); ++i) {
        for (size_t j = i + 1; j < points.size(); ++j) {
            if (points[i].first == points[j].first)
                throw FitError("fit_channel_params: duplicate distances");
        }
    }

    FitResult out;
    if (points.size() == 2) {
        const auto& [d1, r1] = points[0];
        const auto& [d2, r2] = points[1];
        double lambda = std::log(r1 / r2) / (d2 - d1);
        out.model.attenuation_lambda = lambda;
        out.model.base_rate_r0 = r1 * std::exp(d1 * lambda);
    } else {
        // linear regression of ln(rate) on distance
        double n = static_cast<double>(points.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& [d, r] : points) {
            double y = std::log(r);
            sx += d; sy += y; sxx += d * d; sxy += d * y;
        }
        double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        double intercept = (sy - slope * sx) / n;
        out.model.attenuation_lambda = -slope;
        out.model.base_rate_r0 = std::exp(intercept);
    }
    out.residuals.reserve(points.size());
    for (const auto& [d, r] : points) {
        double pred = out.model.base_rate_r0 * std::exp(-out.model.attenuation_lambda * d);
        out.residuals.push_back((pred - r) / r);
    }
    return out;
}

inline bool sustainability_check(double rate_bps, double traffic_bps) {
    return rate_bps > traffic_bps;
}

// Offered traffic plus the per-message MAC-key overhead, in bits/second.
inline double traffic_with_mac_overhead(double payload_bps, uint64_t payload_bits_per_packet,
                                        uint64_t mac_key_bits) {
    if (payload_bits_per_packet == 0) throw InvalidParameter("packet payload must be non-zero");
    return payload_bps *
           (static_cast<double>(payload_bits_per_packet + mac_key_bits) /
            static_cast<double>(payload_bits_per_packet));
}

// ---------------------------------------------------------------------------
// Key buffer
// ---------------------------------------------------------------------------

struct QkdLinkConfig {
    ValidatorId endpoint_a;
    ValidatorId endpoint_b;
    double distance_km = 0.0;
    ChannelModel channel;
    uint64_t buffer_capacity_bits = 0;

    void validate() const {
        if (distance_km < 0.0) throw InvalidParameter("QkdLinkConfig: negative distance");
        if (channel.base_rate_r0 <= 0.0) throw InvalidParameter("QkdLinkConfig: base rate must be > 0");
        if (channel.attenuation_lambda < 0.0)
            throw InvalidParameter("QkdLinkConfig: negative attenuation");
        if (buffer_capacity_bits == 0) throw InvalidParameter("QkdLinkConfig: zero buffer capacity");
    }
};

// A contiguous range of key bits drawn from a link's stream. Once drawn, the
// offset range is never handed out again.
struct KeyBlock {
    uint64_t offset = 0;
    BitVec bits;

    uint64_t length_bits() const { return bits.size_bits(); }
};

inline uint64_t to_microbits_per_second(double rate_bps) {
    if (rate_bps < 0.0) throw InvalidParameter("negative rate");
    return static_cast<uint64_t>(std::llround(rate_bps * 1e6));
}

// Bounded pool of one-time key bits with exact accounting:
//   generated_total = consumed_total + available_bits + overflow_discarded
// at all times, and next_offset always equals consumed_total.
class KeyBuffer {
public:
    KeyBuffer() = default;
    explicit KeyBuffer(uint64_t capacity_bits) : capacity_(capacity_bits) {}

    uint64_t capacity_bits() const { return capacity_; }
    uint64_t available_bits() const { return available_; }
    uint64_t next_offset() const { return next_offset_; }
    uint64_t generated_total() const { return generated_total_; }
    uint64_t consumed_total() const { return consumed_total_; }
    uint64_t overflow_discarded() const { return overflow_discarded_; }

    // Accrues floor(rate * dt) bits, carrying the sub-bit remainder so that
    // consecutive ticks lose nothing. Overflow beyond capacity is counted,
    // not stored.
    void tick_generate(uint64_t rate_microbits_per_s, uint64_t dt_us) {
        accum_ += static_cast<unsigned __int128>(rate_microbits_per_s) * dt_us;
        uint64_t bits = static_cast<uint64_t>(accum_ / kMicroPerBit);
        accum_ %= kMicroPerBit;
        generated_total_ += bits;
        uint64_t space = capacity_ - available_;
        uint64_t added = std::min(bits, space);
        available_ += added;
        overflow_discarded_ += bits - added;
    }

    std::optional<KeyBlock> draw(uint64_t n_bits, const Keystream& stream) {
        if (n_bits == 0) throw InvalidParameter("draw: zero-length key request");
        if (n_bits > available_) return std::nullopt;  // InsufficientKey
        KeyBlock block;
        block.offset = next_offset_;
        block.bits = stream.bits(next_offset_, n_bits);
        available_ -= n_bits;
        consumed_total_ += n_bits;
        next_offset_ += n_bits;
        return block;
    }

    bool conserved() const {
        return generated_total_ == consumed_total_ + available_ + overflow_discarded_ &&
               available_ <= capacity_ && next_offset_ == consumed_total_;
    }

private:
    static constexpr unsigned __int128 kMicroPerBit = 1000000ull * 1000000ull;  // microbit * us per bit

    uint64_t capacity_ = 0;
    uint64_t available_ = 0;
    uint64_t next_offset_ = 0;
    uint64_t generated_total_ = 0;
    uint64_t consumed_total_ = 0;
    uint64_t overflow_discarded_ = 0;
    unsigned __int128 accum_ = 0;
};

// Convenience form of the generation step for callers working in seconds.
inline void tick_generate(KeyBuffer& buffer, double rate_bps, double dt_s) {
    if (dt_s < 0.0) throw InvalidParameter("tick_generate: negative dt");
    buffer.tick_generate(to_microbits_per_second(rate_bps),
                         static_cast<uint64_t>(std::llround(dt_s * 1e6)));
}

// Watches a sequence of consumed offset ranges. Overlaps (key reuse) are
// counted; ranges list is kept only when recording is enabled (tests).
class OffsetLedger {
public:
    void record(uint64_t offset, uint64_t len_bits) {
        if (offset < next_expected_) ++overlap_violations_;
        next_expected_ = std::max(next_expected_, offset + len_bits);
        ++ranges_recorded_;
        bits_recorded_ += len_bits;
        if (keep_ranges_) ranges_.emplace_back(offset, len_bits);
    }

    bool covers(uint64_t offset) const { return offset < next_expected_; }
    uint64_t ranges_recorded() const { return ranges_recorded_; }
    uint64_t bits_recorded() const { return bits_recorded_; }
    uint64_t overlap_violations() const { return overlap_violations_; }
    uint64_t next_expected() const { return next_expected_; }

    void keep_ranges(bool on) { keep_ranges_ = on; }
    const std::vector<std::pair<uint64_t, uint64_t>>& ranges() const { return ranges_; }

private:
    uint64_t next_expected_ = 0;
    uint64_t ranges_recorded_ = 0;
    uint64_t bits_recorded_ = 0;
    uint64_t overlap_violations_ = 0;
    bool keep_ranges_ = false;
    std::vector<std::pair<uint64_t, uint64_t>> ranges_;
};

// ---------------------------------------------------------------------------
// One-time-pad sealing
// ---------------------------------------------------------------------------

struct SealedMessage {
    BitVec ciphertext;
    crypto::PolyMac::Tag mac_tag{};
    uint64_t key_offset = 0;  // pad starts here; MAC key follows the pad
    ValidatorId sender;
    ValidatorId receiver;

    uint64_t key_bits_consumed() const {
        return ciphertext.size_bits() + crypto::PolyMac::kKeyBytes * 8;
    }
};

enum class OpenStatus { Ok, AuthenticationFailure, KeyDesyncError };

struct OpenResult {
    OpenStatus status = OpenStatus::Ok;
    BitVec plaintext;

    bool ok() const { return status == OpenStatus::Ok; }
};

inline constexpr uint64_t kMacKeyBits = crypto::PolyMac::kKeyBytes * 8;  // 256

// Seals `plaintext` with a fresh pad and a fresh MAC key from `buffer`.
// Consumes exactly |plaintext| + 256 bits, or nothing at all on failure.
inline std::optional<SealedMessage> otp_seal(const BitVec& plaintext, KeyBuffer& buffer,
                                             const Keystream& stream, ValidatorId sender,
                                             ValidatorId receiver) {
    uint64_t need = plaintext.size_bits() + kMacKeyBits;
    if (need > buffer.available_bits()) return std::nullopt;  // InsufficientKey

    auto pad = buffer.draw(plaintext.size_bits(), stream);
    auto mac_key = buffer.draw(kMacKeyBits, stream);

    SealedMessage msg;
    msg.ciphertext = plaintext.xor_with(pad->bits);
    msg.mac_tag = crypto::PolyMac::compute(
        std::span<const uint8_t>(mac_key->bits.bytes().data(), crypto::PolyMac::kKeyBytes),
        msg.ciphertext);
    msg.key_offset = pad->offset;
    msg.sender = sender;
    msg.receiver = receiver;
    return msg;
}

// Opens a sealed message with explicit key blocks. The MAC is checked before
// any plaintext is produced.
inline OpenResult otp_open(const SealedMessage& msg, const KeyBlock& pad, const KeyBlock& mac_key) {
    OpenResult res;
    if (pad.offset != msg.key_offset || pad.length_bits() != msg.ciphertext.size_bits() ||
        mac_key.offset != msg.key_offset + pad.length_bits() ||
        mac_key.length_bits() != kMacKeyBits) {
        res.status = OpenStatus::KeyDesyncError;
        return res;
    }
    bool mac_ok = crypto::PolyMac::verify(
        std::span<const uint8_t>(mac_key.bits.bytes().data(), crypto::PolyMac::kKeyBytes),
        msg.ciphertext, msg.mac_tag);
    if (!mac_ok) {
        res.status = OpenStatus::AuthenticationFailure;
        return res;
    }
    res.plaintext = msg.ciphertext.xor_with(pad.bits);
    return res;
}

// ---------------------------------------------------------------------------
// Link: configured channel + buffer + shared key stream
// ---------------------------------------------------------------------------

// A live QKD link in a simulation. Both endpoints see the same stream, so
// the receiver re-derives pad and MAC key from the message's offset; its
// ledger rejects any offset range that was already opened (replays).
class QkdLink {
public:
    QkdLink() = default;

    QkdLink(QkdLinkConfig config, uint64_t scenario_seed, uint64_t generation_start_us = 0)
        : config_(config),
          buffer_(config.buffer_capacity_bits),
          stream_(Keystream::for_link(scenario_seed, config.endpoint_a.value, config.endpoint_b.value)),
          generation_start_us_(generation_start_us),
          last_gen_us_(generation_start_us) {
        config.validate();
        rate_microbits_ = to_microbits_per_second(key_rate(config.distance_km, config.channel));
    }

    const QkdLinkConfig& config() const { return config_; }
    KeyBuffer& buffer() { return buffer_; }
    const KeyBuffer& buffer() const { return buffer_; }
    const Keystream& stream() const { return stream_; }
    double rate_bps() const { return static_cast<double>(rate_microbits_) / 1e6; }

    bool alive() const { return alive_; }
    void set_alive(bool v) { alive_ = v; }

    uint64_t sealed_count() const { return sealed_count_; }
    uint64_t missed_count() const { return missed_count_; }
    const OffsetLedger& draw_ledger() const { return draw_ledger_; }
    OffsetLedger& draw_ledger() { return draw_ledger_; }
    const OffsetLedger& open_ledger() const { return open_ledger_; }

    // Integrates key generation up to `now_us`.
    void advance_generation(uint64_t now_us) {
        if (!alive_ || now_us <= last_gen_us_) return;
        buffer_.tick_generate(rate_microbits_, now_us - last_gen_us_);
        last_gen_us_ = now_us;
    }

    std::optional<SealedMessage> seal(const BitVec& plaintext, ValidatorId sender,
                                      ValidatorId receiver) {
        if (!alive_) {
            ++missed_count_;
            return std::nullopt;
        }
        uint64_t offset_before = buffer_.next_offset();
        auto sealed = otp_seal(plaintext, buffer_, stream_, sender, receiver);
        if (!sealed) {
            ++missed_count_;
            return std::nullopt;
        }
        draw_ledger_.record(offset_before, sealed->key_bits_consumed());
        ++sealed_count_;
        return sealed;
    }

    OpenResult open(const SealedMessage& msg) {
        OpenResult res;
        if (open_ledger_.covers(msg.key_offset)) {
            res.status = OpenStatus::KeyDesyncError;  // replayed / stale offset
            return res;
        }
        KeyBlock pad{msg.key_offset, stream_.bits(msg.key_offset, msg.ciphertext.size_bits())};
        KeyBlock mac_key{msg.key_offset + msg.ciphertext.size_bits(),
                         stream_.bits(msg.key_offset + msg.ciphertext.size_bits(), kMacKeyBits)};
        res = otp_open(msg, pad, mac_key);
        if (res.ok()) open_ledger_.record(msg.key_offset, msg.key_bits_consumed());
        return res;
    }

private:
    QkdLinkConfig config_;
    KeyBuffer buffer_;
    Keystream stream_;
    uint64_t rate_microbits_ = 0;
    uint64_t generation_start_us_ = 0;
    uint64_t last_gen_us_ = 0;
    bool alive_ = true;
    uint64_t sealed_count_ = 0;
    uint64_t missed_count_ = 0;
    OffsetLedger draw_ledger_;
    OffsetLedger open_ledger_;
};

}  // namespace qlink
