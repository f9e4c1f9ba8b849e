// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "qlink/attacks.hpp"
#include "qlink/metrics.hpp"
#include "qlink/scenario.hpp"
#include "qlink/system.hpp"

namespace qlink {

// ---------------------------------------------------------------------------
// Key-rate experiment: one link, packetized traffic against key generation
// ---------------------------------------------------------------------------

inline Metrics run_keyrate_experiment(double distance_km, double duration_s, double traffic_kbps,
                                      const ScenarioConfig& base, EventLog* log = nullptr) {
    if (distance_km < 0.0) throw InvalidParameter("keyrate: negative distance");
    if (duration_s <= 0.0 || traffic_kbps <= 0.0)
        throw InvalidParameter("keyrate: duration and traffic must be positive");

    FitResult fit = fit_channel_params(base.channel.fit_points);
    QkdLinkConfig lc;
    lc.endpoint_a = ValidatorId(1);
    lc.endpoint_b = ValidatorId(2);
    lc.distance_km = distance_km;
    lc.channel = fit.model;
    lc.buffer_capacity_bits = base.channel.buffer_capacity_bits;
    QkdLink link(lc, base.seed, base.channel.generation_start_delay_us);

    const uint64_t payload_bits = base.packet.payload_bits;
    const double traffic_bps = traffic_kbps * 1000.0;
    const uint64_t interval_us =
        static_cast<uint64_t>(std::llround(static_cast<double>(payload_bits) / traffic_bps * 1e6));
    const uint64_t duration_us = static_cast<uint64_t>(std::llround(duration_s * 1e6));

    SplitMix64 payload_rng(derive_seed(base.seed, "keyrate-payload"));
    uint64_t sent = 0, delivered = 0, missed = 0;
    for (uint64_t t = interval_us; t <= duration_us; t += interval_us) {
        link.advance_generation(t);
        BitVec payload(payload_rng.next_bytes(BitVec::byte_len(payload_bits)), payload_bits);
        ++sent;
        auto sealed = link.seal(payload, lc.endpoint_a, lc.endpoint_b);
        if (!sealed) {
            ++missed;
            if (log) log->append(t, "packet_missed", {{"seq", sent}});
        } else {
            OpenResult opened = link.open(*sealed);
            if (!opened.ok() || opened.plaintext != payload)
                throw std::logic_error("keyrate: open failed on the honest path");
            ++delivered;
            if (log)
                log->append(t, "packet",
                            {{"seq", sent},
                             {"key_offset", sealed->key_offset},
                             {"key_bits", sealed->key_bits_consumed()}});
        }
        if (!link.buffer().conserved())
            throw std::logic_error("keyrate: key-buffer conservation violated");
    }
    link.advance_generation(duration_us);

    Metrics m;
    m.experiment = "keyrate";
    m.distance_km = distance_km;
    m.duration_s = duration_s;
    m.traffic_kbps = traffic_kbps;
    m.key_rate_bps = link.rate_bps();
    m.bits_generated = link.buffer().generated_total();
    m.key_bits_consumed_total = link.buffer().consumed_total();
    m.mac_key_bits_consumed = delivered * kMacKeyBits;
    m.bits_consumed = m.key_bits_consumed_total - m.mac_key_bits_consumed;
    m.surplus_ratio =
        m.bits_consumed ? static_cast<double>(m.bits_generated) / m.bits_consumed : 0.0;
    m.packets_sent = sent;
    m.packets_delivered = delivered;
    m.missed_packets = missed;
    m.utilization_pct = sent ? 100.0 * static_cast<double>(delivered) / sent : 0.0;
    m.sustainable = sustainability_check(
        m.key_rate_bps, traffic_with_mac_overhead(traffic_bps, payload_bits, kMacKeyBits));
    if (log) {
        log->append(duration_us, "keyrate_summary",
                    {{"distance_km", distance_km},
                     {"bits_generated", m.bits_generated},
                     {"bits_consumed", m.bits_consumed},
                     {"missed", missed}});
    }
    return m;
}

// ---------------------------------------------------------------------------
// Bridge scenario: lock -> k confirmations -> consensus -> mint -> finality
// ---------------------------------------------------------------------------

struct BridgeRunResult {
    Metrics metrics;
    bool completed = false;
    std::string failure;
    std::optional<FinalityCertificate> certificate;
    std::optional<LockEvent> lock_event;
};

namespace detail {

struct TrafficCounters {
    uint64_t sent = 0;
    uint64_t delivered = 0;
    uint64_t missed = 0;
};

// Every ordered committee pair exchanges one payload per tick (steady
// consensus/proof chatter at the configured rate per directed pair).
inline void traffic_tick(BridgeSystem& sys, std::span<const ValidatorId> ids, uint64_t t,
                         uint64_t payload_bits, SplitMix64& rng, TrafficCounters& counters) {
    for (ValidatorId a : ids) {
        for (ValidatorId b : ids) {
            if (a == b) continue;
            BitVec payload(rng.next_bytes(BitVec::byte_len(payload_bits)), payload_bits);
            ++counters.sent;
            QkdNetwork::SendResult sr = sys.network().send(a, b, payload, t);
            if (sr.delivered) ++counters.delivered; else ++counters.missed;
        }
    }
}

inline bool links_sustainable(const BridgeSystem& sys, double traffic_bps, uint64_t payload_bits,
                              uint32_t streams_per_link) {
    double per_link =
        streams_per_link * traffic_with_mac_overhead(traffic_bps, payload_bits, kMacKeyBits);
    for (const auto& [key, link] : sys.network().links()) {
        if (!sustainability_check(link.rate_bps(), per_link)) return false;
    }
    return true;
}

}  // namespace detail

// Runs the full cross-chain transfer against the system in place. The event
// log carries blocks, verifications, the round trace, the mint and every
// finality-watermark advance; background validator traffic is summarized.
inline BridgeRunResult run_bridge_scenario(BridgeSystem& sys) {
    const ScenarioConfig& cfg = sys.cfg();
    EventLog& log = sys.log();
    BridgeRunResult result;

    const auto& ids = sys.validator_ids();
    SplitMix64 payload_rng(derive_seed(cfg.seed, "bridge-traffic"));
    detail::TrafficCounters traffic;
    const uint64_t tick_us = cfg.packet.interval_us;
    const uint64_t k = cfg.chains.k_confirmations;

    LockEvent lock = sys.source_contract().submit_lock(sys.source_chain(), "alice", 100, "bob");
    result.lock_event = lock;
    log.append(0, "lock_submitted",
               {{"chain", lock.chain_id},
                {"event_id", to_hex(lock.event_id)},
                {"amount", lock.amount},
                {"block_height", lock.block_height}});
    const uint64_t conf_tip = lock.block_height + k - 1;

    enum class Stage { WaitConfirmations, WaitMintInclusion, WaitFinality, Done };
    Stage stage = Stage::WaitConfirmations;

    uint64_t next_tick = tick_us;
    uint64_t next_final_height = 1;
    uint64_t mint_block_height = 0;
    uint64_t mint_time_us = 0;
    uint64_t completion_us = 0;
    uint64_t contract_crypto_us = 0;
    RoundStats round_stats{};
    const uint64_t hard_cap_us = (k + 8) * cfg.chains.source_block_interval_us +
                                 cfg.chains.dest_finality_lag_us + 600'000'000ull;

    auto watermark_due = [&]() -> uint64_t {
        const BlockHeader* h = sys.dest_chain().header_at(next_final_height);
        if (h == nullptr) return UINT64_MAX;
        return h->timestamp_us + cfg.chains.dest_finality_lag_us;
    };

    while (stage != Stage::Done) {
        uint64_t t_wm = watermark_due();
        uint64_t t_src = sys.source_chain().next_block_time_us();
        uint64_t t_dst = sys.dest_chain().next_block_time_us();
        uint64_t t = std::min(std::min(t_wm, next_tick), std::min(t_src, t_dst));
        if (t > hard_cap_us) {
            result.failure = "bridge timeline exceeded the safety cap";
            break;
        }

        if (t == t_wm) {
            const BlockHeader* h = sys.dest_chain().header_at(next_final_height);
            if (!sys.dest_light_client().advance(next_final_height, h->merkle_root))
                throw std::logic_error("bridge: light-client watermark regression");
            log.append(t, "finality_watermark", {{"chain", kDestChainId},
                                                 {"height", next_final_height}});
            if (stage == Stage::WaitFinality && next_final_height >= mint_block_height) {
                completion_us = t;
                stage = Stage::Done;
                result.completed = true;
            }
            ++next_final_height;
            continue;
        }
        if (t == t_src) {
            sys.source_chain().advance_to(t);
            log.append(t, "block_append",
                       {{"chain", kSourceChainId}, {"height", sys.source_chain().tip_height()}});
            if (stage == Stage::WaitConfirmations && sys.source_chain().tip_height() >= conf_tip) {
                // every validator independently verifies the SPV inclusion
                MerkleProof inclusion =
                    sys.source_chain().make_proof(lock.block_height, lock.tx_index);
                bool all_verified = true;
                for (ValidatorId v : ids) {
                    bool ok = verify_lock_event(lock, inclusion, sys.source_chain(), k);
                    all_verified &= ok;
                    log.append(t, "event_verified",
                               {{"validator", v.value}, {"ok", ok},
                                {"confirmations", sys.source_chain().tip_height() -
                                                      lock.block_height + 1}});
                }
                if (!all_verified) {
                    result.failure = "lock event failed local verification";
                    break;
                }
                RoundOutcome round =
                    sys.run_consensus(1, {event_content_digest(lock)}, FaultSpec{}, t);
                if (!round.finalized()) {
                    result.failure = "consensus failed: " + round.failure->diagnosis;
                    break;
                }
                round_stats = round.stats;
                result.certificate = round.certificate;
                uint64_t threshold = sys.registry().quorum_threshold(cfg.quorum_mode);
                contract_crypto_us =
                    threshold * cfg.consensus.verify_cost_us + cfg.consensus.aggregate_cost_us;
                mint_time_us = round.certificate->finalized_at_us + contract_crypto_us;
                MintResult mint = sys.dest_contract().mint(lock, round.certificate->proposal,
                                                           round.certificate->proof);
                if (!mint.ok) {
                    result.failure = std::string("mint rejected: ") + to_string(mint.reason);
                    break;
                }
                log.append(mint_time_us, "mint",
                           {{"chain", kDestChainId},
                            {"event_id", to_hex(lock.event_id)},
                            {"amount", lock.amount},
                            {"minted_total", sys.dest_contract().minted_total()},
                            {"proof_signers", round.certificate->proof.signer_count()}});
                Bytes receipt;
                append_bytes(receipt, "mint-receipt", 12);
                append_bytes(receipt, lock.event_id.data(), lock.event_id.size());
                sys.dest_chain().submit_tx(std::move(receipt));
                stage = Stage::WaitMintInclusion;
            }
            continue;
        }
        if (t == t_dst) {
            sys.dest_chain().advance_to(t);
            if (stage == Stage::WaitMintInclusion && t >= mint_time_us) {
                mint_block_height = sys.dest_chain().tip_height();
                stage = Stage::WaitFinality;
            }
            continue;
        }
        // traffic tick
        detail::traffic_tick(sys, ids, next_tick, cfg.packet.payload_bits, payload_rng, traffic);
        if (next_tick % 600'000'000ull == 0) {
            log.append(next_tick, "traffic_summary",
                       {{"packets_sent", traffic.sent},
                        {"packets_delivered", traffic.delivered},
                        {"packets_missed", traffic.missed},
                        {"key_bits_consumed", sys.network().total_key_bits_consumed()}});
        }
        next_tick += tick_us;
        if (!sys.network().all_buffers_conserved())
            throw std::logic_error("bridge: key-buffer conservation violated");
    }

    uint64_t end_us = std::max(completion_us, log.last_t_us());
    sys.network().advance_generation(end_us);

    Metrics& m = result.metrics;
    m.experiment = "bridge";
    m.distance_km = cfg.link_distance_km;
    m.duration_s = static_cast<double>(end_us) / 1e6;
    m.traffic_kbps = cfg.traffic_kbps;
    uint64_t generated = 0, consumed = 0;
    double min_rate = 0.0;
    bool first = true;
    for (const auto& [key, link] : sys.network().links()) {
        generated += link.buffer().generated_total();
        consumed += link.buffer().consumed_total();
        min_rate = first ? link.rate_bps() : std::min(min_rate, link.rate_bps());
        first = false;
    }
    m.key_rate_bps = min_rate;
    m.bits_generated = generated;
    m.key_bits_consumed_total = consumed;
    m.mac_key_bits_consumed = sys.network().total_sealed() * kMacKeyBits;
    m.bits_consumed = consumed - m.mac_key_bits_consumed;
    m.surplus_ratio =
        m.bits_consumed ? static_cast<double>(m.bits_generated) / m.bits_consumed : 0.0;
    m.packets_sent = traffic.sent;
    m.packets_delivered = traffic.delivered;
    m.missed_packets = traffic.missed;
    m.utilization_pct =
        traffic.sent ? 100.0 * static_cast<double>(traffic.delivered) / traffic.sent : 0.0;
    m.per_round_latency_s = static_cast<double>(round_stats.latency_us) / 1e6;
    m.crypto_overhead_s =
        static_cast<double>(round_stats.crypto_time_us + contract_crypto_us) / 1e6;
    m.per_signature_cost_s = static_cast<double>(cfg.consensus.sign_cost_us) / 1e6;
    m.end_to_end_latency_s = static_cast<double>(completion_us) / 1e6;
    m.proof_bundle_bytes =
        result.certificate ? serialize_proof(result.certificate->proof).size() : 0;
    // dual condition over the run: key rate above demand on every link, and
    // the finalized proof at or above the threshold
    m.sustainable = detail::links_sustainable(sys, cfg.traffic_bps(), cfg.packet.payload_bits, 2) &&
                    result.certificate &&
                    result.certificate->proof.signer_count() >=
                        sys.registry().quorum_threshold(cfg.quorum_mode);
    m.rounds_finalized = result.completed ? 1 : 0;
    m.rounds_failed = result.completed ? 0 : 1;
    if (result.completed) {
        log.append(end_us, "bridge_complete",
                   {{"end_to_end_s", m.end_to_end_latency_s},
                    {"crypto_overhead_s", m.crypto_overhead_s},
                    {"proof_bundle_bytes", m.proof_bundle_bytes}});
    }
    return result;
}

inline BridgeRunResult run_bridge_scenario(const ScenarioConfig& cfg) {
    BridgeSystem sys(cfg);
    return run_bridge_scenario(sys);
}

// ---------------------------------------------------------------------------
// Committee experiment: n validators, per-pair traffic, periodic consensus
// ---------------------------------------------------------------------------

// Per-link metrics plus one aggregate entry (experiment "committee-nN").
// Per-validator outbound traffic scales with (n-1) streams; each link carries
// two directed streams plus its share of consensus messages.
inline std::vector<Metrics> run_committee_experiment(BridgeSystem& sys) {
    const ScenarioConfig& cfg = sys.cfg();
    const uint32_t n = cfg.committee_n;
    const auto& ids = sys.validator_ids();
    SplitMix64 payload_rng(derive_seed(cfg.seed, "committee-traffic"));
    detail::TrafficCounters traffic;
    const uint64_t duration_us = cfg.duration_us();
    const uint64_t tick_us = cfg.packet.interval_us;
    const uint64_t round_interval_us = static_cast<uint64_t>(std::llround(cfg.round_interval_s * 1e6));

    uint64_t rounds_finalized = 0, rounds_failed = 0, height = 0;
    uint64_t latency_total_us = 0;
    uint64_t next_round = round_interval_us;
    uint64_t next_tick = tick_us;
    while (next_tick <= duration_us || next_round <= duration_us) {
        if (next_round <= duration_us && next_round <= next_tick) {
            ++height;
            Hash256 heartbeat = crypto::sha256("heartbeat-" + std::to_string(height));
            RoundOutcome round = sys.run_consensus(height, {heartbeat}, FaultSpec{}, next_round);
            if (round.finalized()) {
                ++rounds_finalized;
                latency_total_us += round.stats.latency_us;
            } else {
                ++rounds_failed;
            }
            next_round += round_interval_us;
            continue;
        }
        if (next_tick <= duration_us) {
            detail::traffic_tick(sys, ids, next_tick, cfg.packet.payload_bits, payload_rng, traffic);
            next_tick += tick_us;
        } else {
            next_round += round_interval_us;
        }
    }
    sys.network().advance_generation(duration_us);
    if (!sys.network().all_buffers_conserved())
        throw std::logic_error("committee: key-buffer conservation violated");

    std::vector<Metrics> out;
    Metrics agg;
    agg.experiment = "committee-n" + std::to_string(n);
    agg.distance_km = cfg.link_distance_km;
    agg.duration_s = cfg.duration_s;
    agg.traffic_kbps = cfg.traffic_kbps * (n - 1);  // per-validator outbound demand
    agg.rounds_finalized = rounds_finalized;
    agg.rounds_failed = rounds_failed;
    agg.per_round_latency_s =
        rounds_finalized ? static_cast<double>(latency_total_us) / rounds_finalized / 1e6 : 0.0;
    agg.per_signature_cost_s = static_cast<double>(cfg.consensus.sign_cost_us) / 1e6;
    agg.packets_sent = traffic.sent;
    agg.packets_delivered = traffic.delivered;
    agg.missed_packets = traffic.missed;
    agg.utilization_pct =
        traffic.sent ? 100.0 * static_cast<double>(traffic.delivered) / traffic.sent : 0.0;
    bool all_sustainable = true;
    uint64_t generated = 0, consumed = 0, sealed = 0;

    for (const auto& [key, link] : sys.network().links()) {
        Metrics lm;
        lm.experiment = "committee-n" + std::to_string(n) + "-link-" + std::to_string(key.first) +
                        "-" + std::to_string(key.second);
        lm.distance_km = link.config().distance_km;
        lm.duration_s = cfg.duration_s;
        lm.traffic_kbps = cfg.traffic_kbps * 2;  // two directed streams per link
        lm.key_rate_bps = link.rate_bps();
        lm.bits_generated = link.buffer().generated_total();
        lm.key_bits_consumed_total = link.buffer().consumed_total();
        lm.mac_key_bits_consumed = link.sealed_count() * kMacKeyBits;
        lm.bits_consumed = lm.key_bits_consumed_total - lm.mac_key_bits_consumed;
        lm.surplus_ratio =
            lm.bits_consumed ? static_cast<double>(lm.bits_generated) / lm.bits_consumed : 0.0;
        lm.packets_sent = link.sealed_count() + link.missed_count();
        lm.packets_delivered = link.sealed_count();
        lm.missed_packets = link.missed_count();
        lm.utilization_pct = lm.packets_sent ? 100.0 * static_cast<double>(lm.packets_delivered) /
                                                   lm.packets_sent
                                             : 0.0;
        lm.sustainable = sustainability_check(
            lm.key_rate_bps,
            2 * traffic_with_mac_overhead(cfg.traffic_bps(), cfg.packet.payload_bits, kMacKeyBits));
        all_sustainable &= lm.sustainable;
        generated += lm.bits_generated;
        consumed += lm.key_bits_consumed_total;
        sealed += link.sealed_count();
        out.push_back(std::move(lm));
    }
    agg.bits_generated = generated;
    agg.key_bits_consumed_total = consumed;
    agg.mac_key_bits_consumed = sealed * kMacKeyBits;
    agg.bits_consumed = consumed - agg.mac_key_bits_consumed;
    agg.surplus_ratio =
        agg.bits_consumed ? static_cast<double>(agg.bits_generated) / agg.bits_consumed : 0.0;
    agg.sustainable = all_sustainable;
    out.insert(out.begin(), std::move(agg));

    sys.log().append(duration_us, "committee_summary",
                     {{"n", n},
                      {"rounds_finalized", rounds_finalized},
                      {"rounds_failed", rounds_failed},
                      {"links", sys.network().links().size()}});
    return out;
}

// ---------------------------------------------------------------------------
// Attack suite
// ---------------------------------------------------------------------------

struct AttackSuiteResult {
    std::vector<AttackOutcome> outcomes;
    bool all_defended = true;
};

// Runs every configured scenario kind (all seven by default) against a fresh
// system each. The DoS script gets a redundant-hub topology when the base
// config does not already provide one.
inline AttackSuiteResult run_attack_suite(const ScenarioConfig& cfg, EventLog* log = nullptr) {
    AttackSuiteResult res;
    std::vector<std::string> kinds = cfg.attacks;
    if (kinds.empty()) {
        for (AttackKind k : kAllAttackKinds) kinds.push_back(to_string(k));
    }
    for (const std::string& name : kinds) {
        AttackKind kind = attack_kind_from_string(name);
        ScenarioConfig attack_cfg = cfg;
        if (kind == AttackKind::QkdDos && attack_cfg.topology != "hub_spoke") {
            attack_cfg.topology = "hub_spoke";
            attack_cfg.hub_count = 2;
            attack_cfg.committee_n = std::max(attack_cfg.committee_n, 5u);
            attack_cfg.links.clear();
        }
        BridgeSystem sys(attack_cfg);
        AttackScenario scenario;
        scenario.kind = kind;
        scenario.seed = cfg.seed;
        scenario.research_mode = cfg.research_mode;
        AttackOutcome outcome = run_attack(scenario, sys);
        if (!outcome.defended && !outcome.expected_breach) res.all_defended = false;
        if (log) {
            log->append(log->last_t_us(), "attack_outcome",
                        {{"scenario", to_string(outcome.kind)},
                         {"defended", outcome.defended},
                         {"expected_breach", outcome.expected_breach},
                         {"mechanism", outcome.mechanism},
                         {"detail", outcome.detail}});
        }
        res.outcomes.push_back(std::move(outcome));
    }
    return res;
}

}  // namespace qlink
