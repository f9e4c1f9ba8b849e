// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "qlink/chain.hpp"
#include "qlink/consensus.hpp"
#include "qlink/event_log.hpp"
#include "qlink/network.hpp"
#include "qlink/pqc.hpp"
#include "qlink/registry.hpp"
#include "qlink/scenario.hpp"

namespace qlink {

inline constexpr const char* kSourceChainId = "btc-sim";
inline constexpr const char* kDestChainId = "eth-sim";

// Everything one simulation owns: committee, enclave, QKD plane, both chains
// and their bridge contracts. State is reachable only through this context;
// independent simulations can run in parallel without sharing anything.
class BridgeSystem {
public:
    explicit BridgeSystem(const ScenarioConfig& cfg)
        : cfg_(cfg),
          channel_(fit_channel_params(cfg.channel.fit_points).model),
          enclave_(cfg.scheme, derive_seed(cfg.seed, "enclave")),
          source_chain_(kSourceChainId, cfg.chains.source_block_interval_us),
          dest_chain_(kDestChainId, cfg.chains.dest_block_interval_us) {
        cfg_.validate();
        build_committee();
        build_links();
        source_contract_ =
            BridgeContract(kSourceChainId, &registry_, cfg_.quorum_mode, &enclave_.provider());
        dest_contract_ =
            BridgeContract(kDestChainId, &registry_, cfg_.quorum_mode, &enclave_.provider());
    }

    const ScenarioConfig& cfg() const { return cfg_; }
    const ChannelModel& channel() const { return channel_; }
    HsmEnclave& enclave() { return enclave_; }
    Registry& registry() { return registry_; }
    const Registry& registry() const { return registry_; }
    QkdNetwork& network() { return network_; }
    SimChain& source_chain() { return source_chain_; }
    SimChain& dest_chain() { return dest_chain_; }
    BridgeContract& source_contract() { return source_contract_; }
    BridgeContract& dest_contract() { return dest_contract_; }
    LightClientState& dest_light_client() { return dest_light_client_; }
    EventLog& log() { return log_; }
    const std::map<ValidatorId, KeyHandle>& handles() const { return handles_; }
    const std::vector<ValidatorId>& validator_ids() const { return validator_ids_; }
    std::vector<ValidatorId> hub_ids() const { return network_.hubs(); }

    double link_rate_bps(ValidatorId a, ValidatorId b) const {
        const QkdLink* l = network_.link_between(a, b);
        return l ? l->rate_bps() : 0.0;
    }

    // Pre-fills key buffers, for scenarios that start consensus immediately.
    void warm_buffers(uint64_t until_us) { network_.advance_generation(until_us); }

    // One consensus height over the QKD plane, with the round trace appended
    // to the event log at completion time.
    RoundOutcome run_consensus(uint64_t height, const std::vector<Hash256>& events,
                               const FaultSpec& faults, uint64_t start_us,
                               std::function<bool(ValidatorId, const Hash256&)> event_verified =
                                   nullptr) {
        RoundContext ctx;
        ctx.registry = &registry_;
        ctx.enclave = &enclave_;
        ctx.network = &network_;
        ctx.handles = &handles_;
        ctx.mode = cfg_.quorum_mode;
        ctx.leader_seed = derive_seed(cfg_.seed, "leader");
        ctx.event_verified = event_verified
                                 ? std::move(event_verified)
                                 : [](ValidatorId, const Hash256&) { return true; };
        RoundOutcome outcome = run_round(height, events, faults, cfg_.consensus, ctx, start_us);
        log_round_trace(height, outcome, start_us);
        return outcome;
    }

    // Detects equivocation in a finished round and applies slashing evidence.
    std::vector<MisbehaviorEvidence> slash_equivocators(const RoundOutcome& outcome,
                                                        uint64_t at_us) {
        std::vector<MisbehaviorEvidence> applied;
        for (MisbehaviorEvidence& ev :
             detect_equivocation(std::span<const Vote>(outcome.signed_votes))) {
            EvidenceResult res = registry_.handle_evidence(ev, enclave_.provider());
            if (res.applied) {
                log_.append(at_us, "slashing",
                            {{"accused", ev.accused.value},
                             {"kind", to_string(ev.kind)},
                             {"new_status", to_string(res.new_status)}});
                applied.push_back(std::move(ev));
            }
        }
        return applied;
    }

private:
    void build_committee() {
        std::set<std::string> allowlist;
        bool hub_spoke = (cfg_.topology == "hub_spoke");
        for (uint32_t i = 1; i <= cfg_.committee_n; ++i) {
            ValidatorId id(i);
            auto [handle, pk] = enclave_.keygen(id);
            handles_.emplace(id, handle);
            ValidatorRecord rec;
            rec.id = id;
            rec.public_key = std::move(pk);
            rec.weight = 1;
            if (hub_spoke) {
                rec.role = (i <= cfg_.hub_count) ? Role::QkdHub : Role::Consumer;
            } else {
                rec.role = Role::QkdEndpoint;
            }
            if (rec.role != Role::Consumer) {
                rec.certificate = "hw-cert-" + std::to_string(i);
                allowlist.insert(*rec.certificate);
            }
            registry_.set_certificate_allowlist(allowlist);
            registry_.register_validator(rec);
            validator_ids_.push_back(id);
        }
    }

    void build_links() {
        uint64_t start = cfg_.channel.generation_start_delay_us;
        auto add = [&](ValidatorId a, ValidatorId b, double distance) {
            QkdLinkConfig lc;
            lc.endpoint_a = a;
            lc.endpoint_b = b;
            lc.distance_km = distance;
            lc.channel = channel_;
            lc.buffer_capacity_bits = cfg_.channel.buffer_capacity_bits;
            network_.add_link(lc, cfg_.seed, start);
        };
        if (!cfg_.links.empty()) {
            for (const LinkSpec& l : cfg_.links) add(ValidatorId(l.a), ValidatorId(l.b), l.distance_km);
        } else if (cfg_.topology == "hub_spoke") {
            for (uint32_t h = 1; h <= cfg_.hub_count; ++h) {
                for (uint32_t v = 1; v <= cfg_.committee_n; ++v) {
                    if (v == h || (v < h && v <= cfg_.hub_count)) continue;  // pair once
                    add(ValidatorId(h), ValidatorId(v), cfg_.link_distance_km);
                }
            }
        } else {
            for (uint32_t i = 1; i <= cfg_.committee_n; ++i)
                for (uint32_t j = i + 1; j <= cfg_.committee_n; ++j)
                    add(ValidatorId(i), ValidatorId(j), cfg_.link_distance_km);
        }
        if (cfg_.topology == "hub_spoke") {
            for (uint32_t h = 1; h <= cfg_.hub_count; ++h) network_.add_hub(ValidatorId(h));
        }
    }

    void log_round_trace(uint64_t height, const RoundOutcome& outcome, uint64_t start_us) {
        uint64_t stamp = outcome.finalized()
                             ? outcome.certificate->finalized_at_us
                             : start_us + static_cast<uint64_t>(cfg_.consensus.max_rounds) *
                                              cfg_.consensus.phase_timeout_us;
        for (const Vote& v : outcome.signed_votes) {
            log_.append(stamp, "vote",
                        {{"phase", to_string(v.phase)},
                         {"height", v.height},
                         {"round", v.round},
                         {"signer", v.signer.value},
                         {"digest", to_hex(v.proposal_digest)}});
        }
        if (outcome.finalized()) {
            std::vector<uint64_t> signers;
            for (const auto& [id, s] : outcome.certificate->proof.signatures)
                signers.push_back(id.value);
            log_.append(stamp, "certificate",
                        {{"height", height},
                         {"round", outcome.certificate->proposal.round},
                         {"digest", to_hex(outcome.certificate->proposal.digest)},
                         {"signers", signers},
                         {"latency_us", outcome.stats.latency_us}});
        } else {
            log_.append(stamp, "round_failure",
                        {{"height", height},
                         {"rounds_attempted", outcome.failure->rounds_attempted},
                         {"diagnosis", outcome.failure->diagnosis}});
        }
    }

    ScenarioConfig cfg_;
    ChannelModel channel_;
    HsmEnclave enclave_;
    Registry registry_;
    std::map<ValidatorId, KeyHandle> handles_;
    std::vector<ValidatorId> validator_ids_;
    QkdNetwork network_;
    SimChain source_chain_;
    SimChain dest_chain_;
    BridgeContract source_contract_;
    BridgeContract dest_contract_;
    LightClientState dest_light_client_;
    EventLog log_;
};

}  // namespace qlink
