// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qlink/network.hpp"
#include "qlink/pqc.hpp"
#include "qlink/registry.hpp"
#include "qlink/rng.hpp"
#include "qlink/vote.hpp"

namespace qlink {

// ---------------------------------------------------------------------------
// Leader selection
// ---------------------------------------------------------------------------

// Round-robin over a per-height seeded permutation of the active set.
inline ValidatorId select_leader(uint64_t height, uint32_t round,
                                 std::span<const ValidatorId> active_sorted, uint64_t seed) {
    if (active_sorted.empty()) throw EmptyRegistry("select_leader: empty active set");
    std::vector<ValidatorId> perm(active_sorted.begin(), active_sorted.end());
    std::sort(perm.begin(), perm.end());
    SplitMix64 rng(derive_seed(seed, "leader-permutation", height));
    rng.shuffle(perm);
    return perm[round % perm.size()];
}

// ---------------------------------------------------------------------------
// Voting
// ---------------------------------------------------------------------------

enum class CastVoteStatus { Ok, AuthorizationDenied, NoLocalVerification };

struct CastVoteResult {
    CastVoteStatus status = CastVoteStatus::Ok;
    Vote vote;

    bool ok() const { return status == CastVoteStatus::Ok; }
};

// Signs a vote through the enclave. Honest callers set `events_verified`
// only after independently checking every event in the proposal.
inline CastVoteResult cast_vote(ValidatorId validator, Phase phase, const Proposal& proposal,
                                HsmEnclave& enclave, const KeyHandle& handle,
                                const Registry& registry, bool events_verified) {
    CastVoteResult res;
    if (!events_verified) {
        res.status = CastVoteStatus::NoLocalVerification;
        return res;
    }
    Bytes preimage = vote_preimage(phase, proposal.height, proposal.round, proposal.digest);
    SigningContext ctx{proposal.height, proposal.round, static_cast<uint8_t>(phase)};
    SignResult sig = enclave.sign(
        handle, std::span<const uint8_t>(preimage),
        [&](ValidatorId owner) { return registry.is_active(owner); }, ctx);
    if (!sig.ok()) {
        res.status = CastVoteStatus::AuthorizationDenied;
        return res;
    }
    res.vote = Vote{phase, proposal.height, proposal.round, proposal.digest, validator,
                    std::move(sig.signature)};
    return res;
}

// ---------------------------------------------------------------------------
// Equivocation detection
// ---------------------------------------------------------------------------

// One DOUBLE_SIGN evidence per (signer, height, round, phase) that carries
// two or more distinct digests.
inline std::vector<MisbehaviorEvidence> detect_equivocation(std::span<const Vote> signing_log) {
    struct GroupKey {
        uint64_t signer;
        uint64_t height;
        uint32_t round;
        uint8_t phase;
        auto operator<=>(const GroupKey&) const = default;
    };
    std::map<GroupKey, std::vector<const Vote*>> groups;
    for (const Vote& v : signing_log) {
        groups[{v.signer.value, v.height, v.round, static_cast<uint8_t>(v.phase)}].push_back(&v);
    }
    std::vector<MisbehaviorEvidence> out;
    for (const auto& [key, votes] : groups) {
        const Vote* first = votes.front();
        const Vote* conflicting = nullptr;
        for (const Vote* v : votes) {
            if (v->proposal_digest != first->proposal_digest) {
                conflicting = v;
                break;
            }
        }
        if (conflicting == nullptr) continue;
        MisbehaviorEvidence ev;
        ev.kind = EvidenceKind::DoubleSign;
        ev.accused = first->signer;
        ev.double_sign = DoubleSignPayload{*first, *conflicting};
        out.push_back(std::move(ev));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Finality check
// ---------------------------------------------------------------------------

struct FinalizeResult {
    std::optional<AggregatedProof> proof;
    Hash256 digest{};
    std::string reject_reason;

    bool ok() const { return proof.has_value(); }
};

// Aggregates precommit votes into a finality proof when some single digest
// reaches a distinct-signer quorum. Duplicate votes per signer collapse;
// quorum across different digests does not count.
inline FinalizeResult finalize_check(std::span<const Vote> votes, const Registry& registry,
                                     uint64_t threshold, QuorumMode mode,
                                     const SignatureProvider& provider) {
    FinalizeResult res;
    if (votes.empty()) {
        res.reject_reason = "no precommit votes";
        return res;
    }
    uint64_t height = votes.front().height;
    uint32_t round = votes.front().round;
    std::map<Hash256, std::vector<const Vote*>> by_digest;
    for (const Vote& v : votes) {
        if (v.phase != Phase::Precommit || v.height != height || v.round != round) continue;
        by_digest[v.proposal_digest].push_back(&v);
    }
    size_t best = 0;
    for (const auto& [digest, group] : by_digest) {
        std::vector<Signature> sigs;
        std::set<ValidatorId> seen;
        for (const Vote* v : group) {
            if (seen.insert(v->signer).second) sigs.push_back(v->signature);
        }
        best = std::max(best, seen.size());
        Bytes message = vote_preimage(Phase::Precommit, height, round, digest);
        AggregatedProof proof =
            aggregate_proof(std::span<const uint8_t>(message), std::span<const Signature>(sigs));
        AggVerifyResult v = verify_aggregate(proof, std::span<const uint8_t>(message), registry,
                                             threshold, mode, provider);
        if (v.ok) {
            res.proof = std::move(proof);
            res.digest = digest;
            return res;
        }
    }
    res.reject_reason = "no single digest reaches the quorum threshold (best " +
                        std::to_string(best) + " of " + std::to_string(threshold) + ")";
    return res;
}

// ---------------------------------------------------------------------------
// Round execution
// ---------------------------------------------------------------------------

enum class FaultKind { Honest, Silent, Equivocate, ConflictingVote };

inline const char* to_string(FaultKind f) {
    switch (f) {
        case FaultKind::Honest: return "honest";
        case FaultKind::Silent: return "silent";
        case FaultKind::Equivocate: return "equivocate";
        case FaultKind::ConflictingVote: return "conflicting_vote";
    }
    return "unknown";
}

struct FaultSpec {
    std::map<ValidatorId, FaultKind> assignments;

    FaultKind of(ValidatorId v) const {
        auto it = assignments.find(v);
        return it == assignments.end() ? FaultKind::Honest : it->second;
    }

    size_t faulty_count() const {
        size_t n = 0;
        for (const auto& [id, f] : assignments) n += (f != FaultKind::Honest);
        return n;
    }
};

struct ConsensusConfig {
    uint64_t phase_slot_us = 500'000;       // fault-free phase duration (slot barrier)
    uint64_t phase_timeout_us = 1'000'000;  // failed phase duration before view change
    uint32_t max_rounds = 8;
    uint64_t link_delay_us = 5'000;
    uint64_t sign_cost_us = 10'000;
    uint64_t verify_cost_us = 500;
    uint64_t seal_cost_us = 50;
    uint64_t aggregate_cost_us = 1'000;
};

struct FinalityCertificate {
    Proposal proposal;
    AggregatedProof proof;
    uint64_t finalized_at_us = 0;
};

enum class RoundFailureKind { LivenessLost, NoActiveValidators };

struct RoundFailure {
    RoundFailureKind kind = RoundFailureKind::LivenessLost;
    uint32_t rounds_attempted = 0;
    std::string diagnosis;
};

struct RoundStats {
    uint64_t messages_sent = 0;
    uint64_t messages_missed = 0;
    uint64_t message_payload_bits = 0;
    uint64_t key_bits_consumed = 0;
    uint64_t signatures_made = 0;
    uint64_t crypto_time_us = 0;  // critical-path signing/sealing/verification
    uint64_t latency_us = 0;      // start of the successful round to finality
    uint32_t rounds_used = 0;
};

struct RoundOutcome {
    std::optional<FinalityCertificate> certificate;
    std::optional<RoundFailure> failure;
    RoundStats stats;
    // every vote signed during the height, including equivocations
    std::vector<Vote> signed_votes;

    bool finalized() const { return certificate.has_value(); }
};

struct RoundContext {
    Registry* registry = nullptr;
    HsmEnclave* enclave = nullptr;
    QkdNetwork* network = nullptr;
    const std::map<ValidatorId, KeyHandle>* handles = nullptr;
    QuorumMode mode = QuorumMode::Count2f1;
    uint64_t leader_seed = 0;
    // per-validator local verification of bundle digests
    std::function<bool(ValidatorId, const Hash256&)> event_verified;
};

namespace detail {

inline Hash256 fabricated_digest(uint64_t seed, uint64_t height, uint32_t round, ValidatorId v,
                                 uint32_t salt) {
    crypto::Sha256 h;
    h.update("fabricated-digest");
    h.update_u64(seed);
    h.update_u64(height);
    h.update_u32(round);
    h.update_u64(v.value);
    h.update_u32(salt);
    return h.finalize();
}

}  // namespace detail

// Runs one consensus height: propose -> PREVOTE -> PRECOMMIT with view
// changes on timeout, every message OTP-sealed over the QKD plane. Honest
// validators prevote only locally verified bundles and never precommit two
// digests at one height. Returns a certificate or a liveness diagnosis;
// failures are values, not exceptions.
inline RoundOutcome run_round(uint64_t height, const std::vector<Hash256>& events,
                              const FaultSpec& faults, const ConsensusConfig& cfg,
                              RoundContext& ctx, uint64_t start_us) {
    RoundOutcome out;
    Registry& registry = *ctx.registry;
    std::vector<ValidatorId> active = registry.active_ids();
    if (active.empty()) {
        out.failure = RoundFailure{RoundFailureKind::NoActiveValidators, 0, "no active validators"};
        return out;
    }
    if (events.empty()) throw InvalidParameter("run_round: empty event bundle");
    uint64_t threshold = registry.quorum_threshold(ctx.mode);
    // honest validators never precommit two digests at one height
    std::map<uint64_t, Hash256> height_locks;

    auto verified = [&](ValidatorId v, const Proposal& p) {
        for (const Hash256& d : p.event_digests) {
            if (!ctx.event_verified || !ctx.event_verified(v, d)) return false;
        }
        return true;
    };

    auto sign_proposal = [&](ValidatorId leader, const Proposal& p) {
        Bytes pre = proposal_preimage(p.height, p.round, p.leader, p.event_digests);
        SigningContext sctx{p.height, p.round, 0};
        return ctx.enclave->sign(
            ctx.handles->at(leader), std::span<const uint8_t>(pre),
            [&](ValidatorId owner) { return registry.is_active(owner); }, sctx);
    };

    // Unicast helper: seals over the QKD plane and accounts for the attempt.
    auto send_bits = [&](ValidatorId from, ValidatorId to, const Bytes& payload,
                         uint64_t at_us) -> bool {
        BitVec bits = BitVec::from_bytes(std::span<const uint8_t>(payload));
        QkdNetwork::SendResult sr = ctx.network->send(from, to, bits, at_us);
        if (!sr.delivered) {
            ++out.stats.messages_missed;
            return false;
        }
        ++out.stats.messages_sent;
        out.stats.message_payload_bits += bits.size_bits();
        out.stats.key_bits_consumed += sr.key_bits_consumed;
        return true;
    };

    uint64_t now = start_us;
    for (uint32_t round = 0; round < cfg.max_rounds; ++round) {
        ValidatorId leader = select_leader(height, round, active, ctx.leader_seed);
        FaultKind leader_fault = faults.of(leader);
        uint64_t round_start = now;

        // ---- propose ----
        std::map<ValidatorId, Proposal> proposal_seen;
        std::map<Hash256, Proposal> proposals_by_digest;
        bool any_proposal = false;
        if (leader_fault != FaultKind::Silent) {
            Proposal main;
            if (leader_fault == FaultKind::ConflictingVote) {
                // well-formed bundle over an event nobody can verify locally
                main = make_proposal(height, round, leader,
                                     {detail::fabricated_digest(ctx.leader_seed, height, round,
                                                                leader, 0xBAD)});
            } else {
                main = make_proposal(height, round, leader, events);
            }
            std::optional<Proposal> alt;
            if (leader_fault == FaultKind::Equivocate) {
                alt = make_proposal(height, round, leader,
                                    {detail::fabricated_digest(ctx.leader_seed, height, round,
                                                               leader, 1)});
            }
            SignResult main_sig = sign_proposal(leader, main);
            if (main_sig.ok()) {
                ++out.stats.signatures_made;
                if (alt) {
                    SignResult alt_sig = sign_proposal(leader, *alt);
                    if (alt_sig.ok()) ++out.stats.signatures_made;
                }
                uint64_t send_at = round_start + cfg.sign_cost_us + cfg.seal_cost_us;
                size_t idx = 0;
                for (ValidatorId v : active) {
                    if (v == leader) continue;
                    const Proposal& chosen = (alt && idx % 2 == 1) ? *alt : main;
                    Bytes payload = proposal_preimage(chosen.height, chosen.round, chosen.leader,
                                                      chosen.event_digests);
                    append_bytes(payload, main_sig.signature.bytes.data(),
                                 main_sig.signature.bytes.size());
                    if (send_bits(leader, v, payload, send_at)) {
                        proposal_seen[v] = chosen;
                        proposals_by_digest[chosen.digest] = chosen;
                        any_proposal = true;
                    }
                    ++idx;
                }
                proposal_seen[leader] = main;
                proposals_by_digest[main.digest] = main;
                any_proposal = true;
            }
        }
        if (!any_proposal) {
            now = round_start + cfg.phase_timeout_us;  // view change
            continue;
        }

        // ---- prevote ----
        uint64_t prevote_start = round_start + cfg.phase_slot_us;
        std::map<ValidatorId, std::vector<Vote>> prevotes_seen;
        auto broadcast_vote = [&](ValidatorId from, const Vote& vote, uint64_t at_us,
                                  std::map<ValidatorId, std::vector<Vote>>& inboxes,
                                  bool split_half, bool first_half) {
            out.signed_votes.push_back(vote);
            size_t idx = 0;
            for (ValidatorId v : active) {
                if (v == from) continue;
                bool in_first_half = (idx % 2 == 0);
                ++idx;
                if (split_half && in_first_half != first_half) continue;
                Bytes payload = vote_preimage(vote);
                append_bytes(payload, vote.signature.bytes.data(), vote.signature.bytes.size());
                if (send_bits(from, v, payload, at_us)) inboxes[v].push_back(vote);
            }
            inboxes[from].push_back(vote);  // own vote always counts locally
        };

        auto make_vote = [&](ValidatorId v, Phase phase, const Proposal& p) -> std::optional<Vote> {
            CastVoteResult r = cast_vote(v, phase, p, *ctx.enclave, ctx.handles->at(v), registry,
                                         verified(v, p));
            if (!r.ok()) return std::nullopt;
            ++out.stats.signatures_made;
            return r.vote;
        };
        auto make_vote_digest = [&](ValidatorId v, Phase phase, uint32_t r, const Hash256& digest)
            -> std::optional<Vote> {
            // Byzantine path: sign an arbitrary digest directly
            Bytes pre = vote_preimage(phase, height, r, digest);
            SigningContext sctx{height, r, static_cast<uint8_t>(phase)};
            SignResult sig = ctx.enclave->sign(
                ctx.handles->at(v), std::span<const uint8_t>(pre),
                [&](ValidatorId owner) { return registry.is_active(owner); }, sctx);
            if (!sig.ok()) return std::nullopt;
            ++out.stats.signatures_made;
            return Vote{phase, height, r, digest, v, std::move(sig.signature)};
        };

        uint64_t vote_send_at = prevote_start + cfg.sign_cost_us + cfg.seal_cost_us;
        for (ValidatorId v : active) {
            FaultKind fault = faults.of(v);
            if (fault == FaultKind::Silent) continue;
            auto it = proposal_seen.find(v);
            if (fault == FaultKind::Honest) {
                if (it == proposal_seen.end()) continue;
                if (auto vote = make_vote(v, Phase::Prevote, it->second))
                    broadcast_vote(v, *vote, vote_send_at, prevotes_seen, false, false);
            } else if (fault == FaultKind::ConflictingVote) {
                Hash256 d = detail::fabricated_digest(ctx.leader_seed, height, round, v, 2);
                if (auto vote = make_vote_digest(v, Phase::Prevote, round, d))
                    broadcast_vote(v, *vote, vote_send_at, prevotes_seen, false, false);
            } else {  // Equivocate: real digest to one half, fabricated to the other
                Hash256 real = (it != proposal_seen.end())
                                   ? it->second.digest
                                   : detail::fabricated_digest(ctx.leader_seed, height, round, v, 3);
                Hash256 fake = detail::fabricated_digest(ctx.leader_seed, height, round, v, 4);
                if (auto vote = make_vote_digest(v, Phase::Prevote, round, real))
                    broadcast_vote(v, *vote, vote_send_at, prevotes_seen, true, true);
                if (auto vote = make_vote_digest(v, Phase::Prevote, round, fake))
                    broadcast_vote(v, *vote, vote_send_at, prevotes_seen, true, false);
            }
        }

        // ---- precommit ----
        uint64_t precommit_start = prevote_start + cfg.phase_slot_us;
        uint64_t precommit_send_at = precommit_start + cfg.sign_cost_us + cfg.seal_cost_us;
        std::map<ValidatorId, std::vector<Vote>> precommits_seen;
        bool any_precommit = false;
        for (ValidatorId v : active) {
            FaultKind fault = faults.of(v);
            if (fault == FaultKind::Silent) continue;
            if (fault == FaultKind::ConflictingVote) {
                Hash256 d = detail::fabricated_digest(ctx.leader_seed, height, round, v, 5);
                if (auto vote = make_vote_digest(v, Phase::Precommit, round, d)) {
                    broadcast_vote(v, *vote, precommit_send_at, precommits_seen, false, false);
                    any_precommit = true;
                }
                continue;
            }
            if (fault == FaultKind::Equivocate) {
                Hash256 a = detail::fabricated_digest(ctx.leader_seed, height, round, v, 6);
                Hash256 b = detail::fabricated_digest(ctx.leader_seed, height, round, v, 7);
                auto it = proposal_seen.find(v);
                if (it != proposal_seen.end()) a = it->second.digest;
                if (auto vote = make_vote_digest(v, Phase::Precommit, round, a))
                    broadcast_vote(v, *vote, precommit_send_at, precommits_seen, true, true);
                if (auto vote = make_vote_digest(v, Phase::Precommit, round, b))
                    broadcast_vote(v, *vote, precommit_send_at, precommits_seen, true, false);
                any_precommit = true;
                continue;
            }
            // honest: precommit the digest with a prevote quorum, subject to
            // the one-digest-per-height rule
            std::map<Hash256, std::set<ValidatorId>> tally;
            for (const Vote& pv : prevotes_seen[v]) {
                if (pv.phase == Phase::Prevote && pv.height == height && pv.round == round)
                    tally[pv.proposal_digest].insert(pv.signer);
            }
            std::optional<Hash256> chosen;
            for (const auto& [digest, who] : tally) {
                if (registry.quorum_met(std::vector<ValidatorId>(who.begin(), who.end()), ctx.mode,
                                        threshold)) {
                    chosen = digest;
                    break;
                }
            }
            if (!chosen) continue;
            auto lock = height_locks.find(v.value);
            if (lock != height_locks_.end() && lock->second != *chosen) continue;
            auto pit = proposals_by_digest.find(*chosen);
            std::optional<Vote> vote;
            if (pit != proposals_by_digest.end()) {
                vote = make_vote(v, Phase::Precommit, pit->second);
            } else {
                vote = make_vote_digest(v, Phase::Precommit, round, *chosen);
            }
            if (vote) {
                height_locks[v.value] = *chosen;
                broadcast_vote(v, *vote, precommit_send_at, precommits_seen, false, false);
                any_precommit = true;
            }
        }

        // ---- assemble certificate ----
        uint64_t round_end = precommit_start + cfg.phase_slot_us;
        if (any_precommit) {
            for (ValidatorId v : active) {
                if (faults.of(v) != FaultKind::Honest) continue;
                FinalizeResult fin = finalize_check(precommits_seen[v], registry, threshold,
                                                    ctx.mode, ctx.enclave->provider());
                if (!fin.ok()) continue;
                auto pit = proposals_by_digest.find(fin.digest);
                if (pit == proposals_by_digest.end()) continue;
                FinalityCertificate cert;
                cert.proposal = pit->second;
                cert.proof = std::move(*fin.proof);
                cert.finalized_at_us = round_end;
                out.stats.rounds_used = round + 1;
                out.stats.latency_us = round_end - round_start;
                out.stats.crypto_time_us +=
                    3 * (cfg.sign_cost_us + cfg.seal_cost_us)       // critical-path signatures
                    + cfg.verify_cost_us                            // proposal check
                    + threshold * cfg.verify_cost_us                // certificate signatures
                    + cfg.aggregate_cost_us;
                std::vector<ValidatorId> signers;
                for (const auto& [id, s] : cert.proof.signatures) signers.push_back(id);
                registry.reward_round(signers);
                out.certificate = std::move(cert);
                return out;
            }
        }
        now = precommit_start + cfg.phase_timeout_us;  // precommit never reached quorum
    }

    size_t active_honest = 0;
    for (ValidatorId v : active)
        if (faults.of(v) == FaultKind::Honest) ++active_honest;
    out.failure = RoundFailure{
        RoundFailureKind::LivenessLost, cfg.max_rounds,
        "no precommit quorum after " + std::to_string(cfg.max_rounds) + " rounds: " +
            std::to_string(active_honest) + " honest of " + std::to_string(active.size()) +
            " active, threshold " + std::to_string(threshold)};
    return out;
}

}  // namespace qlink
