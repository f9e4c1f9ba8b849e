// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/pqc.hpp"

namespace qlink {

enum class Phase : uint8_t { Prevote = 1, Precommit = 2 };

inline const char* to_string(Phase p) {
    return p == Phase::Prevote ? "prevote" : "precommit";
}

struct Vote {
    Phase phase = Phase::Prevote;
    uint64_t height = 0;
    uint32_t round = 0;
    Hash256 proposal_digest{};
    ValidatorId signer;
    Signature signature;
};

// Byte string a vote signature commits to.
inline Bytes vote_preimage(Phase phase, uint64_t height, uint32_t round, const Hash256& digest) {
    Bytes out;
    out.reserve(4 + 1 + 8 + 4 + 32);
    append_bytes(out, "vote", 4);
    out.push_back(static_cast<uint8_t>(phase));
    append_u64_le(out, height);
    append_u32_le(out, round);
    append_bytes(out, digest.data(), digest.size());
    return out;
}

inline Bytes vote_preimage(const Vote& v) {
    return vote_preimage(v.phase, v.height, v.round, v.proposal_digest);
}

// A leader's bundle of cross-chain events for one (height, round). The digest
// binds height, round, leader and the event list.
struct Proposal {
    uint64_t height = 0;
    uint32_t round = 0;
    ValidatorId leader;
    std::vector<Hash256> event_digests;
    Hash256 digest{};
};

inline Bytes proposal_preimage(uint64_t height, uint32_t round, ValidatorId leader,
                               std::span<const Hash256> event_digests) {
    Bytes out;
    append_bytes(out, "proposal", 8);
    append_u64_le(out, height);
    append_u32_le(out, round);
    append_u64_le(out, leader.value);
    append_u32_le(out, static_cast<uint32_t>(event_digests.size()));
    for (const Hash256& d : event_digests) append_bytes(out, d.data(), d.size());
    return out;
}

inline Proposal make_proposal(uint64_t height, uint32_t round, ValidatorId leader,
                              std::vector<Hash256> event_digests) {
    if (event_digests.empty()) throw InvalidParameter("make_proposal: empty event bundle");
    Proposal p;
    p.height = height;
    p.round = round;
    p.leader = leader;
    p.event_digests = std::move(event_digests);
    p.digest = crypto::sha256(proposal_preimage(height, round, leader, p.event_digests));
    return p;
}

}  // namespace qlink
