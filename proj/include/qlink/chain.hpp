// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/pqc.hpp"
#include "qlink/registry.hpp"
#include "qlink/sha256.hpp"
#include "qlink/vote.hpp"

namespace qlink {

// ---------------------------------------------------------------------------
// Merkle trees
// ---------------------------------------------------------------------------
// Leaves and interior nodes are domain-separated; an odd node count at any
// level duplicates the last node. Proofs are bit-exact under these two rules.

inline Hash256 merkle_leaf(std::span<const uint8_t> tx) {
    crypto::Sha256 h;
    uint8_t tag = 0x00;
    h.update(&tag, 1);
    h.update(tx);
    return h.finalize();
}

inline Hash256 merkle_node(const Hash256& left, const Hash256& right) {
    crypto::Sha256 h;
    uint8_t tag = 0x01;
    h.update(&tag, 1);
    h.update(std::span<const uint8_t>(left.data(), left.size()));
    h.update(std::span<const uint8_t>(right.data(), right.size()));
    return h.finalize();
}

inline const Hash256& empty_merkle_root() {
    static const Hash256 root = crypto::sha256("qlink-empty-merkle-root");
    return root;
}

inline Hash256 merkle_root(const std::vector<Bytes>& txs) {
    if (txs.empty()) return empty_merkle_root();
    std::vector<Hash256> level;
    level.reserve(txs.size());
    for (const Bytes& tx : txs) level.push_back(merkle_leaf(tx));
    while (level.size() > 1) {
        if (level.size() % 2 != 0) level.push_back(level.back());
        std::vector<Hash256> next;
        next.reserve(level.size() / 2);
        for (size_t i = 0; i < level.size(); i += 2) next.push_back(merkle_node(level[i], level[i + 1]));
        level = std::move(next);
    }
    return level[0];
}

struct MerkleStep {
    Hash256 sibling;
    bool sibling_on_left = false;
};

struct MerkleProof {
    Hash256 leaf{};
    std::vector<MerkleStep> path;
    Hash256 root{};
};

inline MerkleProof merkle_proof(const std::vector<Bytes>& txs, size_t tx_index) {
    if (tx_index >= txs.size()) throw InvalidParameter("merkle_proof: tx index out of range");
    MerkleProof proof;
    std::vector<Hash256> level;
    level.reserve(txs.size());
    for (const Bytes& tx : txs) level.push_back(merkle_leaf(tx));
    proof.leaf = level[tx_index];
    size_t pos = tx_index;
    while (level.size() > 1) {
        if (level.size() % 2 != 0) level.push_back(level.back());
        size_t sibling = (pos % 2 == 0) ? pos + 1 : pos - 1;
        proof.path.push_back({level[sibling], sibling < pos});
        std::vector<Hash256> next;
        next.reserve(level.size() / 2);
        for (size_t i = 0; i < level.size(); i += 2) next.push_back(merkle_node(level[i], level[i + 1]));
        level = std::move(next);
        pos /= 2;
    }
    proof.root = level[0];
    return proof;
}

inline bool verify_merkle_proof(const MerkleProof& proof) {
    Hash256 h = proof.leaf;
    for (const MerkleStep& step : proof.path)
        h = step.sibling_on_left ? merkle_node(step.sibling, h) : merkle_node(h, step.sibling);
    return h == proof.root;
}

// ---------------------------------------------------------------------------
// Headers and simulated chains
// ---------------------------------------------------------------------------

struct BlockHeader {
    uint64_t height = 0;
    Hash256 prev_hash{};
    Hash256 merkle_root{};
    uint64_t timestamp_us = 0;
};

inline Hash256 header_hash(const BlockHeader& h) {
    Bytes b;
    append_bytes(b, "header", 6);
    append_u64_le(b, h.height);
    append_bytes(b, h.prev_hash.data(), h.prev_hash.size());
    append_bytes(b, h.merkle_root.data(), h.merkle_root.size());
    append_u64_le(b, h.timestamp_us);
    return crypto::sha256(b);
}

struct Block {
    BlockHeader header;
    std::vector<Bytes> txs;
};

// Append-only header chain with a mempool, producing blocks at a fixed
// interval. Reorgs replace a suffix with a strictly longer fork (tests and
// attack scripts use this); everything else only appends.
class SimChain {
public:
    SimChain() = default;

    SimChain(std::string chain_id, uint64_t block_interval_us, uint64_t genesis_time_us = 0)
        : chain_id_(std::move(chain_id)), block_interval_us_(block_interval_us) {
        Block genesis;
        genesis.header.height = 0;
        genesis.header.timestamp_us = genesis_time_us;
        genesis.header.merkle_root = empty_merkle_root();
        blocks_.push_back(std::move(genesis));
    }

    const std::string& chain_id() const { return chain_id_; }
    uint64_t block_interval_us() const { return block_interval_us_; }
    uint64_t tip_height() const { return blocks_.back().header.height; }

    const BlockHeader* header_at(uint64_t height) const {
        const Block* b = block_at(height);
        return b ? &b->header : nullptr;
    }

    const Block* block_at(uint64_t height) const {
        if (height >= blocks_.size()) return nullptr;
        return &blocks_[height];
    }

    uint64_t next_block_time_us() const {
        return blocks_.back().header.timestamp_us + block_interval_us_;
    }

    void submit_tx(Bytes tx) { mempool_.push_back(std::move(tx)); }
    size_t mempool_size() const { return mempool_.size(); }

    const BlockHeader& append_block(std::vector<Bytes> txs, uint64_t timestamp_us) {
        Block b;
        b.header.height = tip_height() + 1;
        b.header.prev_hash = header_hash(blocks_.back().header);
        b.header.merkle_root = merkle_root(txs);
        b.header.timestamp_us = timestamp_us;
        b.txs = std::move(txs);
        blocks_.push_back(std::move(b));
        return blocks_.back().header;
    }

    // Appends every block due by `now_us`, draining the mempool into the
    // first one. Returns the heights appended.
    std::vector<uint64_t> advance_to(uint64_t now_us) {
        std::vector<uint64_t> appended;
        while (next_block_time_us() <= now_us) {
            uint64_t ts = next_block_time_us();
            std::vector<Bytes> txs;
            txs.swap(mempool_);
            append_block(std::move(txs), ts);
            appended.push_back(tip_height());
        }
        return appended;
    }

    MerkleProof make_proof(uint64_t height, size_t tx_index) const {
        const Block* b = block_at(height);
        if (b == nullptr) throw InvalidParameter("make_proof: unknown height");
        return merkle_proof(b->txs, tx_index);
    }

    bool linkage_valid() const {
        for (size_t i = 1; i < blocks_.size(); ++i) {
            if (blocks_[i].header.prev_hash != header_hash(blocks_[i - 1].header)) return false;
            if (blocks_[i].header.height != blocks_[i - 1].header.height + 1) return false;
        }
        return true;
    }

    // Replaces all blocks from `from_height` with a strictly longer fork.
    void reorg_from(uint64_t from_height, const std::vector<std::vector<Bytes>>& fork_blocks,
                    uint64_t first_timestamp_us) {
        if (from_height == 0 || from_height > blocks_.size())
            throw InvalidParameter("reorg_from: bad fork point");
        size_t replaced = blocks_.size() - from_height;
        if (fork_blocks.size() <= replaced)
            throw InvalidParameter("reorg_from: fork must be strictly longer");
        blocks_.resize(from_height);
        uint64_t ts = first_timestamp_us;
        for (const auto& txs : fork_blocks) {
            append_block(txs, ts);
            ts += block_interval_us_;
        }
    }

private:
    std::string chain_id_;
    uint64_t block_interval_us_ = 0;
    std::vector<Block> blocks_;
    std::vector<Bytes> mempool_;
};

// ---------------------------------------------------------------------------
// Cross-chain lock events
// ---------------------------------------------------------------------------

struct LockEvent {
    Hash256 event_id{};  // hash of (chain_id, block_height, tx_index, nonce)
    std::string chain_id;
    uint64_t amount = 0;
    std::string sender;
    std::string recipient_on_dest;
    uint64_t block_height = 0;
    uint32_t tx_index = 0;
    uint64_t nonce = 0;
};

inline Hash256 lock_event_id(const std::string& chain_id, uint64_t block_height, uint32_t tx_index,
                             uint64_t nonce) {
    crypto::Sha256 h;
    h.update("event-id");
    h.update(chain_id);
    h.update_u64(block_height);
    h.update_u32(tx_index);
    h.update_u64(nonce);
    return h.finalize();
}

inline Bytes serialize_event(const LockEvent& e) {
    Bytes out;
    append_bytes(out, "lockev", 6);
    append_u32_le(out, static_cast<uint32_t>(e.chain_id.size()));
    append_bytes(out, e.chain_id.data(), e.chain_id.size());
    append_u64_le(out, e.amount);
    append_u32_le(out, static_cast<uint32_t>(e.sender.size()));
    append_bytes(out, e.sender.data(), e.sender.size());
    append_u32_le(out, static_cast<uint32_t>(e.recipient_on_dest.size()));
    append_bytes(out, e.recipient_on_dest.data(), e.recipient_on_dest.size());
    append_u64_le(out, e.block_height);
    append_u32_le(out, e.tx_index);
    append_u64_le(out, e.nonce);
    return out;
}

// Digest used when an event enters a consensus bundle.
inline Hash256 event_content_digest(const LockEvent& e) { return crypto::sha256(serialize_event(e)); }

// SPV acceptance: the inclusion proof must reproduce the canonical header's
// root at the event's height, and the event needs k confirmations counted
// inclusively (tip == height counts as 1).
inline bool verify_lock_event(const LockEvent& event, const MerkleProof& proof,
                              const SimChain& chain_view, uint64_t k) {
    const BlockHeader* header = chain_view.header_at(event.block_height);
    if (header == nullptr) return false;
    if (proof.root != header->merkle_root) return false;
    if (proof.leaf != merkle_leaf(serialize_event(event))) return false;
    if (!verify_merkle_proof(proof)) return false;
    if (chain_view.tip_height() < event.block_height) return false;
    uint64_t confirmations = chain_view.tip_height() - event.block_height + 1;
    return confirmations >= k;
}

// ---------------------------------------------------------------------------
// Finality-watermark light client
// ---------------------------------------------------------------------------

// Tracks a monotone finalized-height watermark and the merkle roots of
// finalized blocks. Watermark regressions are rejected.
class LightClientState {
public:
    bool advance(uint64_t height, const Hash256& merkle_root) {
        if (has_watermark_ && height < finalized_height_) return false;  // monotonicity
        auto it = finalized_roots_.find(height);
        if (it != finalized_roots_.end() && it->second != merkle_root) return false;
        finalized_roots_[height] = merkle_root;
        finalized_height_ = height;
        has_watermark_ = true;
        return true;
    }

    bool has_watermark() const { return has_watermark_; }
    uint64_t finalized_height() const { return finalized_height_; }

    const Hash256* root_at(uint64_t height) const {
        auto it = finalized_roots_.find(height);
        return it == finalized_roots_.end() ? nullptr : &it->second;
    }

private:
    bool has_watermark_ = false;
    uint64_t finalized_height_ = 0;
    std::map<uint64_t, Hash256> finalized_roots_;
};

inline bool verify_finalized_event(const LockEvent& event, const MerkleProof& proof,
                                   const LightClientState& lc) {
    if (!lc.has_watermark() || event.block_height > lc.finalized_height()) return false;
    const Hash256* root = lc.root_at(event.block_height);
    if (root == nullptr || proof.root != *root) return false;
    if (proof.leaf != merkle_leaf(serialize_event(event))) return false;
    return verify_merkle_proof(proof);
}

// ---------------------------------------------------------------------------
// Lock-and-mint bridge contract
// ---------------------------------------------------------------------------

enum class ContractReject {
    None,
    Replay,
    ThresholdNotMet,
    UnregisteredSigner,
    InactiveSigner,
    BadSignature,
    DigestMismatch,
    NoQkdPath,
    EventNotInBundle,
    OverBurn,
};

inline const char* to_string(ContractReject r) {
    switch (r) {
        case ContractReject::None: return "none";
        case ContractReject::Replay: return "reject_replay";
        case ContractReject::ThresholdNotMet: return "reject_threshold";
        case ContractReject::UnregisteredSigner: return "reject_signer";
        case ContractReject::InactiveSigner: return "reject_inactive_signer";
        case ContractReject::BadSignature: return "reject_bad_signature";
        case ContractReject::DigestMismatch: return "reject_digest_mismatch";
        case ContractReject::NoQkdPath: return "reject_no_qkd_path";
        case ContractReject::EventNotInBundle: return "reject_event_not_in_bundle";
        case ContractReject::OverBurn: return "reject_over_burn";
    }
    return "unknown";
}

struct MintResult {
    bool ok = false;
    ContractReject reason = ContractReject::None;
};

using ReleaseResult = MintResult;

inline ContractReject to_contract_reject(AggReject r) {
    switch (r) {
        case AggReject::None: return ContractReject::None;
        case AggReject::DigestMismatch: return ContractReject::DigestMismatch;
        case AggReject::BadSignature: return ContractReject::BadSignature;
        case AggReject::UnregisteredSigner: return ContractReject::UnregisteredSigner;
        case AggReject::InactiveSigner: return ContractReject::InactiveSigner;
        case AggReject::ThresholdNotMet: return ContractReject::ThresholdNotMet;
    }
    return ContractReject::BadSignature;
}

// Per-chain contract state. Mints only against a finalized bundle whose
// aggregated proof clears the registered-signer threshold, with one-shot
// event ids and a required quantum-secure path in the validator set.
class BridgeContract {
public:
    BridgeContract() = default;

    BridgeContract(std::string chain_id, const Registry* registry, QuorumMode mode,
                   const SignatureProvider* provider)
        : chain_id_(std::move(chain_id)), registry_(registry), mode_(mode), provider_(provider) {}

    const std::string& chain_id() const { return chain_id_; }
    uint64_t locked_total() const { return locked_total_; }
    uint64_t minted_total() const { return minted_total_; }
    uint64_t threshold() const { return registry_->quorum_threshold(mode_); }
    bool qkd_hub_present() const { return registry_->qkd_path_present(); }
    const std::set<Hash256>& consumed_event_ids() const { return consumed_event_ids_; }

    // Escrows `amount` and enqueues the lock event for the chain's next block.
    LockEvent submit_lock(SimChain& chain, const std::string& sender, uint64_t amount,
                          const std::string& recipient_on_dest) {
        if (amount == 0) throw InvalidParameter("submit_lock: amount must be positive");
        LockEvent e;
        e.chain_id = chain.chain_id();
        e.amount = amount;
        e.sender = sender;
        e.recipient_on_dest = recipient_on_dest;
        e.block_height = chain.tip_height() + 1;  // single-threaded sim: inclusion point is known
        e.tx_index = static_cast<uint32_t>(chain.mempool_size());
        e.nonce = next_nonce_++;
        e.event_id = lock_event_id(e.chain_id, e.block_height, e.tx_index, e.nonce);
        locked_total_ += amount;
        chain.submit_tx(serialize_event(e));
        return e;
    }

    MintResult mint(const LockEvent& event, const Proposal& bundle, const AggregatedProof& proof) {
        MintResult res;
        if ((res.reason = check_proof(event, bundle, proof)) != ContractReject::None) return res;
        consumed_event_ids_.insert(event.event_id);
        minted_total_ += event.amount;
        res.ok = true;
        return res;
    }

    // Burns wrapped supply here and releases escrow on the source contract,
    // under the same proof conditions as mint.
    ReleaseResult burn_release(BridgeContract& source, uint64_t amount, const LockEvent& burn_event,
                               const Proposal& bundle, const AggregatedProof& proof) {
        ReleaseResult res;
        if (amount > minted_total_) {
            res.reason = ContractReject::OverBurn;
            return res;
        }
        if ((res.reason = check_proof(burn_event, bundle, proof)) != ContractReject::None) return res;
        consumed_event_ids_.insert(burn_event.event_id);
        minted_total_ -= amount;
        source.locked_total_ -= amount;
        res.ok = true;
        return res;
    }

private:
    ContractReject check_proof(const LockEvent& event, const Proposal& bundle,
                               const AggregatedProof& proof) const {
        if (consumed_event_ids_.count(event.event_id)) return ContractReject::Replay;
        if (!qkd_hub_present()) return ContractReject::NoQkdPath;
        // the bundle digest must really bind these fields
        Bytes bundle_bytes =
            proposal_preimage(bundle.height, bundle.round, bundle.leader, bundle.event_digests);
        if (crypto::sha256(bundle_bytes) != bundle.digest) return ContractReject::DigestMismatch;
        Hash256 content = event_content_digest(event);
        bool in_bundle = false;
        for (const Hash256& d : bundle.event_digests) in_bundle |= (d == content);
        if (!in_bundle) return ContractReject::EventNotInBundle;
        // the proof aggregates precommit signatures over the bundle digest
        Bytes finality_msg = vote_preimage(Phase::Precommit, bundle.height, bundle.round, bundle.digest);
        AggVerifyResult v = verify_aggregate(proof, std::span<const uint8_t>(finality_msg),
                                             *registry_, threshold(), mode_, *provider_);
        if (!v.ok) return to_contract_reject(v.reason);
        return ContractReject::None;
    }

    std::string chain_id_;
    uint64_t locked_total_ = 0;
    uint64_t minted_total_ = 0;
    std::set<Hash256> consumed_event_ids_;
    uint64_t next_nonce_ = 1;
    const Registry* registry_ = nullptr;
    QuorumMode mode_ = QuorumMode::Count2f1;
    const SignatureProvider* provider_ = nullptr;
};

}  // namespace qlink
