// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/pqc.hpp"
#include "qlink/vote.hpp"

namespace qlink {

enum class Role : uint8_t { QkdHub, QkdEndpoint, Consumer };
enum class ValidatorStatus : uint8_t { Active, Slashed, Disqualified };

inline const char* to_string(Role r) {
    switch (r) {
        case Role::QkdHub: return "qkd_hub";
        case Role::QkdEndpoint: return "qkd_endpoint";
        case Role::Consumer: return "consumer";
    }
    return "unknown";
}

inline const char* to_string(ValidatorStatus s) {
    switch (s) {
        case ValidatorStatus::Active: return "active";
        case ValidatorStatus::Slashed: return "slashed";
        case ValidatorStatus::Disqualified: return "disqualified";
    }
    return "unknown";
}

struct ValidatorRecord {
    ValidatorId id;
    PublicKey public_key;
    uint64_t weight = 1;
    Role role = Role::Consumer;
    std::optional<std::string> certificate;
    ValidatorStatus status = ValidatorStatus::Active;
    uint64_t rounds_rewarded = 0;  // reward-accounting hook, bumped per finalized round
};

inline uint64_t max_faults(uint64_t n) {
    if (n < 1) throw InvalidParameter("max_faults: committee must have at least one member");
    return (n - 1) / 3;
}

// ---------------------------------------------------------------------------
// Misbehavior evidence
// ---------------------------------------------------------------------------

enum class EvidenceKind : uint8_t {
    DoubleSign,
    InvalidProof,
    KeyDeliveryFailure,
    ConnectivityFailure,
};

inline const char* to_string(EvidenceKind k) {
    switch (k) {
        case EvidenceKind::DoubleSign: return "double_sign";
        case EvidenceKind::InvalidProof: return "invalid_proof";
        case EvidenceKind::KeyDeliveryFailure: return "key_delivery_failure";
        case EvidenceKind::ConnectivityFailure: return "connectivity_failure";
    }
    return "unknown";
}

struct DoubleSignPayload {
    Vote first;
    Vote second;
};

struct MisbehaviorEvidence {
    EvidenceKind kind = EvidenceKind::DoubleSign;
    ValidatorId accused;
    // DOUBLE_SIGN carries the two conflicting votes; INVALID_PROOF carries the
    // accused's signature over the offending submission; the failure kinds
    // carry a reference into the delivery log.
    std::optional<DoubleSignPayload> double_sign;
    std::optional<Signature> offending_signature;
    Bytes offending_message;
    std::string log_ref;
};

struct EvidenceResult {
    bool valid = false;
    bool applied = false;
    ValidatorStatus new_status = ValidatorStatus::Active;
    bool reroute_needed = false;  // hub disqualified, responsibilities move to a redundant hub
    std::string detail;
};

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

class Registry {
public:
    // Non-empty allowlist restricts which hardware certificates are accepted
    // for QKD roles; an empty allowlist accepts any present certificate.
    void set_certificate_allowlist(std::set<std::string> allow) { cert_allowlist_ = std::move(allow); }

    void register_validator(ValidatorRecord record) {
        if (record.weight == 0) throw InvalidParameter("register_validator: weight must be positive");
        if (records_.count(record.id)) throw DuplicateKey("register_validator: id already registered");
        for (const auto& [id, existing] : records_) {
            if (existing.public_key == record.public_key)
                throw DuplicateKey("register_validator: public key already registered");
        }
        if (record.role == Role::QkdHub || record.role == Role::QkdEndpoint) {
            if (!record.certificate.has_value() || record.certificate->empty())
                throw CertificateRequired("register_validator: QKD role requires a hardware certificate");
            if (!cert_allowlist_.empty() && !cert_allowlist_.count(*record.certificate))
                throw CertificateRequired("register_validator: certificate not on the allowlist");
        }
        records_.emplace(record.id, std::move(record));
    }

    const ValidatorRecord* find_record(ValidatorId id) const {
        auto it = records_.find(id);
        return it == records_.end() ? nullptr : &it->second;
    }

    bool is_registered(ValidatorId id) const { return records_.count(id) != 0; }

    bool is_active(ValidatorId id) const {
        const auto* r = find_record(id);
        return r != nullptr && r->status == ValidatorStatus::Active;
    }

    size_t size() const { return records_.size(); }

    size_t active_count() const {
        size_t n = 0;
        for (const auto& [id, r] : records_) n += (r.status == ValidatorStatus::Active);
        return n;
    }

    uint64_t total_active_weight() const {
        uint64_t w = 0;
        for (const auto& [id, r] : records_)
            if (r.status == ValidatorStatus::Active) w += r.weight;
        return w;
    }

    std::vector<ValidatorId> active_ids() const {
        std::vector<ValidatorId> out;
        for (const auto& [id, r] : records_)
            if (r.status == ValidatorStatus::Active) out.push_back(id);
        return out;  // map order -> sorted
    }

    std::vector<ValidatorId> all_ids() const {
        std::vector<ValidatorId> out;
        for (const auto& [id, r] : records_) out.push_back(id);
        return out;
    }

    // True when at least one active validator operates certified QKD hardware.
    bool qkd_path_present() const {
        for (const auto& [id, r] : records_) {
            if (r.status == ValidatorStatus::Active &&
                (r.role == Role::QkdHub || r.role == Role::QkdEndpoint))
                return true;
        }
        return false;
    }

    uint64_t quorum_threshold(QuorumMode mode) const {
        size_t n = active_count();
        if (n == 0) throw EmptyRegistry("quorum_threshold: no active validators");
        if (mode == QuorumMode::Count2f1) return 2 * max_faults(n) + 1;
        uint64_t w = total_active_weight();
        return (2 * w) / 3 + 1;  // smallest integer strictly above 2W/3
    }

    // Cumulative count/weight of the distinct active signers, against the
    // registry's own threshold. Non-active signers contribute zero.
    bool quorum_met(std::span<const ValidatorId> signers, QuorumMode mode) const {
        return quorum_met(signers, mode, quorum_threshold(mode));
    }

    bool quorum_met(std::span<const ValidatorId> signers, QuorumMode mode, uint64_t threshold) const {
        std::set<ValidatorId> distinct(signers.begin(), signers.end());
        uint64_t total = 0;
        for (ValidatorId id : distinct) {
            const auto* r = find_record(id);
            if (r == nullptr || r->status != ValidatorStatus::Active) continue;
            total += (mode == QuorumMode::WeightSupermajority) ? r->weight : 1;
        }
        return total >= threshold;
    }

    EvidenceResult handle_evidence(const MisbehaviorEvidence& evidence,
                                   const SignatureProvider& provider) {
        EvidenceResult res;
        auto it = records_.find(evidence.accused);
        if (it == records_.end()) {
            res.detail = "accused validator is not registered";
            return res;
        }
        ValidatorRecord& accused = it->second;

        switch (evidence.kind) {
            case EvidenceKind::DoubleSign: {
                if (!validate_double_sign(evidence, accused, provider)) {
                    res.detail = "double-sign payload failed validation";
                    return res;
                }
                accused.status = ValidatorStatus::Slashed;
                res.valid = res.applied = true;
                res.detail = "double-sign proven; validator slashed";
                break;
            }
            case EvidenceKind::InvalidProof: {
                if (!evidence.offending_signature.has_value() ||
                    evidence.offending_signature->signer != evidence.accused ||
                    !provider.verify(accused.public_key,
                                     crypto::sha256(evidence.offending_message),
                                     evidence.offending_signature->bytes)) {
                    res.detail = "offending signature does not check out";
                    return res;
                }
                accused.status = ValidatorStatus::Slashed;
                res.valid = res.applied = true;
                res.detail = "invalid proof submission proven; validator slashed";
                break;
            }
            case EvidenceKind::KeyDeliveryFailure: {
                if (evidence.log_ref.empty()) {
                    res.detail = "key delivery failure needs a delivery-log reference";
                    return res;
                }
                if (accused.role == Role::Consumer) {
                    res.detail = "accused has no key-delivery responsibilities";
                    return res;
                }
                accused.status = ValidatorStatus::Disqualified;
                res.valid = res.applied = true;
                res.reroute_needed = (accused.role == Role::QkdHub);
                res.detail = "key delivery failure; validator disqualified";
                break;
            }
            case EvidenceKind::ConnectivityFailure: {
                if (evidence.log_ref.empty()) {
                    res.detail = "connectivity failure needs a delivery-log reference";
                    return res;
                }
                accused.status = ValidatorStatus::Slashed;
                res.valid = res.applied = true;
                res.detail = "connectivity failure; validator slashed";
                break;
            }
        }
        res.new_status = accused.status;
        return res;
    }

    void reward_round(std::span<const ValidatorId> finalizers) {
        for (ValidatorId id : finalizers) {
            auto it = records_.find(id);
            if (it != records_.end()) ++it->second.rounds_rewarded;
        }
    }

    void set_status(ValidatorId id, ValidatorStatus status) {
        auto it = records_.find(id);
        if (it == records_.end()) throw InvalidParameter("set_status: unknown validator");
        it->second.status = status;
    }

    const std::map<ValidatorId, ValidatorRecord>& records() const { return records_; }

private:
    static bool validate_double_sign(const MisbehaviorEvidence& evidence,
                                     const ValidatorRecord& accused,
                                     const SignatureProvider& provider) {
        if (!evidence.double_sign.has_value()) return false;
        const Vote& a = evidence.double_sign->first;
        const Vote& b = evidence.double_sign->second;
        if (a.signer != evidence.accused || b.signer != evidence.accused) return false;
        if (a.height != b.height || a.round != b.round || a.phase != b.phase) return false;
        if (a.proposal_digest == b.proposal_digest) return false;
        auto check = [&](const Vote& v) {
            Bytes pre = vote_preimage(v);
            return provider.verify(accused.public_key, crypto::sha256(pre), v.signature.bytes);
        };
        return check(a) && check(b);
    }

    std::map<ValidatorId, ValidatorRecord> records_;
    std::set<std::string> cert_allowlist_;
};

}  // namespace qlink
