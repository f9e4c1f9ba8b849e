// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qlink/common.hpp"
#include "qlink/sha256.hpp"

namespace qlink {

struct DigestMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class SchemeId : uint8_t {
    MockDeterministic = 0,  // keyed-hash construction, seedable, reproducible
    LatticeProvider = 1,    // slot for a real NIST lattice scheme
};

// Sizes are what the simulator models; the algorithm behind them is
// provider-supplied. Defaults put a 3-signature bundle mid-band of the
// 3-6 KB envelope expected for lattice signatures.
struct SignatureScheme {
    SchemeId id = SchemeId::MockDeterministic;
    uint32_t signature_size = 1300;  // bytes
    uint32_t public_key_size = 32;   // bytes

    static SignatureScheme mock_default() { return {}; }
    static SignatureScheme mock_falcon_sized() { return {SchemeId::MockDeterministic, 666, 897}; }
    static SignatureScheme mock_dilithium_sized() { return {SchemeId::MockDeterministic, 2420, 1312}; }
};

struct PublicKey {
    Bytes bytes;

    friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.bytes == b.bytes; }
    friend bool operator<(const PublicKey& a, const PublicKey& b) { return a.bytes < b.bytes; }
};

struct Signature {
    ValidatorId signer;
    Bytes bytes;
    SchemeId scheme = SchemeId::MockDeterministic;
    Hash256 signed_digest{};  // digest the signature was produced over
};

// Opaque reference to a key held inside the enclave. Carries no key material.
struct KeyHandle {
    uint64_t handle_id = 0;
    ValidatorId owner;
};

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

class SignatureProvider {
public:
    virtual ~SignatureProvider() = default;
    virtual const SignatureScheme& scheme() const = 0;
    virtual std::pair<Bytes, PublicKey> keygen() = 0;
    virtual Bytes sign(std::span<const uint8_t> secret, const Hash256& digest) const = 0;
    virtual bool verify(const PublicKey& pk, const Hash256& digest,
                        std::span<const uint8_t> sig) const = 0;
};

// Deterministic stand-in scheme: sig = expand(H(secret || digest)) to the
// configured size, pk = expand(secret). Verification recomputes the expected
// signature from the secret paired with the public key; the pairing table is
// internal to the provider, so knowing a public key gives no signing power.
class MockDeterministicProvider final : public SignatureProvider {
public:
    MockDeterministicProvider(SignatureScheme scheme, uint64_t seed)
        : scheme_(scheme), seed_(seed) {}

    const SignatureScheme& scheme() const override { return scheme_; }

    std::pair<Bytes, PublicKey> keygen() override {
        crypto::Sha256 h;
        h.update("mock-sk");
        h.update_u64(seed_);
        h.update_u64(counter_++);
        Hash256 sk = h.finalize();
        Bytes secret(sk.begin(), sk.end());
        PublicKey pk{crypto::expand("mock-pk", secret, scheme_.public_key_size)};
        secrets_by_pk_[pk.bytes] = secret;
        return {std::move(secret), std::move(pk)};
    }

    Bytes sign(std::span<const uint8_t> secret, const Hash256& digest) const override {
        crypto::Sha256 h;
        h.update("mock-sig");
        h.update(secret);
        h.update(std::span<const uint8_t>(digest.data(), digest.size()));
        Hash256 core = h.finalize();
        return crypto::expand("mock-sig-expand", std::span<const uint8_t>(core.data(), core.size()),
                              scheme_.signature_size);
    }

    bool verify(const PublicKey& pk, const Hash256& digest,
                std::span<const uint8_t> sig) const override {
        if (sig.size() != scheme_.signature_size) return false;
        auto it = secrets_by_pk_.find(pk.bytes);
        if (it == secrets_by_pk_.end()) return false;
        Bytes expected = sign(std::span<const uint8_t>(it->second.data(), it->second.size()), digest);
        return std::equal(expected.begin(), expected.end(), sig.begin());
    }

private:
    SignatureScheme scheme_;
    uint64_t seed_;
    uint64_t counter_ = 0;
    std::map<Bytes, Bytes> secrets_by_pk_;
};

inline std::unique_ptr<SignatureProvider> make_provider(const SignatureScheme& scheme,
                                                        uint64_t seed) {
    switch (scheme.id) {
        case SchemeId::MockDeterministic:
            return std::make_unique<MockDeterministicProvider>(scheme, seed);
        case SchemeId::LatticeProvider:
            throw ConfigError("no lattice provider is wired in; use the mock scheme");
    }
    throw ConfigError("unknown scheme id");
}

// ---------------------------------------------------------------------------
// Enclave
// ---------------------------------------------------------------------------

enum class SignStatus { Ok, NoSuchKey, AuthorizationDenied };

struct SignResult {
    SignStatus status = SignStatus::Ok;
    Signature signature;

    bool ok() const { return status == SignStatus::Ok; }
};

enum class ExportStatus { KeyExportForbidden };

struct SigningContext {
    uint64_t height = 0;
    uint32_t round = 0;
    uint8_t phase_tag = 0xFF;  // 0 proposal, 1 prevote, 2 precommit, 0xFF other
};

struct SigningLogEntry {
    ValidatorId owner;
    Hash256 digest;
    uint64_t height;
    uint32_t round;
    uint8_t phase_tag;
};

// Emulated HSM boundary: secrets live only in the private store, signing
// requires the owner to be authorized, and the export surface exists solely
// to refuse.
class HsmEnclave {
public:
    HsmEnclave(const SignatureScheme& scheme, uint64_t seed)
        : provider_(make_provider(scheme, seed)) {}

    explicit HsmEnclave(std::unique_ptr<SignatureProvider> provider)
        : provider_(std::move(provider)) {}

    const SignatureScheme& scheme() const { return provider_->scheme(); }
    const SignatureProvider& provider() const { return *provider_; }

    std::pair<KeyHandle, PublicKey> keygen(ValidatorId owner) {
        auto [secret, pk] = provider_->keygen();
        KeyHandle handle{next_handle_id_++, owner};
        store_[handle.handle_id] = StoredKey{owner, std::move(secret)};
        return {handle, std::move(pk)};
    }

    template <typename ActivePredicate>
    SignResult sign(const KeyHandle& handle, std::span<const uint8_t> message,
                    const ActivePredicate& owner_active, SigningContext ctx = {}) {
        SignResult res;
        auto it = store_.find(handle.handle_id);
        if (it == store_.end()) {
            res.status = SignStatus::NoSuchKey;
            return res;
        }
        if (!owner_active(it->second.owner)) {
            res.status = SignStatus::AuthorizationDenied;
            return res;
        }
        Hash256 digest = crypto::sha256(message);
        res.signature.signer = it->second.owner;
        res.signature.scheme = provider_->scheme().id;
        res.signature.signed_digest = digest;
        res.signature.bytes = provider_->sign(
            std::span<const uint8_t>(it->second.secret.data(), it->second.secret.size()), digest);
        log_.push_back({it->second.owner, digest, ctx.height, ctx.round, ctx.phase_tag});
        ++signatures_issued_;
        return res;
    }

    // No key material ever crosses this boundary.
    ExportStatus export_secret(const KeyHandle&) const { return ExportStatus::KeyExportForbidden; }

    bool verify(const PublicKey& pk, std::span<const uint8_t> message, const Signature& sig) const {
        return provider_->verify(pk, crypto::sha256(message), sig.bytes);
    }

    const std::vector<SigningLogEntry>& signing_log() const { return log_; }
    uint64_t signatures_issued() const { return signatures_issued_; }

private:
    struct StoredKey {
        ValidatorId owner;
        Bytes secret;
    };

    std::unique_ptr<SignatureProvider> provider_;
    std::map<uint64_t, StoredKey> store_;
    uint64_t next_handle_id_ = 1;
    std::vector<SigningLogEntry> log_;
    uint64_t signatures_issued_ = 0;
};

// ---------------------------------------------------------------------------
// Aggregated proofs
// ---------------------------------------------------------------------------

struct AggregatedProof {
    Hash256 message_digest{};
    std::map<ValidatorId, Signature> signatures;  // keyed by signer, duplicates collapse

    size_t signer_count() const { return signatures.size(); }

    // Serialized size: 4-byte count header plus, per signature, an 8-byte
    // signer id, a 2-byte length and the signature bytes.
    uint64_t size_bytes() const {
        uint64_t n = 4;
        for (const auto& [id, sig] : signatures) n += 8 + 2 + sig.bytes.size();
        return n;
    }
};

inline AggregatedProof aggregate_proof(std::span<const uint8_t> message,
                                       std::span<const Signature> sigs) {
    AggregatedProof proof;
    proof.message_digest = crypto::sha256(message);
    for (const Signature& s : sigs) {
        if (s.signed_digest != proof.message_digest)
            throw DigestMismatch("aggregate_proof: signature over a different digest");
        proof.signatures.emplace(s.signer, s);  // first one wins per signer
    }
    return proof;
}

// Wire format, stable across runs: count as 4-byte big-endian, then for each
// signature (ordered by signer id): 8-byte big-endian signer id, 2-byte
// big-endian length, raw signature bytes.
inline Bytes serialize_proof(const AggregatedProof& proof) {
    Bytes out;
    out.reserve(proof.size_bytes());
    uint32_t count = static_cast<uint32_t>(proof.signatures.size());
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<uint8_t>(count >> (8 * i)));
    for (const auto& [id, sig] : proof.signatures) {
        for (int i = 7; i >= 0; --i) out.push_back(static_cast<uint8_t>(id.value >> (8 * i)));
        if (sig.bytes.size() > 0xFFFF) throw InvalidParameter("serialize_proof: signature too large");
        uint16_t len = static_cast<uint16_t>(sig.bytes.size());
        out.push_back(static_cast<uint8_t>(len >> 8));
        out.push_back(static_cast<uint8_t>(len & 0xFF));
        append_bytes(out, sig.bytes.data(), sig.bytes.size());
    }
    return out;
}

inline AggregatedProof deserialize_proof(std::span<const uint8_t> data, const Hash256& digest,
                                         SchemeId scheme) {
    AggregatedProof proof;
    proof.message_digest = digest;
    size_t pos = 0;
    auto need = [&](size_t n) {
        if (pos + n > data.size()) throw InvalidParameter("deserialize_proof: truncated input");
    };
    need(4);
    uint32_t count = 0;
    for (int i = 0; i < 4; ++i) count = (count << 8) | data[pos++];
    for (uint32_t k = 0; k < count; ++k) {
        need(10);
        uint64_t id = 0;
        for (int i = 0; i < 8; ++i) id = (id << 8) | data[pos++];
        uint16_t len = static_cast<uint16_t>((data[pos] << 8) | data[pos + 1]);
        pos += 2;
        need(len);
        Signature sig;
        sig.signer = ValidatorId(id);
        sig.scheme = scheme;
        sig.signed_digest = digest;
        sig.bytes.assign(data.begin() + pos, data.begin() + pos + len);
        pos += len;
        proof.signatures.emplace(sig.signer, std::move(sig));
    }
    if (pos != data.size()) throw InvalidParameter("deserialize_proof: trailing bytes");
    return proof;
}

enum class AggReject {
    None,
    DigestMismatch,
    BadSignature,
    UnregisteredSigner,
    InactiveSigner,
    ThresholdNotMet,
};

struct AggVerifyResult {
    bool ok = false;
    AggReject reason = AggReject::None;
    uint64_t quorum_value = 0;  // distinct signers or cumulative weight
};

inline const char* to_string(AggReject r) {
    switch (r) {
        case AggReject::None: return "none";
        case AggReject::DigestMismatch: return "digest_mismatch";
        case AggReject::BadSignature: return "bad_signature";
        case AggReject::UnregisteredSigner: return "unregistered_signer";
        case AggReject::InactiveSigner: return "inactive_signer";
        case AggReject::ThresholdNotMet: return "threshold_not_met";
    }
    return "unknown";
}

// Accepts iff every signature verifies under its registered key, every signer
// is registered and active, and the distinct-signer count (or cumulative
// weight) reaches the threshold. RegistryLike must expose
// find_record(ValidatorId) -> const ValidatorRecord* with
// .status/.weight/.public_key and an is_active(ValidatorId).
template <typename RegistryLike>
AggVerifyResult verify_aggregate(const AggregatedProof& proof, std::span<const uint8_t> message,
                                 const RegistryLike& registry, uint64_t threshold, QuorumMode mode,
                                 const SignatureProvider& provider) {
    AggVerifyResult res;
    Hash256 digest = crypto::sha256(message);
    if (digest != proof.message_digest) {
        res.reason = AggReject::DigestMismatch;
        return res;
    }
    uint64_t quorum = 0;
    for (const auto& [id, sig] : proof.signatures) {
        const auto* record = registry.find_record(id);
        if (record == nullptr) {
            res.reason = AggReject::UnregisteredSigner;
            return res;
        }
        if (!registry.is_active(id)) {
            res.reason = AggReject::InactiveSigner;
            return res;
        }
        if (!provider.verify(record->public_key, digest, sig.bytes)) {
            res.reason = AggReject::BadSignature;
            return res;
        }
        quorum += (mode == QuorumMode::WeightSupermajority) ? record->weight : 1;
    }
    res.quorum_value = quorum;
    if (quorum < threshold) {
        res.reason = AggReject::ThresholdNotMet;
        return res;
    }
    res.ok = true;
    return res;
}

}  // namespace qlink
