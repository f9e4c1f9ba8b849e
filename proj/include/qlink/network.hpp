// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "qlink/qkd.hpp"

namespace qlink {

// The set of QKD links a committee runs over, with routing. Full-mesh pairs
// talk directly; hub-and-spoke pairs relay through a hub that decrypts and
// re-seals (trusted-relay QKD), consuming key on every hop. Dead links are
// skipped, so a redundant hub picks up traffic when the primary goes down.
class QkdNetwork {
public:
    using LinkKey = std::pair<uint64_t, uint64_t>;

    static LinkKey key_for(ValidatorId a, ValidatorId b) {
        return {std::min(a.value, b.value), std::max(a.value, b.value)};
    }

    void add_link(const QkdLinkConfig& config, uint64_t scenario_seed,
                  uint64_t generation_start_us = 0) {
        config.validate();
        LinkKey k = key_for(config.endpoint_a, config.endpoint_b);
        if (links_.count(k)) throw InvalidParameter("add_link: duplicate link");
        links_.emplace(k, QkdLink(config, scenario_seed, generation_start_us));
    }

    void add_hub(ValidatorId hub) { hubs_.push_back(hub); }
    const std::vector<ValidatorId>& hubs() const { return hubs_; }

    QkdLink* link_between(ValidatorId a, ValidatorId b) {
        auto it = links_.find(key_for(a, b));
        return it == links_.end() ? nullptr : &it->second;
    }

    const QkdLink* link_between(ValidatorId a, ValidatorId b) const {
        auto it = links_.find(key_for(a, b));
        return it == links_.end() ? nullptr : &it->second;
    }

    std::map<LinkKey, QkdLink>& links() { return links_; }
    const std::map<LinkKey, QkdLink>& links() const { return links_; }

    void advance_generation(uint64_t now_us) {
        for (auto& [k, link] : links_) link.advance_generation(now_us);
    }

    void kill_links_of(ValidatorId v) {
        for (auto& [k, link] : links_) {
            if (k.first == v.value || k.second == v.value) link.set_alive(false);
        }
    }

    // Direct link if present and alive, otherwise a two-hop relay through the
    // first alive hub. Empty when no path exists.
    std::vector<QkdLink*> route(ValidatorId a, ValidatorId b) {
        if (QkdLink* direct = link_between(a, b); direct != nullptr && direct->alive()) {
            return {direct};
        }
        for (ValidatorId hub : hubs_) {
            if (hub == a || hub == b) continue;
            QkdLink* first = link_between(a, hub);
            QkdLink* second = link_between(hub, b);
            if (first && second && first->alive() && second->alive()) return {first, second};
        }
        return {};
    }

    struct SendResult {
        bool delivered = false;
        uint32_t hops = 0;
        uint64_t key_bits_consumed = 0;
        BitVec plaintext_out;  // what the receiver decrypted (last hop)
    };

    // Seals the payload across each hop at time `now_us` and opens it at the
    // far end of every hop. A hop that cannot draw key drops the message.
    SendResult send(ValidatorId from, ValidatorId to, const BitVec& payload, uint64_t now_us) {
        SendResult res;
        std::vector<QkdLink*> path = route(from, to);
        if (path.empty()) {
            ++routing_failures_;
            return res;
        }
        ValidatorId hop_from = from;
        BitVec current = payload;
        for (size_t i = 0; i < path.size(); ++i) {
            QkdLink* link = path[i];
            ValidatorId hop_to =
                (i + 1 == path.size())
                    ? to
                    : (ValidatorId(link->config().endpoint_a == hop_from
                                       ? link->config().endpoint_b.value
                                       : link->config().endpoint_a.value));
            link->advance_generation(now_us);
            auto sealed = link->seal(current, hop_from, hop_to);
            if (!sealed) return res;  // missed, counted by the link
            res.key_bits_consumed += sealed->key_bits_consumed();
            OpenResult opened = link->open(*sealed);
            if (!opened.ok()) return res;  // cannot happen on an honest hop
            current = std::move(opened.plaintext);
            hop_from = hop_to;
            ++res.hops;
        }
        res.delivered = true;
        res.plaintext_out = std::move(current);
        return res;
    }

    uint64_t total_sealed() const {
        uint64_t n = 0;
        for (const auto& [k, l] : links_) n += l.sealed_count();
        return n;
    }

    uint64_t total_missed() const {
        uint64_t n = 0;
        for (const auto& [k, l] : links_) n += l.missed_count();
        return n;
    }

    uint64_t total_key_bits_consumed() const {
        uint64_t n = 0;
        for (const auto& [k, l] : links_) n += l.buffer().consumed_total();
        return n;
    }

    uint64_t total_overlap_violations() const {
        uint64_t n = 0;
        for (const auto& [k, l] : links_)
            n += l.draw_ledger().overlap_violations() + l.open_ledger().overlap_violations();
        return n;
    }

    bool all_buffers_conserved() const {
        for (const auto& [k, l] : links_)
            if (!l.buffer().conserved()) return false;
        return true;
    }

    uint64_t routing_failures() const { return routing_failures_; }

private:
    std::map<LinkKey, QkdLink> links_;
    std::vector<ValidatorId> hubs_;
    uint64_t routing_failures_ = 0;
};

}  // namespace qlink
