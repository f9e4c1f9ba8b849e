// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlink/consensus.hpp"
#include "qlink/event_log.hpp"
#include "qlink/metrics.hpp"
#include "qlink/pqc.hpp"
#include "qlink/qkd.hpp"

namespace qlink {

struct LinkSpec {
    uint64_t a = 0;
    uint64_t b = 0;
    double distance_km = 5.0;
};

struct PacketConfig {
    uint64_t payload_bits = 500;   // 500 bits every 25 ms = 20 kbps offered
    uint64_t interval_us = 25'000;
    uint64_t mac_key_bits = kMacKeyBits;
};

struct ChannelConfig {
    // calibration points the channel model is fitted to: (distance_km, bits/s)
    std::vector<std::pair<double, double>> fit_points{{5.0, 13.1e6}, {50.0, 1.16e6}};
    uint64_t buffer_capacity_bits = 50'000'000;     // 50 Mbit
    uint64_t generation_start_delay_us = 40'000;    // key plane warm-up
};

struct ChainTimingConfig {
    uint64_t source_block_interval_us = 600'000'000;  // 600 s blocks
    uint64_t k_confirmations = 6;
    uint64_t dest_block_interval_us = 12'000'000;     // 12 s blocks
    uint64_t dest_finality_lag_us = 780'000'000;      // 780 s watermark lag
};

struct OutputConfig {
    std::string metrics_path;
    std::string log_path;
    ExportFormat format = ExportFormat::Json;
};

// Seeded description of one experiment. JSON form is versioned and strict:
// unknown fields are rejected at load.
struct ScenarioConfig {
    uint32_t version = 1;
    uint64_t seed = 1;
    double duration_s = 50.0;
    double traffic_kbps = 20.0;
    uint32_t committee_n = 4;
    QuorumMode quorum_mode = QuorumMode::Count2f1;
    std::string topology = "full_mesh";  // or "hub_spoke"
    uint32_t hub_count = 2;
    double link_distance_km = 5.0;
    std::vector<LinkSpec> links;  // optional explicit override of the mesh
    PacketConfig packet;
    ChannelConfig channel;
    ChainTimingConfig chains;
    ConsensusConfig consensus;
    double round_interval_s = 5.0;  // committee-experiment consensus cadence
    SignatureScheme scheme;
    std::vector<std::string> attacks;
    bool research_mode = false;
    OutputConfig output;

    uint64_t duration_us() const { return static_cast<uint64_t>(std::llround(duration_s * 1e6)); }
    double traffic_bps() const { return traffic_kbps * 1000.0; }

    void validate() const {
        if (version != 1) throw ConfigError("scenario: unsupported version");
        if (duration_s <= 0.0) throw ConfigError("scenario: duration_s must be positive");
        if (traffic_kbps <= 0.0) throw ConfigError("scenario: traffic_kbps must be positive");
        if (committee_n < 1) throw ConfigError("scenario: committee_n must be at least 1");
        if (packet.payload_bits == 0) throw ConfigError("scenario: packet payload must be non-zero");
        if (packet.interval_us == 0) throw ConfigError("scenario: packet interval must be non-zero");
        if (packet.mac_key_bits != kMacKeyBits)
            throw ConfigError("scenario: the MAC construction uses exactly 256 key bits");
        if (channel.fit_points.size() < 2) throw ConfigError("scenario: need >= 2 channel fit points");
        if (channel.buffer_capacity_bits == 0) throw ConfigError("scenario: zero buffer capacity");
        if (topology != "full_mesh" && topology != "hub_spoke")
            throw ConfigError("scenario: topology must be full_mesh or hub_spoke");
        if (topology == "hub_spoke") {
            if (hub_count < 1) throw ConfigError("scenario: hub_spoke needs at least one hub");
            if (hub_count >= committee_n)
                throw ConfigError("scenario: hub_spoke needs at least one non-hub validator");
        }
        if (chains.k_confirmations == 0) throw ConfigError("scenario: k_confirmations must be >= 1");
        if (consensus.max_rounds == 0) throw ConfigError("scenario: max_rounds must be >= 1");
        if (round_interval_s <= 0.0) throw ConfigError("scenario: round_interval_s must be positive");
        if (scheme.signature_size == 0 || scheme.public_key_size == 0)
            throw ConfigError("scenario: signature sizes must be non-zero");
    }
};

// ---------------------------------------------------------------------------
// JSON (strict)
// ---------------------------------------------------------------------------

namespace detail {

inline void require_keys(const ordered_json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!j.is_object()) throw ConfigError("scenario: " + where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key))
            throw ConfigError("scenario: unknown field '" + key + "' in " + where);
    }
}

template <typename T>
void get_if(const ordered_json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline uint64_t ms_to_us(double ms) { return static_cast<uint64_t>(std::llround(ms * 1000.0)); }
inline uint64_t s_to_us(double s) { return static_cast<uint64_t>(std::llround(s * 1e6)); }

}  // namespace detail

inline QuorumMode quorum_mode_from_string(const std::string& s) {
    if (s == "count_2f1") return QuorumMode::Count2f1;
    if (s == "weight_supermajority") return QuorumMode::WeightSupermajority;
    throw ConfigError("scenario: unknown quorum_mode '" + s + "'");
}

inline const char* to_string(QuorumMode m) {
    return m == QuorumMode::Count2f1 ? "count_2f1" : "weight_supermajority";
}

inline ExportFormat format_from_string(const std::string& s) {
    if (s == "json") return ExportFormat::Json;
    if (s == "csv") return ExportFormat::Csv;
    throw ConfigError("scenario: unknown format '" + s + "'");
}

inline const char* to_string(ExportFormat f) { return f == ExportFormat::Json ? "json" : "csv"; }

inline SchemeId scheme_from_string(const std::string& s) {
    if (s == "mock") return SchemeId::MockDeterministic;
    if (s == "lattice_provider") return SchemeId::LatticeProvider;
    throw ConfigError("scenario: unknown signature scheme '" + s + "'");
}

inline ScenarioConfig scenario_from_json(const ordered_json& j) {
    using namespace detail;
    require_keys(j, {"version", "seed", "duration_s", "traffic_kbps", "committee_n", "quorum_mode",
                     "topology", "hub_count", "link_distance_km", "links", "channel", "packet",
                     "chains", "consensus", "round_interval_s", "signature", "attacks",
                     "research_mode", "output"},
                 "scenario");
    ScenarioConfig cfg;
    get_if(j, "version", cfg.version);
    get_if(j, "seed", cfg.seed);
    get_if(j, "duration_s", cfg.duration_s);
    get_if(j, "traffic_kbps", cfg.traffic_kbps);
    get_if(j, "committee_n", cfg.committee_n);
    if (j.contains("quorum_mode"))
        cfg.quorum_mode = quorum_mode_from_string(j.at("quorum_mode").get<std::string>());
    get_if(j, "topology", cfg.topology);
    get_if(j, "hub_count", cfg.hub_count);
    get_if(j, "link_distance_km", cfg.link_distance_km);
    if (j.contains("links")) {
        for (const auto& lj : j.at("links")) {
            require_keys(lj, {"a", "b", "distance_km"}, "links[]");
            LinkSpec spec;
            get_if(lj, "a", spec.a);
            get_if(lj, "b", spec.b);
            get_if(lj, "distance_km", spec.distance_km);
            cfg.links.push_back(spec);
        }
    }
    if (j.contains("channel")) {
        const auto& cj = j.at("channel");
        require_keys(cj, {"fit_points", "buffer_capacity_bits", "generation_start_delay_ms"},
                     "channel");
        if (cj.contains("fit_points")) {
            cfg.channel.fit_points.clear();
            for (const auto& p : cj.at("fit_points")) {
                if (!p.is_array() || p.size() != 2)
                    throw ConfigError("scenario: fit_points entries are [distance_km, rate_bps]");
                cfg.channel.fit_points.emplace_back(p[0].get<double>(), p[1].get<double>());
            }
        }
        get_if(cj, "buffer_capacity_bits", cfg.channel.buffer_capacity_bits);
        if (cj.contains("generation_start_delay_ms"))
            cfg.channel.generation_start_delay_us =
                ms_to_us(cj.at("generation_start_delay_ms").get<double>());
    }
    if (j.contains("packet")) {
        const auto& pj = j.at("packet");
        require_keys(pj, {"payload_bits", "interval_ms", "mac_key_bits"}, "packet");
        get_if(pj, "payload_bits", cfg.packet.payload_bits);
        if (pj.contains("interval_ms"))
            cfg.packet.interval_us = ms_to_us(pj.at("interval_ms").get<double>());
        get_if(pj, "mac_key_bits", cfg.packet.mac_key_bits);
    }
    if (j.contains("chains")) {
        const auto& cj = j.at("chains");
        require_keys(cj, {"source_block_interval_s", "k_confirmations", "dest_block_interval_s",
                          "dest_finality_lag_s"},
                     "chains");
        if (cj.contains("source_block_interval_s"))
            cfg.chains.source_block_interval_us =
                s_to_us(cj.at("source_block_interval_s").get<double>());
        get_if(cj, "k_confirmations", cfg.chains.k_confirmations);
        if (cj.contains("dest_block_interval_s"))
            cfg.chains.dest_block_interval_us = s_to_us(cj.at("dest_block_interval_s").get<double>());
        if (cj.contains("dest_finality_lag_s"))
            cfg.chains.dest_finality_lag_us = s_to_us(cj.at("dest_finality_lag_s").get<double>());
    }
    if (j.contains("consensus")) {
        const auto& cj = j.at("consensus");
        require_keys(cj, {"phase_slot_ms", "phase_timeout_ms", "max_rounds", "link_delay_ms",
                          "sign_cost_ms", "verify_cost_ms", "seal_cost_ms", "aggregate_cost_ms"},
                     "consensus");
        if (cj.contains("phase_slot_ms"))
            cfg.consensus.phase_slot_us = ms_to_us(cj.at("phase_slot_ms").get<double>());
        if (cj.contains("phase_timeout_ms"))
            cfg.consensus.phase_timeout_us = ms_to_us(cj.at("phase_timeout_ms").get<double>());
        get_if(cj, "max_rounds", cfg.consensus.max_rounds);
        if (cj.contains("link_delay_ms"))
            cfg.consensus.link_delay_us = ms_to_us(cj.at("link_delay_ms").get<double>());
        if (cj.contains("sign_cost_ms"))
            cfg.consensus.sign_cost_us = ms_to_us(cj.at("sign_cost_ms").get<double>());
        if (cj.contains("verify_cost_ms"))
            cfg.consensus.verify_cost_us = ms_to_us(cj.at("verify_cost_ms").get<double>());
        if (cj.contains("seal_cost_ms"))
            cfg.consensus.seal_cost_us = ms_to_us(cj.at("seal_cost_ms").get<double>());
        if (cj.contains("aggregate_cost_ms"))
            cfg.consensus.aggregate_cost_us = ms_to_us(cj.at("aggregate_cost_ms").get<double>());
    }
    get_if(j, "round_interval_s", cfg.round_interval_s);
    if (j.contains("signature")) {
        const auto& sj = j.at("signature");
        require_keys(sj, {"scheme", "signature_size", "public_key_size"}, "signature");
        if (sj.contains("scheme")) cfg.scheme.id = scheme_from_string(sj.at("scheme").get<std::string>());
        get_if(sj, "signature_size", cfg.scheme.signature_size);
        get_if(sj, "public_key_size", cfg.scheme.public_key_size);
    }
    if (j.contains("attacks")) {
        for (const auto& a : j.at("attacks")) cfg.attacks.push_back(a.get<std::string>());
    }
    get_if(j, "research_mode", cfg.research_mode);
    if (j.contains("output")) {
        const auto& oj = j.at("output");
        require_keys(oj, {"metrics_path", "log_path", "format"}, "output");
        get_if(oj, "metrics_path", cfg.output.metrics_path);
        get_if(oj, "log_path", cfg.output.log_path);
        if (oj.contains("format"))
            cfg.output.format = format_from_string(oj.at("format").get<std::string>());
    }
    cfg.validate();
    return cfg;
}

inline ordered_json scenario_to_json(const ScenarioConfig& cfg) {
    ordered_json j;
    j["version"] = cfg.version;
    j["seed"] = cfg.seed;
    j["duration_s"] = cfg.duration_s;
    j["traffic_kbps"] = cfg.traffic_kbps;
    j["committee_n"] = cfg.committee_n;
    j["quorum_mode"] = to_string(cfg.quorum_mode);
    j["topology"] = cfg.topology;
    j["hub_count"] = cfg.hub_count;
    j["link_distance_km"] = cfg.link_distance_km;
    if (!cfg.links.empty()) {
        ordered_json links = ordered_json::array();
        for (const LinkSpec& l : cfg.links)
            links.push_back({{"a", l.a}, {"b", l.b}, {"distance_km", l.distance_km}});
        j["links"] = links;
    }
    j["channel"] = {{"fit_points", cfg.channel.fit_points},
                    {"buffer_capacity_bits", cfg.channel.buffer_capacity_bits},
                    {"generation_start_delay_ms", cfg.channel.generation_start_delay_us / 1000.0}};
    j["packet"] = {{"payload_bits", cfg.packet.payload_bits},
                   {"interval_ms", cfg.packet.interval_us / 1000.0},
                   {"mac_key_bits", cfg.packet.mac_key_bits}};
    j["chains"] = {{"source_block_interval_s", cfg.chains.source_block_interval_us / 1e6},
                   {"k_confirmations", cfg.chains.k_confirmations},
                   {"dest_block_interval_s", cfg.chains.dest_block_interval_us / 1e6},
                   {"dest_finality_lag_s", cfg.chains.dest_finality_lag_us / 1e6}};
    j["consensus"] = {{"phase_slot_ms", cfg.consensus.phase_slot_us / 1000.0},
                      {"phase_timeout_ms", cfg.consensus.phase_timeout_us / 1000.0},
                      {"max_rounds", cfg.consensus.max_rounds},
                      {"link_delay_ms", cfg.consensus.link_delay_us / 1000.0},
                      {"sign_cost_ms", cfg.consensus.sign_cost_us / 1000.0},
                      {"verify_cost_ms", cfg.consensus.verify_cost_us / 1000.0},
                      {"seal_cost_ms", cfg.consensus.seal_cost_us / 1000.0},
                      {"aggregate_cost_ms", cfg.consensus.aggregate_cost_us / 1000.0}};
    j["round_interval_s"] = cfg.round_interval_s;
    j["signature"] = {{"scheme", cfg.scheme.id == SchemeId::MockDeterministic ? "mock"
                                                                              : "lattice_provider"},
                      {"signature_size", cfg.scheme.signature_size},
                      {"public_key_size", cfg.scheme.public_key_size}};
    j["attacks"] = cfg.attacks;
    j["research_mode"] = cfg.research_mode;
    j["output"] = {{"metrics_path", cfg.output.metrics_path},
                   {"log_path", cfg.output.log_path},
                   {"format", to_string(cfg.output.format)}};
    return j;
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("scenario: cannot open " + path);
    ordered_json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: JSON parse error: ") + e.what());
    }
    try {
        return scenario_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: invalid field type: ") + e.what());
    }
}

}  // namespace qlink
