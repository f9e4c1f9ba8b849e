// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlink/common.hpp"

namespace qlink {

// Measured outputs of one experiment run. `bits_consumed` counts the key
// bits spent on application payload pads; MAC-key spending is reported
// separately and both add up in `key_bits_consumed_total`, which matches the
// link ledgers exactly.
struct Metrics {
    std::string experiment;
    double distance_km = 0.0;
    double duration_s = 0.0;
    double traffic_kbps = 0.0;
    double key_rate_bps = 0.0;
    uint64_t bits_generated = 0;
    uint64_t bits_consumed = 0;
    uint64_t mac_key_bits_consumed = 0;
    uint64_t key_bits_consumed_total = 0;
    double surplus_ratio = 0.0;
    uint64_t packets_sent = 0;
    uint64_t packets_delivered = 0;
    uint64_t missed_packets = 0;
    double utilization_pct = 0.0;
    double per_round_latency_s = 0.0;
    double crypto_overhead_s = 0.0;
    double per_signature_cost_s = 0.0;
    double end_to_end_latency_s = 0.0;
    uint64_t proof_bundle_bytes = 0;
    bool sustainable = true;
    uint64_t rounds_finalized = 0;
    uint64_t rounds_failed = 0;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

enum class ExportFormat { Json, Csv };

inline ordered_json metrics_to_json(const Metrics& m) {
    ordered_json j;
    j["experiment"] = m.experiment;
    j["distance_km"] = m.distance_km;
    j["duration_s"] = m.duration_s;
    j["traffic_kbps"] = m.traffic_kbps;
    j["key_rate_bps"] = m.key_rate_bps;
    j["bits_generated"] = m.bits_generated;
    j["bits_consumed"] = m.bits_consumed;
    j["mac_key_bits_consumed"] = m.mac_key_bits_consumed;
    j["key_bits_consumed_total"] = m.key_bits_consumed_total;
    j["surplus_ratio"] = m.surplus_ratio;
    j["packets_sent"] = m.packets_sent;
    j["packets_delivered"] = m.packets_delivered;
    j["missed_packets"] = m.missed_packets;
    j["utilization_pct"] = m.utilization_pct;
    j["per_round_latency_s"] = m.per_round_latency_s;
    j["crypto_overhead_s"] = m.crypto_overhead_s;
    j["per_signature_cost_s"] = m.per_signature_cost_s;
    j["end_to_end_latency_s"] = m.end_to_end_latency_s;
    j["proof_bundle_bytes"] = m.proof_bundle_bytes;
    j["sustainable"] = m.sustainable;
    j["rounds_finalized"] = m.rounds_finalized;
    j["rounds_failed"] = m.rounds_failed;
    return j;
}

inline Metrics metrics_from_json(const ordered_json& j) {
    Metrics m;
    m.experiment = j.at("experiment").get<std::string>();
    m.distance_km = j.at("distance_km").get<double>();
    m.duration_s = j.at("duration_s").get<double>();
    m.traffic_kbps = j.at("traffic_kbps").get<double>();
    m.key_rate_bps = j.at("key_rate_bps").get<double>();
    m.bits_generated = j.at("bits_generated").get<uint64_t>();
    m.bits_consumed = j.at("bits_consumed").get<uint64_t>();
    m.mac_key_bits_consumed = j.at("mac_key_bits_consumed").get<uint64_t>();
    m.key_bits_consumed_total = j.at("key_bits_consumed_total").get<uint64_t>();
    m.surplus_ratio = j.at("surplus_ratio").get<double>();
    m.packets_sent = j.at("packets_sent").get<uint64_t>();
    m.packets_delivered = j.at("packets_delivered").get<uint64_t>();
    m.missed_packets = j.at("missed_packets").get<uint64_t>();
    m.utilization_pct = j.at("utilization_pct").get<double>();
    m.per_round_latency_s = j.at("per_round_latency_s").get<double>();
    m.crypto_overhead_s = j.at("crypto_overhead_s").get<double>();
    m.per_signature_cost_s = j.at("per_signature_cost_s").get<double>();
    m.end_to_end_latency_s = j.at("end_to_end_latency_s").get<double>();
    m.proof_bundle_bytes = j.at("proof_bundle_bytes").get<uint64_t>();
    m.sustainable = j.at("sustainable").get<bool>();
    m.rounds_finalized = j.at("rounds_finalized").get<uint64_t>();
    m.rounds_failed = j.at("rounds_failed").get<uint64_t>();
    return m;
}

namespace detail {
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

inline std::string metrics_csv_header() {
    return "experiment,distance_km,duration_s,traffic_kbps,key_rate_bps,bits_generated,"
           "bits_consumed,mac_key_bits_consumed,key_bits_consumed_total,surplus_ratio,"
           "packets_sent,packets_delivered,missed_packets,utilization_pct,per_round_latency_s,"
           "crypto_overhead_s,per_signature_cost_s,end_to_end_latency_s,proof_bundle_bytes,"
           "sustainable,rounds_finalized,rounds_failed";
}

inline std::string metrics_csv_row(const Metrics& m) {
    using detail::fmt_double;
    std::string row;
    row += m.experiment;
    row += ',' + fmt_double(m.distance_km);
    row += ',' + fmt_double(m.duration_s);
    row += ',' + fmt_double(m.traffic_kbps);
    row += ',' + fmt_double(m.key_rate_bps);
    row += ',' + std::to_string(m.bits_generated);
    row += ',' + std::to_string(m.bits_consumed);
    row += ',' + std::to_string(m.mac_key_bits_consumed);
    row += ',' + std::to_string(m.key_bits_consumed_total);
    row += ',' + fmt_double(m.surplus_ratio);
    row += ',' + std::to_string(m.packets_sent);
    row += ',' + std::to_string(m.packets_delivered);
    row += ',' + std::to_string(m.missed_packets);
    row += ',' + fmt_double(m.utilization_pct);
    row += ',' + fmt_double(m.per_round_latency_s);
    row += ',' + fmt_double(m.crypto_overhead_s);
    row += ',' + fmt_double(m.per_signature_cost_s);
    row += ',' + fmt_double(m.end_to_end_latency_s);
    row += ',' + std::to_string(m.proof_bundle_bytes);
    row += ',' + std::string(m.sustainable ? "true" : "false");
    row += ',' + std::to_string(m.rounds_finalized);
    row += ',' + std::to_string(m.rounds_failed);
    return row;
}

inline std::string render_metrics(std::span<const Metrics> all, ExportFormat format) {
    if (format == ExportFormat::Csv) {
        std::string out = metrics_csv_header() + "\n";
        for (const Metrics& m : all) out += metrics_csv_row(m) + "\n";
        return out;
    }
    ordered_json arr = ordered_json::array();
    for (const Metrics& m : all) arr.push_back(metrics_to_json(m));
    return arr.dump(2) + "\n";
}

inline void export_metrics(std::span<const Metrics> all, ExportFormat format,
                           const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("export_metrics: cannot open " + path);
    f << render_metrics(all, format);
    if (!f) throw IoError("export_metrics: write failed for " + path);
}

}  // namespace qlink
