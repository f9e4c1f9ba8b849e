// Copyright (c) 2026 The qlink-sim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlink/common.hpp"

namespace qlink {

using ordered_json = nlohmann::ordered_json;

// Append-only JSON-lines log of simulation events. Records are serialized at
// append time with fixed field order, so identical runs produce byte-identical
// logs. Timestamps must be non-decreasing.
class EventLog {
public:
    void append(uint64_t t_us, std::string_view kind, ordered_json fields = ordered_json::object()) {
        if (t_us < last_t_us_)
            throw InvalidParameter("EventLog: timestamps must be non-decreasing (" + std::string(kind) +
                                   ")");
        last_t_us_ = t_us;
        ordered_json rec;
        rec["t_us"] = t_us;
        rec["kind"] = std::string(kind);
        for (auto& [key, value] : fields.items()) rec[key] = value;
        lines_.push_back(rec.dump());
    }

    size_t size() const { return lines_.size(); }
    uint64_t last_t_us() const { return last_t_us_; }
    const std::vector<std::string>& lines() const { return lines_; }

    std::string to_jsonl() const {
        std::string out;
        for (const std::string& line : lines_) {
            out += line;
            out += '\n';
        }
        return out;
    }

    void write(const std::string& path) const {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("EventLog: cannot open " + path);
        f << to_jsonl();
        if (!f) throw IoError("EventLog: write failed for " + path);
    }

private:
    std::vector<std::string> lines_;
    uint64_t last_t_us_ = 0;
};

}  // namespace qlink
