#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "uwofdm/channel.hpp"
#include "uwofdm/errors.hpp"
#include "uwofdm/fec.hpp"
#include "uwofdm/frame.hpp"
#include "uwofdm/txchain.hpp"

namespace uwofdm {

/**
 * Flat key/value configuration. Grammar, one entry per line:
 *
 *   # comment
 *   key = scalar
 *   key = [item, item, ...]
 *
 * Keys must be unique and known (see ToolkitConfig); anything else is an error.
 */
struct ConfigEntry {
    std::vector<std::string> items;
    bool is_array = false;
    int line = 0;
};

using ConfigEntries = std::map<std::string, ConfigEntry>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace detail

inline ConfigEntries parse_config_text(std::string_view text) {
    ConfigEntries out;
    std::istringstream is{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) {
            raw.erase(hash);
        }
        const std::string line = detail::trim(raw);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw invalid_config_error("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = detail::trim(std::string_view(line).substr(0, eq));
        std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) {
            throw invalid_config_error("config line " + std::to_string(line_no) + ": empty key");
        }
        if (out.contains(key)) {
            throw invalid_config_error("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        ConfigEntry entry;
        entry.line = line_no;
        if (!value.empty() && value.front() == '[') {
            if (value.back() != ']') {
                throw invalid_config_error("config line " + std::to_string(line_no) + ": unterminated array");
            }
            entry.is_array = true;
            std::string body = value.substr(1, value.size() - 2);
            std::istringstream items(body);
            std::string item;
            while (std::getline(items, item, ',')) {
                item = detail::trim(item);
                if (!item.empty()) {
                    entry.items.push_back(item);
                }
            }
        } else {
            if (value.empty()) {
                throw invalid_config_error("config line " + std::to_string(line_no) + ": missing value for '" + key +
                                           "'");
            }
            entry.items.push_back(value);
        }
        out.emplace(key, std::move(entry));
    }
    return out;
}

enum class SystemKind { uw_lmmse, uw_zf, cp };

inline std::string to_string(SystemKind s) {
    switch (s) {
    case SystemKind::uw_lmmse: return "uw-lmmse";
    case SystemKind::uw_zf: return "uw-zf";
    case SystemKind::cp: return "cp";
    }
    return "?";
}

/// Everything the CLI and the sweep engine need.
struct ToolkitConfig {
    OfdmSystemConfig system = paper_config();
    UwKind uw_kind = UwKind::chirp;

    double rms_delay_spread = 100e-9;
    int channel_taps = 16;
    std::string channel = "ensemble";  ///< ensemble | flat | fixed:<path>
    bool channel_floor = false;

    std::vector<SystemKind> systems{SystemKind::uw_lmmse, SystemKind::cp};
    std::vector<double> ebn0_db{0.0, 5.0, 10.0, 15.0, 20.0};
    CodeRate code_rate = CodeRate::none;
    long min_errors = 200;
    long max_bits = 10'000'000;
    int frame_symbols = 10;
    std::uint64_t seed = 1;

    double snapshot_notch_db = default_notch_threshold_db;
    int snapshot_notches = 2;
    long snapshot_budget = 100000;

    double mse_ebn0_db = 15.0;
    long mse_symbols = 100000;

    PlacementStrategy placement_strategy = PlacementStrategy::greedy;

    /// Directory that relative fixture paths resolve against; not part of the hash.
    std::string base_dir;
};

namespace detail {

inline const ConfigEntry& scalar(const std::string& key, const ConfigEntry& e) {
    if (e.is_array || e.items.size() != 1) {
        throw invalid_config_error("config line " + std::to_string(e.line) + ": '" + key + "' expects a scalar");
    }
    return e;
}

inline long parse_long(const std::string& key, const std::string& s, int line) {
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        // accept 1e6-style integers
        char* end = nullptr;
        const double d = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size() || d != static_cast<double>(static_cast<long>(d))) {
            throw invalid_config_error("config line " + std::to_string(line) + ": '" + key + "' expects an integer, got '" +
                                       s + "'");
        }
        return static_cast<long>(d);
    }
    return v;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& s, int line) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
        throw invalid_config_error("config line " + std::to_string(line) + ": '" + key +
                                   "' expects an unsigned 64-bit integer, got '" + s + "'");
    }
    return v;
}

inline double parse_double(const std::string& key, const std::string& s, int line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw invalid_config_error("config line " + std::to_string(line) + ": '" + key + "' expects a number, got '" + s +
                                   "'");
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& s, int line) {
    if (s == "true" || s == "1") {
        return true;
    }
    if (s == "false" || s == "0") {
        return false;
    }
    throw invalid_config_error("config line " + std::to_string(line) + ": '" + key + "' expects true/false");
}

inline std::vector<int> parse_int_list(const std::string& key, const ConfigEntry& e) {
    std::vector<int> v;
    for (const auto& s : e.items) {
        v.push_back(static_cast<int>(parse_long(key, s, e.line)));
    }
    return v;
}

inline CodeRate parse_code_rate(const std::string& s, int line) {
    if (s == "none" || s == "1") {
        return CodeRate::none;
    }
    if (s == "1/2") {
        return CodeRate::half;
    }
    if (s == "3/4") {
        return CodeRate::three_quarters;
    }
    throw invalid_config_error("config line " + std::to_string(line) + ": code_rate must be none, 1/2 or 3/4");
}

inline SystemKind parse_system(const std::string& s, int line) {
    if (s == "uw-lmmse") {
        return SystemKind::uw_lmmse;
    }
    if (s == "uw-zf") {
        return SystemKind::uw_zf;
    }
    if (s == "cp") {
        return SystemKind::cp;
    }
    throw invalid_config_error("config line " + std::to_string(line) + ": unknown system '" + s +
                               "' (uw-lmmse, uw-zf, cp)");
}

} // namespace detail

inline ToolkitConfig config_from_entries(const ConfigEntries& entries) {
    using namespace detail;
    ToolkitConfig c;
    for (const auto& [key, e] : entries) {
        const int ln = e.line;
        auto one = [&]() -> const std::string& { return scalar(key, e).items.front(); };
        if (key == "dft_size") {
            c.system.dft_size = static_cast<int>(parse_long(key, one(), ln));
        } else if (key == "data_count") {
            c.system.data_count = static_cast<int>(parse_long(key, one(), ln));
        } else if (key == "uw_length") {
            c.system.uw_length = static_cast<int>(parse_long(key, one(), ln));
        } else if (key == "zero_subcarriers") {
            c.system.zero_subcarriers = parse_int_list(key, e);
        } else if (key == "redundant_subcarriers") {
            c.system.redundant_subcarriers = parse_int_list(key, e);
        } else if (key == "sample_rate") {
            c.system.sample_rate = parse_double(key, one(), ln);
        } else if (key == "data_variance") {
            c.system.data_variance = parse_double(key, one(), ln);
        } else if (key == "uw_energy_ratio") {
            c.system.uw_energy_ratio = parse_double(key, one(), ln);
        } else if (key == "uw_kind") {
            const auto& v = one();
            if (v == "chirp") {
                c.uw_kind = UwKind::chirp;
            } else if (v == "zero") {
                c.uw_kind = UwKind::zero;
            } else {
                throw invalid_config_error("config line " + std::to_string(ln) + ": uw_kind must be chirp or zero");
            }
        } else if (key == "rms_delay_spread") {
            c.rms_delay_spread = parse_double(key, one(), ln);
        } else if (key == "channel_taps") {
            c.channel_taps = static_cast<int>(parse_long(key, one(), ln));
        } else if (key == "channel") {
            c.channel = one();
        } else if (key == "channel_floor") {
            c.channel_floor = parse_bool(key, one(), ln);
        } else if (key == "systems") {
            c.systems.clear();
            for (const auto& s : e.items) {
                c.systems.push_back(parse_system(s, ln));
            }
        } else if (key == "ebn0_db") {
            c.ebn0_db.clear();
            for (const auto& s : e.items) {
                c.ebn0_db.push_back(parse_double(key, s, ln));
            }
        } else if (key == "code_rate") {
            c.code_rate = parse_code_rate(one(), ln);
        } else if (key == "min_errors") {
            c.min_errors = parse_long(key, one(), ln);
        } else if (key == "max_bits") {
            c.max_bits = parse_long(key, one(), ln);
        } else if (key == "frame_symbols") {
            c.frame_symbols = static_cast<int>(parse_long(key, one(), ln));
        } else if (key == "seed") {
            c.seed = parse_u64(key, one(), ln);
        } else if (key == "snapshot_notch_db") {
            c.snapshot_notch_db = parse_double(key, one(), ln);
        } else if (key == "snapshot_notches") {
            c.snapshot_notches = static_cast<int>(parse_long(key, one(), ln));
        } else if (key == "snapshot_budget") {
            c.snapshot_budget = parse_long(key, one(), ln);
        } else if (key == "mse_ebn0_db") {
            c.mse_ebn0_db = parse_double(key, one(), ln);
        } else if (key == "mse_symbols") {
            c.mse_symbols = parse_long(key, one(), ln);
        } else if (key == "placement_strategy") {
            const auto& v = one();
            if (v == "greedy") {
                c.placement_strategy = PlacementStrategy::greedy;
            } else if (v == "exhaustive") {
                c.placement_strategy = PlacementStrategy::exhaustive;
            } else {
                throw invalid_config_error("config line " + std::to_string(ln) +
                                           ": placement_strategy must be greedy or exhaustive");
            }
        } else {
            throw invalid_config_error("config line " + std::to_string(ln) + ": unknown key '" + key + "'");
        }
    }
    if (c.ebn0_db.empty()) {
        throw invalid_config_error("ebn0_db grid must not be empty");
    }
    if (c.systems.empty()) {
        throw invalid_config_error("systems list must not be empty");
    }
    if (c.min_errors < 1 || c.max_bits < 1) {
        throw invalid_config_error("min_errors and max_bits must be positive");
    }
    if (c.frame_symbols < 1) {
        throw invalid_config_error("frame_symbols must be positive");
    }
    if (c.channel_taps < 1 || c.channel_taps > c.system.dft_size) {
        throw invalid_config_error("channel_taps must lie in 1..dft_size");
    }
    if (!(c.rms_delay_spread > 0.0)) {
        throw invalid_config_error("rms_delay_spread must be positive");
    }
    if (c.mse_symbols < 1) {
        throw invalid_config_error("mse_symbols must be positive");
    }
    return c;
}

inline ToolkitConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw invalid_config_error("cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    ToolkitConfig c = config_from_entries(parse_config_text(ss.str()));
    c.base_dir = std::filesystem::path(path).parent_path().string();
    return c;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Canonical rendering of every effective setting; hashed into run metadata.
inline std::string canonical_text(const ToolkitConfig& c) {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto ints = [](const std::vector<int>& v) {
        std::string s = "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
            s += (i ? "," : "") + std::to_string(v[i]);
        }
        return s + "]";
    };
    os << "dft_size=" << c.system.dft_size << "\n"
       << "data_count=" << c.system.data_count << "\n"
       << "uw_length=" << c.system.uw_length << "\n"
       << "zero_subcarriers=" << ints(c.system.zero_subcarriers) << "\n"
       << "redundant_subcarriers=" << ints(c.system.redundant_subcarriers) << "\n"
       << "sample_rate=" << num(c.system.sample_rate) << "\n"
       << "data_variance=" << num(c.system.data_variance) << "\n"
       << "uw_energy_ratio=" << num(c.system.uw_energy_ratio) << "\n"
       << "uw_kind=" << (c.uw_kind == UwKind::chirp ? "chirp" : "zero") << "\n"
       << "rms_delay_spread=" << num(c.rms_delay_spread) << "\n"
       << "channel_taps=" << c.channel_taps << "\n"
       << "channel=" << c.channel << "\n"
       << "channel_floor=" << (c.channel_floor ? "true" : "false") << "\n";
    os << "systems=[";
    for (std::size_t i = 0; i < c.systems.size(); ++i) {
        os << (i ? "," : "") << to_string(c.systems[i]);
    }
    os << "]\nebn0_db=[";
    for (std::size_t i = 0; i < c.ebn0_db.size(); ++i) {
        os << (i ? "," : "") << num(c.ebn0_db[i]);
    }
    os << "]\n"
       << "code_rate=" << to_string(c.code_rate) << "\n"
       << "min_errors=" << c.min_errors << "\n"
       << "max_bits=" << c.max_bits << "\n"
       << "frame_symbols=" << c.frame_symbols << "\n"
       << "seed=" << c.seed << "\n"
       << "snapshot_notch_db=" << num(c.snapshot_notch_db) << "\n"
       << "snapshot_notches=" << c.snapshot_notches << "\n"
       << "snapshot_budget=" << c.snapshot_budget << "\n"
       << "mse_ebn0_db=" << num(c.mse_ebn0_db) << "\n"
       << "mse_symbols=" << c.mse_symbols << "\n"
       << "placement_strategy=" << (c.placement_strategy == PlacementStrategy::greedy ? "greedy" : "exhaustive")
       << "\n";
    return os.str();
}

inline std::string config_hash(const ToolkitConfig& c) { return hex64(fnv1a64(canonical_text(c))); }

} // namespace uwofdm
