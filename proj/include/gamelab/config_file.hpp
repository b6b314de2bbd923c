#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gamelab/errors.hpp"
#include "gamelab/params.hpp"

namespace gamelab {

// ---- key/value config text ("key = value" lines, '#' comments) ----

struct ConfigMap {
    std::vector<std::pair<std::string, std::string>> entries;  // later entries win

    bool has(const std::string& key) const {
        for (auto it = entries.rbegin(); it != entries.rend(); ++it)
            if (it->first == key) return true;
        return false;
    }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        for (auto it = entries.rbegin(); it != entries.rend(); ++it)
            if (it->first == key) return it->second;
        return fallback;
    }

    void set(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
};

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline ConfigMap parse_config_text(const std::string& text) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::bad_config, "line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) fail(ErrorCode::bad_config, "line " + std::to_string(lineno) + ": empty key");
        cfg.set(key, value);
    }
    return cfg;
}

inline ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

// Applies one "key=value" override string (the CLI --set flag).
inline void apply_override(ConfigMap& cfg, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCode::bad_config, "override must look like key=value: " + kv);
    cfg.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

// ---- typed value parsing ----

inline double parse_double(const std::string& s, const std::string& key) {
    const std::string t = trim(s);
    if (t.empty()) fail(ErrorCode::bad_config, key + ": empty number");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) fail(ErrorCode::bad_config, key + ": not a number: " + s);
    return v;
}

inline long long parse_int(const std::string& s, const std::string& key) {
    const std::string t = trim(s);
    if (t.empty()) fail(ErrorCode::bad_config, key + ": empty integer");
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size()) fail(ErrorCode::bad_config, key + ": not an integer: " + s);
    return v;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        if (trim(item).empty()) continue;
        out.push_back(parse_double(item, key));
    }
    return out;
}

// "lag:weight, lag:weight, ..." atoms of the delay measure.
inline std::vector<DelayAtom> parse_measure(const std::string& s, const std::string& key) {
    std::vector<DelayAtom> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        const auto colon = t.find(':');
        if (colon == std::string::npos) fail(ErrorCode::bad_config, key + ": atom must look like lag:weight");
        out.push_back(DelayAtom{parse_double(t.substr(0, colon), key), parse_double(t.substr(colon + 1), key)});
    }
    return out;
}

// Keys understood by params_from_config.
inline const std::vector<std::string>& game_param_keys() {
    static const std::vector<std::string> keys = {
        "n_players", "sigma", "q", "epsilon", "c", "horizon", "delay", "initial_reserves", "delay_measure",
    };
    return keys;
}

// Builds GameParams from a config map; unrelated keys are left untouched for
// the caller. Does not validate (use validate_params afterwards).
inline GameParams params_from_config(const ConfigMap& cfg) {
    GameParams p;
    if (cfg.has("n_players")) p.n_players = static_cast<int>(parse_int(cfg.get("n_players"), "n_players"));
    if (cfg.has("sigma")) p.sigma = parse_double(cfg.get("sigma"), "sigma");
    if (cfg.has("q")) p.q = parse_double(cfg.get("q"), "q");
    if (cfg.has("epsilon")) p.epsilon = parse_double(cfg.get("epsilon"), "epsilon");
    if (cfg.has("c")) p.c = parse_double(cfg.get("c"), "c");
    if (cfg.has("horizon")) p.horizon = parse_double(cfg.get("horizon"), "horizon");
    if (cfg.has("delay")) p.delay = parse_double(cfg.get("delay"), "delay");
    if (cfg.has("initial_reserves")) p.initial_reserves = parse_double_list(cfg.get("initial_reserves"), "initial_reserves");
    if (cfg.has("delay_measure")) p.delay_measure = parse_measure(cfg.get("delay_measure"), "delay_measure");
    return p;
}

}  // namespace gamelab
