#pragma once

#include <fstream>
#include <map>
#include <string>

#include "toolgraph/errors.hpp"
#include "toolgraph/lifecycle.hpp"

namespace toolgraph {

// Settings a key=value config file can carry, on top of PipelineConfig.
struct Settings {
    PipelineConfig pipeline;
    std::string checker_command;       // empty: no-op bug-free check
    std::string provider = "stub";     // "stub" or "remote"
    std::string remote_url;
    std::string remote_model;
    std::string api_key_env;           // environment variable naming the key
    int remote_timeout_ms = 30000;
    int remote_retries = 2;
};

namespace detail {

inline std::string strip(const std::string& text) {
    size_t begin = text.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = text.find_last_not_of(" \t\r");
    return text.substr(begin, end - begin + 1);
}

inline double parse_number(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double parsed = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        throw Error(ErrorCode::invalid_config, key + " is not a number: " + value);
    }
}

inline bool parse_flag(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw Error(ErrorCode::invalid_config, key + " is not a flag: " + value);
}

} // namespace detail

// key=value lines; # starts a comment; unknown keys rejected.
inline Settings parse_settings(std::istream& in) {
    Settings settings;
    std::string line;
    while (std::getline(in, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string stripped = detail::strip(line);
        if (stripped.empty()) continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::invalid_config, "expected key=value, got: " + stripped);
        const std::string key = detail::strip(stripped.substr(0, eq));
        const std::string value = detail::strip(stripped.substr(eq + 1));

        if (key == "d" || key == "damping") {
            settings.pipeline.damping = detail::parse_number(key, value);
        } else if (key == "k") {
            settings.pipeline.k = static_cast<int>(detail::parse_number(key, value));
        } else if (key == "theta" || key == "merge_threshold") {
            settings.pipeline.merge_threshold = detail::parse_number(key, value);
        } else if (key == "max_checks") {
            settings.pipeline.max_checks = static_cast<int>(detail::parse_number(key, value));
        } else if (key == "prune_period") {
            settings.pipeline.prune_period = static_cast<int>(detail::parse_number(key, value));
        } else if (key == "match") {
            settings.pipeline.scoring.match = detail::parse_number(key, value);
        } else if (key == "mismatch") {
            settings.pipeline.scoring.mismatch = detail::parse_number(key, value);
        } else if (key == "gap") {
            settings.pipeline.scoring.gap = detail::parse_number(key, value);
        } else if (key == "usage_mode") {
            if (value != "window" && value != "lifetime")
                throw Error(ErrorCode::invalid_config, "usage_mode must be window or lifetime");
            settings.pipeline.lifetime_usage = value == "lifetime";
        } else if (key == "checker_command") {
            settings.checker_command = value;
        } else if (key == "provider") {
            if (value != "stub" && value != "remote")
                throw Error(ErrorCode::invalid_config, "provider must be stub or remote");
            settings.provider = value;
        } else if (key == "remote_url") {
            settings.remote_url = value;
        } else if (key == "remote_model") {
            settings.remote_model = value;
        } else if (key == "api_key_env") {
            settings.api_key_env = value;
        } else if (key == "remote_timeout_ms") {
            settings.remote_timeout_ms = static_cast<int>(detail::parse_number(key, value));
        } else if (key == "remote_retries") {
            settings.remote_retries = static_cast<int>(detail::parse_number(key, value));
        } else {
            throw Error(ErrorCode::invalid_config, "unknown config key: " + key);
        }
    }
    return settings;
}

inline Settings load_settings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open config " + path);
    return parse_settings(in);
}

} // namespace toolgraph
