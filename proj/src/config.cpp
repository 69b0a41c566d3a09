#include "replab/config.hpp"

#include "replab/text_io.hpp"

namespace replab {

KeyValueConfig KeyValueConfig::parse_text(std::string_view text) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    for (const auto& raw_line : split(text, '\n')) {
        ++line_no;
        const std::string_view line = trim(raw_line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected 'key = value', got '" + std::string(line) + "'");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        }
        if (cfg.entries_.count(key) != 0) {
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
        }
        cfg.entries_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    try {
        return parse_text(read_text_file(path));
    } catch (const std::runtime_error& e) {
        throw ConfigError(std::string(e.what()));
    }
}

void KeyValueConfig::apply_overrides(std::string_view comma_separated) {
    if (trim(comma_separated).empty()) {
        return;
    }
    for (const auto& pair : split(comma_separated, ',')) {
        const std::string_view p = trim(pair);
        const std::size_t eq = p.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("override must be key=value, got '" + std::string(p) + "'");
        }
        const std::string key(trim(p.substr(0, eq)));
        const std::string value(trim(p.substr(eq + 1)));
        if (key.empty()) {
            throw ConfigError("override with empty key: '" + std::string(p) + "'");
        }
        entries_[key] = value;
    }
}

void KeyValueConfig::require_known_keys(const std::set<std::string>& known) const {
    std::string unknown;
    for (const auto& [key, value] : entries_) {
        (void)value;
        if (known.count(key) == 0) {
            if (!unknown.empty()) {
                unknown += ", ";
            }
            unknown += key;
        }
    }
    if (!unknown.empty()) {
        throw ConfigError("unknown config keys: " + unknown);
    }
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KeyValueConfig::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError("missing config key: " + key);
    }
    return it->second;
}

namespace {

template <class F>
auto parse_or_config_error(const std::string& key, const std::string& value, F&& parse) {
    try {
        return parse(value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("config key '" + key + "': " + e.what());
    }
}

}  // namespace

double KeyValueConfig::get_double(const std::string& key) const {
    return parse_or_config_error(key, get_string(key),
                                 [](const std::string& v) { return parse_double(v); });
}

int64_t KeyValueConfig::get_int64(const std::string& key) const {
    return parse_or_config_error(key, get_string(key),
                                 [](const std::string& v) { return parse_int64(v); });
}

bool KeyValueConfig::get_bool(const std::string& key) const {
    return parse_or_config_error(key, get_string(key),
                                 [](const std::string& v) { return parse_bool(v); });
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int64_t KeyValueConfig::get_int64(const std::string& key, int64_t fallback) const {
    return has(key) ? get_int64(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

}  // namespace replab
