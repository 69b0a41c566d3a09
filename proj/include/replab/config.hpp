#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace replab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key-value configuration: one `key = value` per line, full-line
// comments starting with '#', blank lines ignored. Keys are unique.
class KeyValueConfig {
public:
    static KeyValueConfig parse_text(std::string_view text);
    static KeyValueConfig parse_file(const std::string& path);

    // Applies comma-separated `key=value` pairs on top of the file values.
    void apply_overrides(std::string_view comma_separated);

    // Rejects any key outside `known`; the error lists every unknown key.
    void require_known_keys(const std::set<std::string>& known) const;

    bool has(const std::string& key) const;

    // Required getters throw ConfigError when the key is missing or malformed.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    int64_t get_int64(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Defaulted getters.
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int64_t get_int64(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace replab
