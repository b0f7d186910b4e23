#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace espice {

// Flat `key = value` config file. Lines starting with '#' are comments.
// Keys are case-sensitive; later assignments override earlier ones.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig from_file(const std::string& path);
    static KvConfig from_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& def) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long def) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;

    // Comma-separated list values.
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    // All keys with the given prefix, in lexicographic order (`rule.0`, `rule.1`, ...).
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::string origin_;
    std::map<std::string, std::string> values_;

    [[noreturn]] void fail(const std::string& key, const std::string& why) const;
};

// Split "a,b,c" into trimmed tokens; empty input yields an empty list.
std::vector<std::string> split_csv(const std::string& s);
std::string trim(const std::string& s);

} // namespace espice
