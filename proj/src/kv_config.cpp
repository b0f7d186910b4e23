#include "espice/kv_config.hpp"

#include "espice/errors.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace espice {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

KvConfig KvConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
}

KvConfig KvConfig::from_string(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    cfg.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected `key = value` in " + origin, lineno);
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key in " + origin, lineno);
        cfg.values_[key] = val;
    }
    return cfg;
}

void KvConfig::fail(const std::string& key, const std::string& why) const {
    throw ConfigError(origin_ + ": key `" + key + "`: " + why);
}

std::string KvConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(key, "missing");
    return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

long long KvConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    long long r = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') fail(key, "not an integer: " + v);
    return r;
}

long long KvConfig::get_int(const std::string& key, long long def) const {
    return has(key) ? get_int(key) : def;
}

double KvConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') fail(key, "not a number: " + v);
    return r;
}

double KvConfig::get_double(const std::string& key, double def) const {
    return has(key) ? get_double(key) : def;
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
    if (!has(key)) return def;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    fail(key, "not a boolean: " + v);
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
    return split_csv(get_string(key));
}

std::vector<double> KvConfig::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : get_list(key)) {
        char* end = nullptr;
        double r = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') fail(key, "not a number in list: " + tok);
        out.push_back(r);
    }
    return out;
}

std::vector<std::string> KvConfig::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.push_back(it->first);
    }
    return out;
}

} // namespace espice
