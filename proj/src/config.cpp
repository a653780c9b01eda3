#include "fexp/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "fexp/errors.hpp"

namespace fexp::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_')) return false;
    return true;
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_string(ss.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected `key = value`, got `" + stripped + "`");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (!valid_key(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed key `" + key +
                              "`");
        if (cfg.entries_.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key `" + key +
                              "`");
        cfg.entries_[key] = Entry{value, lineno, false};
    }
    return cfg;
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

const Config::Entry* Config::find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
}

const Config::Entry& Config::require(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) throw ConfigError(origin_ + ": missing required key `" + key + "`");
    return *e;
}

std::string Config::get_string(const std::string& key) const { return require(key).value; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
    const Entry* e = find(key);
    return e ? e->value : fallback;
}

double Config::get_double(const std::string& key) const {
    const Entry& e = require(key);
    try {
        std::size_t pos = 0;
        const std::string v = e.value == "inf" ? "1e999" : e.value;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key `" + key +
                          "` is not a number: `" + e.value + "`");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long Config::get_int(const std::string& key) const {
    const Entry& e = require(key);
    try {
        std::size_t pos = 0;
        const long v = std::stol(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key `" + key +
                          "` is not an integer: `" + e.value + "`");
    }
}

long Config::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

uint64_t Config::get_seed(const std::string& key) const {
    const Entry& e = require(key);
    try {
        return static_cast<uint64_t>(std::stoull(e.value));
    } catch (...) {
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key `" + key +
                          "` is not a valid seed: `" + e.value + "`");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(origin_ + ": key `" + key + "` is not a boolean: `" + v + "`");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    const Entry& e = require(key);
    std::vector<double> out;
    std::string cur;
    std::istringstream is(e.value);
    while (std::getline(is, cur, ',')) {
        try {
            out.push_back(std::stod(trim(cur)));
        } catch (...) {
            throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key `" + key +
                              "` has a non-numeric entry: `" + cur + "`");
        }
    }
    if (out.empty())
        throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": key `" + key + "` is empty");
    return out;
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        std::vector<double> fallback) const {
    return has(key) ? get_doubles(key) : fallback;
}

void Config::set(const std::string& key, const std::string& value) {
    entries_[key] = Entry{value, 0, false};
}

void Config::check_consumed() const {
    for (const auto& [key, entry] : entries_) {
        if (!entry.used)
            throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": unknown key `" +
                              key + "`");
    }
}

}  // namespace fexp::config
