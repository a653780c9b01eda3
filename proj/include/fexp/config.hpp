#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fexp::config {

// Flat `key = value` configuration with dotted section prefixes, e.g.
// `expander.mode = local`. Lines starting with # are comments. Every key
// must be consumed by the subcommand; leftovers are reported with their
// line numbers.
class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;
    uint64_t get_seed(const std::string& key) const;  // mandatory, no wall-clock fallback
    bool get_bool(const std::string& key, bool fallback) const;
    // comma-separated doubles
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;

    // overrides from the command line (seed / out directory)
    void set(const std::string& key, const std::string& value);

    // Throws ConfigError naming any key that was never read.
    void check_consumed() const;

    const std::string& origin() const { return origin_; }

  private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool used = false;
    };
    std::map<std::string, Entry> entries_;
    std::string origin_;

    const Entry* find(const std::string& key) const;
    const Entry& require(const std::string& key) const;
};

}  // namespace fexp::config
