#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lain {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ConfigType { Int, Real, Bool, Text, IntList, TextList };

// Flat key=value configuration. Every key has a typed default; values are
// stored in canonical text form so equal settings hash equally.
class RunConfig {
public:
    RunConfig();

    // Applies "key = value" lines; '#' starts a comment. `origin` prefixes errors.
    void apply_text(const std::string& text, const std::string& origin);
    // Applies one "key=value" override.
    void apply_override(const std::string& assignment);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    long long get_int(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    std::uint64_t get_seed(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    const std::string& get_text(const std::string& key) const;
    std::vector<std::size_t> get_size_list(const std::string& key) const;
    std::vector<std::string> get_text_list(const std::string& key) const;

    // Sorted "key=value" lines.
    std::string canonical() const;
    std::uint64_t digest() const;
    std::string digest_hex() const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    void set(const std::string& key, const std::string& raw, const std::string& where);
    const std::string& raw(const std::string& key, ConfigType type) const;
    std::map<std::string, std::string> values_;
};

// defaults <- file (if non-empty path) <- overrides, in that order.
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

std::string hex64(std::uint64_t v);

}  // namespace lain
