#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ldelock {

/// Flat key=value store read from INI-style text. `[section]` headers prefix
/// the following keys as "section.key". '#' and ';' start comments. Keys are
/// case-insensitive and stored lower-case.
class Config {
public:
    static Config parse(std::string_view text);
    /// Throws IoError / ConfigError.
    static Config load(const std::filesystem::path& path);

    bool contains(std::string_view key) const;
    std::optional<std::string> get(std::string_view key) const;
    std::string get_or(std::string_view key, std::string fallback) const;
    /// Throws ConfigError when present but not numeric.
    std::optional<double> get_double(std::string_view key) const;
    double get_double_or(std::string_view key, double fallback) const;
    std::optional<long long> get_int(std::string_view key) const;
    long long get_int_or(std::string_view key, long long fallback) const;
    bool get_bool_or(std::string_view key, bool fallback) const;

    void set(std::string_view key, std::string value);
    /// Keys with the given prefix, with the prefix stripped.
    Config subtree(std::string_view prefix) const;
    /// Later values win.
    void merge(const Config& other);

    const std::map<std::string, std::string>& entries() const { return entries_; }
    /// Sorted key=value lines; stable input to hashing.
    std::string serialize() const;

private:
    std::map<std::string, std::string> entries_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// FNV-1a 64-bit, rendered as 16 hex digits.
std::string content_hash(std::string_view text);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

}  // namespace ldelock
