#include "ldelock/config.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ldelock/error.hpp"
#include "ldelock/units.hpp"

namespace ldelock {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

Config Config::parse(std::string_view text) {
    Config cfg;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section");
            section = to_lower(trim(std::string_view(line).substr(1, line.size() - 2)));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
        std::string key = to_lower(trim(std::string_view(line).substr(0, eq)));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        cfg.set(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

bool Config::contains(std::string_view key) const { return entries_.count(to_lower(key)) > 0; }

std::optional<std::string> Config::get(std::string_view key) const {
    auto it = entries_.find(to_lower(key));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_or(std::string_view key, std::string fallback) const {
    auto v = get(key);
    return v ? *v : std::move(fallback);
}

std::optional<double> Config::get_double(std::string_view key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    auto d = parse_si(*v);
    if (!d) throw ConfigError("key '" + std::string(key) + "': not a number: '" + *v + "'");
    return d;
}

double Config::get_double_or(std::string_view key, double fallback) const {
    auto d = get_double(key);
    return d ? *d : fallback;
}

std::optional<long long> Config::get_int(std::string_view key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    try {
        std::size_t used = 0;
        long long n = std::stoll(*v, &used, 0);
        if (used != v->size()) throw std::invalid_argument("trailing");
        return n;
    } catch (const std::exception&) {
        throw ConfigError("key '" + std::string(key) + "': not an integer: '" + *v + "'");
    }
}

long long Config::get_int_or(std::string_view key, long long fallback) const {
    auto n = get_int(key);
    return n ? *n : fallback;
}

bool Config::get_bool_or(std::string_view key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    std::string s = to_lower(*v);
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + std::string(key) + "': not a boolean: '" + *v + "'");
}

void Config::set(std::string_view key, std::string value) { entries_[to_lower(key)] = std::move(value); }

Config Config::subtree(std::string_view prefix) const {
    Config out;
    std::string p = to_lower(prefix);
    if (!p.empty() && p.back() != '.') p += '.';
    for (const auto& [k, v] : entries_)
        if (k.rfind(p, 0) == 0) out.entries_[k.substr(p.size())] = v;
    return out;
}

void Config::merge(const Config& other) {
    for (const auto& [k, v] : other.entries_) entries_[k] = v;
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string content_hash(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ldelock
