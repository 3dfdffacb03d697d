#include "ldelock/units.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "ldelock/device.hpp"

namespace ldelock {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
               return std::tolower(x) == std::tolower(y);
           });
}

std::optional<double> parse_si(std::string_view text) {
    if (text.empty()) return std::nullopt;
    // from_chars rejects a leading '+'
    if (text.front() == '+') text.remove_prefix(1);
    double mantissa = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), mantissa);
    if (ec != std::errc{} || !std::isfinite(mantissa)) return std::nullopt;

    std::string rest = to_lower(std::string_view(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr)));
    double scale = 1.0;
    std::size_t used = 0;
    if (rest.rfind("meg", 0) == 0) {
        scale = 1e6;
        used = 3;
    } else if (rest.rfind("mil", 0) == 0) {
        scale = 25.4e-6;
        used = 3;
    } else if (!rest.empty()) {
        switch (rest[0]) {
            case 't': scale = 1e12; used = 1; break;
            case 'g': scale = 1e9; used = 1; break;
            case 'k': scale = 1e3; used = 1; break;
            case 'm': scale = 1e-3; used = 1; break;
            case 'u': scale = 1e-6; used = 1; break;
            case 'n': scale = 1e-9; used = 1; break;
            case 'p': scale = 1e-12; used = 1; break;
            case 'f': scale = 1e-15; used = 1; break;
            default: break;
        }
    }
    for (std::size_t i = used; i < rest.size(); ++i) {
        if (!std::isalpha(static_cast<unsigned char>(rest[i]))) return std::nullopt;
    }
    return mantissa * scale;
}

std::string format_exact(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::string_view to_string(Polarity p) { return p == Polarity::NMOS ? "NMOS" : "PMOS"; }

std::string_view to_string(Flavor f) {
    switch (f) {
        case Flavor::HVT: return "HVT";
        case Flavor::SVT: return "SVT";
        case Flavor::LVT: return "LVT";
    }
    return "?";
}

std::string_view to_string(Arrangement a) {
    switch (a) {
        case Arrangement::BL: return "BL";
        case Arrangement::SP: return "SP";
        case Arrangement::SOD: return "SOD";
    }
    return "?";
}

std::optional<Polarity> parse_polarity(std::string_view s) {
    if (iequals(s, "nmos")) return Polarity::NMOS;
    if (iequals(s, "pmos")) return Polarity::PMOS;
    return std::nullopt;
}

std::optional<Flavor> parse_flavor(std::string_view s) {
    if (iequals(s, "hvt")) return Flavor::HVT;
    if (iequals(s, "svt")) return Flavor::SVT;
    if (iequals(s, "lvt")) return Flavor::LVT;
    return std::nullopt;
}

std::optional<Arrangement> parse_arrangement(std::string_view s) {
    if (iequals(s, "bl")) return Arrangement::BL;
    if (iequals(s, "sp")) return Arrangement::SP;
    if (iequals(s, "sod")) return Arrangement::SOD;
    return std::nullopt;
}

}  // namespace ldelock
