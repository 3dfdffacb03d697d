#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ldelock {

/// Parses a SPICE-style number with an optional engineering suffix
/// (f, p, n, u, m, k, meg, g, t). Trailing unit letters after the suffix are
/// ignored, so "10uF" and "10u" are equal. Case-insensitive.
std::optional<double> parse_si(std::string_view text);

/// Shortest decimal text that reads back to exactly the same double.
std::string format_exact(double value);

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

}  // namespace ldelock
