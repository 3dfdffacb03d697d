#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace ldelock {

enum class Polarity { NMOS, PMOS };
enum class Flavor { HVT, SVT, LVT };

/// Transistor layout arrangement: baseline, side-poly, short-OD.
enum class Arrangement { BL, SP, SOD };

inline constexpr std::array<Polarity, 2> kAllPolarities{Polarity::NMOS, Polarity::PMOS};
inline constexpr std::array<Flavor, 3> kAllFlavors{Flavor::HVT, Flavor::SVT, Flavor::LVT};
inline constexpr std::array<Arrangement, 3> kAllArrangements{Arrangement::BL, Arrangement::SP,
                                                             Arrangement::SOD};

/// (polarity, flavor) pair that selects a row of the LDE and mismatch tables.
struct DeviceClass {
    Polarity polarity = Polarity::NMOS;
    Flavor flavor = Flavor::SVT;

    friend bool operator==(const DeviceClass&, const DeviceClass&) = default;
};

std::string_view to_string(Polarity p);
std::string_view to_string(Flavor f);
std::string_view to_string(Arrangement a);

// Case-insensitive parsers; nullopt on unknown tokens.
std::optional<Polarity> parse_polarity(std::string_view s);
std::optional<Flavor> parse_flavor(std::string_view s);
std::optional<Arrangement> parse_arrangement(std::string_view s);

}  // namespace ldelock
