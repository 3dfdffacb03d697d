#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ldelock {

/// Fixed-length key bit vector. Bit 0 is the leftmost character of the
/// bitstring and the most significant bit of the hex form.
class Key {
public:
    Key() = default;
    explicit Key(std::size_t length) : bits_(length, false) {}

    /// Accepts '0'/'1' only; throws InvalidKey otherwise.
    static Key from_bitstring(std::string_view s);
    /// Hex digits, left-padded to a multiple of four bits. Throws InvalidKey
    /// when a set bit falls outside `length`.
    static Key from_hex(std::string_view hex, std::size_t length);

    std::size_t size() const { return bits_.size(); }
    bool operator[](std::size_t i) const { return bits_.at(i); }
    void set(std::size_t i, bool v = true) { bits_.at(i) = v; }

    std::string bitstring() const;
    std::string hex() const;

    friend bool operator==(const Key&, const Key&) = default;
    friend std::strong_ordering operator<=>(const Key& a, const Key& b) {
        if (a.bits_.size() != b.bits_.size()) return a.bits_.size() <=> b.bits_.size();
        for (std::size_t i = 0; i < a.bits_.size(); ++i)
            if (a.bits_[i] != b.bits_[i]) return a.bits_[i] ? std::strong_ordering::greater : std::strong_ordering::less;
        return std::strong_ordering::equal;
    }

private:
    std::vector<bool> bits_;
};

}  // namespace ldelock
