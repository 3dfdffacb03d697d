#include "ldelock/key.hpp"

#include <cctype>

#include "ldelock/error.hpp"

namespace ldelock {

Key Key::from_bitstring(std::string_view s) {
    Key k(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '1')
            k.bits_[i] = true;
        else if (s[i] != '0')
            throw InvalidKey(0, InvalidKey::Reason::WrongLength, "key bitstring may only contain 0 and 1");
    }
    return k;
}

Key Key::from_hex(std::string_view hex, std::size_t length) {
    if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
    const std::size_t padded = (length + 3) / 4 * 4;
    if (hex.size() * 4 < padded)
        throw InvalidKey(0, InvalidKey::Reason::WrongLength, "hex key too short for " + std::to_string(length) + " bits");
    std::vector<bool> raw;
    for (char ch : hex) {
        int v;
        if (ch >= '0' && ch <= '9')
            v = ch - '0';
        else if (std::isxdigit(static_cast<unsigned char>(ch)))
            v = std::tolower(static_cast<unsigned char>(ch)) - 'a' + 10;
        else
            throw InvalidKey(0, InvalidKey::Reason::WrongLength, std::string("bad hex digit '") + ch + "'");
        for (int b = 3; b >= 0; --b) raw.push_back((v >> b) & 1);
    }
    const std::size_t skip = raw.size() - length;
    for (std::size_t i = 0; i < skip; ++i)
        if (raw[i]) throw InvalidKey(0, InvalidKey::Reason::WrongLength, "hex key has bits beyond its length");
    Key k(length);
    for (std::size_t i = 0; i < length; ++i) k.bits_[i] = raw[skip + i];
    return k;
}

std::string Key::bitstring() const {
    std::string s;
    s.reserve(bits_.size());
    for (bool b : bits_) s.push_back(b ? '1' : '0');
    return s;
}

std::string Key::hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    const std::size_t pad = (4 - bits_.size() % 4) % 4;
    std::string out;
    int acc = 0, n = static_cast<int>(pad);
    for (bool b : bits_) {
        acc = (acc << 1) | (b ? 1 : 0);
        if (++n == 4) {
            out.push_back(digits[acc]);
            acc = 0;
            n = 0;
        }
    }
    return out.empty() ? "0" : out;
}

}  // namespace ldelock
