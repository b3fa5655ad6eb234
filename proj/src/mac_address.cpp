#include "netprint/mac_address.hpp"

#include "netprint/csv.hpp"
#include "netprint/error.hpp"

namespace netprint {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

std::optional<MacAddress> MacAddress::parse(std::string_view text) {
    text = csv::trim(text);
    if (text.size() != 17) return std::nullopt;
    const char sep = text[2];
    if (sep != ':' && sep != '-') return std::nullopt;
    std::array<std::uint8_t, 6> octets{};
    for (std::size_t i = 0; i < 6; ++i) {
        const std::size_t at = i * 3;
        if (i > 0 && text[at - 1] != sep) return std::nullopt;
        const int hi = hex_value(text[at]);
        const int lo = hex_value(text[at + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        octets[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return MacAddress(octets);
}

MacAddress MacAddress::from_string(std::string_view text) {
    if (auto mac = parse(text)) return *mac;
    throw FormatError("invalid MAC address '" + std::string(text) + "'");
}

std::string MacAddress::to_string() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(17);
    for (std::size_t i = 0; i < 6; ++i) {
        if (i) out.push_back(':');
        out.push_back(digits[octets_[i] >> 4]);
        out.push_back(digits[octets_[i] & 0xf]);
    }
    return out;
}

}  // namespace netprint
