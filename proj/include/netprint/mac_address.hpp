#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace netprint {

/// 48-bit Ethernet address. Ordering is bytewise, which matches the
/// ordering of the canonical lowercase text form.
class MacAddress {
public:
    constexpr MacAddress() = default;
    constexpr explicit MacAddress(std::array<std::uint8_t, 6> octets) : octets_(octets) {}

    /// Accepts six hex octets separated by ':' or '-', any letter case.
    static std::optional<MacAddress> parse(std::string_view text);
    /// As parse(), throwing FormatError on bad input.
    static MacAddress from_string(std::string_view text);

    std::string to_string() const;
    constexpr const std::array<std::uint8_t, 6>& octets() const { return octets_; }

    friend constexpr auto operator<=>(const MacAddress&, const MacAddress&) = default;

private:
    std::array<std::uint8_t, 6> octets_{};
};

}  // namespace netprint

template <>
struct std::hash<netprint::MacAddress> {
    std::size_t operator()(const netprint::MacAddress& mac) const noexcept {
        std::uint64_t v = 0;
        for (auto o : mac.octets()) v = (v << 8) | o;
        return std::hash<std::uint64_t>{}(v);
    }
};
