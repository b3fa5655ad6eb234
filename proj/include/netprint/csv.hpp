#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace netprint::csv {

/// Splits one CSV record. Fields may be wrapped in double quotes with ""
/// as an escaped quote; surrounding ASCII whitespace on unquoted fields is
/// trimmed. Throws FormatError on an unterminated quote.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or leading/trailing space.
std::string escape_field(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Reads one line, stripping a trailing '\r'. Returns false at end of stream.
bool read_line(std::istream& in, std::string& line);

std::string_view trim(std::string_view s);

/// 17 significant digits in general notation, so parse_double recovers the exact bits.
std::string format_double(double value);

std::optional<double> parse_double(std::string_view text);
std::optional<std::uint64_t> parse_uint(std::string_view text);

}  // namespace netprint::csv
