#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace blmm {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Full-string parse of a decimal number; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

std::optional<long long> parse_integer(std::string_view text);

/// CSV field, double-quoted when it holds a comma, quote or newline.
std::string csv_field(std::string_view text);

/// Splits one CSV line, honouring double-quoted fields. nullopt when a quote
/// is left open.
std::optional<std::vector<std::string>> split_csv_line(std::string_view line);

}  // namespace blmm
