#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mortgee::csv {

/// Splits one CSV line into fields. Handles double-quoted fields with
/// embedded commas and "" escapes; does not handle embedded newlines.
std::vector<std::string> split(std::string_view line, char sep = ',');

std::string trim(std::string_view s);

/// Strict parsers: the whole field must be consumed.
std::optional<double> parse_double(std::string_view field);
std::optional<long> parse_int(std::string_view field);

/// %.17g: enough digits that a double round-trips exactly through text.
std::string fmt17(double v);

/// %.3g, for human-readable tables.
std::string fmt3(double v);

}  // namespace mortgee::csv
