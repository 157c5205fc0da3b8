#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cgame {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);
std::optional<double> parse_number(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

/// [A-Za-z_][A-Za-z0-9_]*
bool is_identifier(std::string_view s);

}  // namespace cgame
