#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hta {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
/// Strict parse of a full token; throws std::invalid_argument on garbage.
double parse_double(std::string_view token);
std::size_t parse_size(std::string_view token);

std::vector<std::string_view> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace hta
