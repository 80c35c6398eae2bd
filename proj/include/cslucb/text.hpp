#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cslucb::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Whole-cell parses; throw std::invalid_argument naming the cell.
double parse_double(std::string_view s);
std::size_t parse_size(std::string_view s);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace cslucb::text
