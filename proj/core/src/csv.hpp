#pragma once

// Minimal CSV helpers shared by the readers in this library. Not installed.

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "evcoop/common.hpp"

namespace evcoop::csv {

std::string_view trim(std::string_view s) noexcept;

std::vector<std::string> split(std::string_view line, char sep = ',');

/// Reads the next non-blank line; false at end of stream. `row` tracks physical lines.
bool next_row(std::istream& in, std::string& line, std::size_t& row);

double to_double(std::string_view field, const std::string& source, std::size_t row,
                 std::string_view column);

std::int64_t to_int(std::string_view field, const std::string& source, std::size_t row,
                    std::string_view column);

/// Checks the header row matches `expected` column names (case-sensitive, trimmed).
void expect_header(const std::vector<std::string>& header, const std::vector<std::string>& expected,
                   const std::string& source);

/// Shortest round-trip representation of a double.
std::string format_double(double x);

} // namespace evcoop::csv
