#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace evcoop::csv {

std::string_view trim(std::string_view s) noexcept {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    fields.emplace_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return fields;
}

bool next_row(std::istream& in, std::string& line, std::size_t& row) {
  while (std::getline(in, line)) {
    ++row;
    const auto t = trim(line);
    if (!t.empty() && t.front() != '#') return true;
  }
  return false;
}

double to_double(std::string_view field, const std::string& source, std::size_t row,
                 std::string_view column) {
  double value = 0.0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (field.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw ParseError(source, row, "column '" + std::string(column) + "': not a finite number: '" +
                                      std::string(field) + "'");
  }
  return value;
}

std::int64_t to_int(std::string_view field, const std::string& source, std::size_t row,
                    std::string_view column) {
  std::int64_t value = 0;
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(source, row, "column '" + std::string(column) + "': not an integer: '" +
                                      std::string(field) + "'");
  }
  return value;
}

void expect_header(const std::vector<std::string>& header, const std::vector<std::string>& expected,
                   const std::string& source) {
  if (header != expected) {
    std::string want;
    for (const auto& col : expected) want += (want.empty() ? "" : ",") + col;
    throw ParseError(source, 1, "expected header '" + want + "'");
  }
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

} // namespace evcoop::csv
