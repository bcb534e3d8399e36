#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace evcoop {

/// Per-timestep series (kW, USD/kWh, SoC fraction, ...).
using Series = std::vector<double>;

using Seed = std::uint64_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input file violates its schema. `row` is 1-based and counts the header.
class ParseError : public Error {
public:
  ParseError(std::string source, std::size_t row, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  std::size_t row() const noexcept { return row_; }

private:
  std::string source_;
  std::size_t row_;
};

/// Population mean. Throws on empty input.
double mean(std::span<const double> xs);

/// Population standard deviation (divides by n). Throws on empty input.
double population_stddev(std::span<const double> xs);

/// Population variance, two-pass.
double population_variance(std::span<const double> xs);

/// SplitMix64 finalizer; used to derive independent seeds from (seed, stream).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

void require(bool condition, const std::string& message);

} // namespace evcoop
