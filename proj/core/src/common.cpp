#include "evcoop/common.hpp"

#include <cmath>

namespace evcoop {

ParseError::ParseError(std::string source, std::size_t row, const std::string& what)
    : Error(source + ":" + std::to_string(row) + ": " + what), source_(std::move(source)), row_(row) {}

double mean(std::span<const double> xs) {
  require(!xs.empty(), "mean of empty series");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

double population_variance(std::span<const double> xs) {
  const double mu = mean(xs);
  double acc = 0.0;
  for (double x : xs) {
    const double d = x - mu;
    acc += d * d;
  }
  return acc / static_cast<double>(xs.size());
}

double population_stddev(std::span<const double> xs) { return std::sqrt(population_variance(xs)); }

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

} // namespace evcoop
