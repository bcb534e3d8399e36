#include "evcoop/metrics.hpp"

#include <algorithm>
#include <string>

namespace evcoop {

CurveMetrics curve_metrics(std::span<const double> curve, std::span<const double> price, double step_hours) {
  if (curve.empty()) throw Error("curve_metrics: empty curve");
  if (price.size() != curve.size()) {
    throw Error("curve_metrics: horizon mismatch (" + std::to_string(curve.size()) + " vs " +
                std::to_string(price.size()) + ")");
  }
  CurveMetrics m;
  m.sigma = population_stddev(curve);
  m.peak = *std::max_element(curve.begin(), curve.end());
  for (std::size_t t = 0; t < curve.size(); ++t) m.cost += curve[t] * price[t] * step_hours;
  return m;
}

double system_discomfort(std::span<const double> discomforts) {
  if (discomforts.empty()) throw Error("system_discomfort: no agents");
  return mean(discomforts);
}

double fairness(std::span<const double> discomforts) {
  if (discomforts.empty()) throw Error("fairness: no agents");
  return 1.0 - population_stddev(discomforts);
}

double relative_reduction(double run, double control) {
  if (control == 0.0) throw Error("relative_reduction: control value is zero");
  return (control - run) / control;
}

std::vector<double> plan_selection_distribution(const std::vector<std::vector<std::size_t>>& selections,
                                                std::size_t plan_count) {
  if (plan_count == 0) throw Error("plan_selection_distribution: plan count must be >= 1");
  std::vector<double> dist(plan_count, 0.0);
  std::size_t counted = 0;
  for (const auto& rep : selections) {
    if (rep.empty()) continue;
    std::vector<double> freq(plan_count, 0.0);
    for (std::size_t j : rep) {
      if (j >= plan_count) throw Error("plan_selection_distribution: plan index out of range");
      freq[j] += 1.0;
    }
    for (std::size_t j = 0; j < plan_count; ++j) dist[j] += freq[j] / static_cast<double>(rep.size());
    ++counted;
  }
  if (counted == 0) return dist;
  for (double& p : dist) p /= static_cast<double>(counted);
  return dist;
}

} // namespace evcoop
