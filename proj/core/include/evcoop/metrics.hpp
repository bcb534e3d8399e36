#pragma once

// Socio-technical measurements of an optimization run.

#include <cstddef>
#include <span>
#include <vector>

#include "evcoop/common.hpp"

namespace evcoop {

struct CurveMetrics {
  double sigma = 0.0;  ///< kW, population standard deviation
  double cost = 0.0;   ///< USD
  double peak = 0.0;   ///< kW
};

/// sigma, price-weighted cost (kW x USD/kWh x step hours), and peak of a demand curve.
CurveMetrics curve_metrics(std::span<const double> curve, std::span<const double> price, double step_hours);

/// Mean per-agent discomfort.
double system_discomfort(std::span<const double> discomforts);

/// 1 - population standard deviation of the per-agent discomforts.
double fairness(std::span<const double> discomforts);

/// (control - run) / control. Throws when control is zero.
double relative_reduction(double run, double control);

/// Empirical plan-index frequencies per repetition, averaged over repetitions.
/// `selections[r]` holds the 0-based plan index of every counted agent in repetition r.
std::vector<double> plan_selection_distribution(const std::vector<std::vector<std::size_t>>& selections,
                                                std::size_t plan_count);

struct RunMetrics {
  double sigma = 0.0;
  double cost = 0.0;
  double peak_power = 0.0;
  double mean_discomfort = 0.0;
  double fairness = 0.0;
  double relative_sigma_reduction = 0.0;
  double relative_cost_reduction = 0.0;
};

} // namespace evcoop
