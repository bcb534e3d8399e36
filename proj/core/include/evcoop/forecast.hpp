#pragma once

// Logistic EV-adoption curves and fleet peak-power projections.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "evcoop/common.hpp"

namespace evcoop {

/// Cumulative adoption C / (1 + exp(-rate * (year - midpoint))).
struct AdoptionCurve {
  double cap = 0.0;       ///< vehicles
  double rate = 0.0;      ///< per year
  double midpoint = 0.0;  ///< calendar year of the inflection point

  void validate() const;
};

double logistic_sales(const AdoptionCurve& curve, double year);

struct Observation {
  double year = 0.0;
  double cumulative_sales = 0.0;
};

/// CSV `year,cumulative_sales`.
std::vector<Observation> read_observations(std::istream& in, const std::string& source = "<observations>");
std::vector<Observation> read_observations(const std::filesystem::path& path);

struct FitOptions {
  std::size_t max_iterations = 500;
  double tolerance = 1e-14;  ///< relative parameter step at convergence
};

struct FitReport {
  AdoptionCurve curve;
  double residual_sum_squares = 0.0;
  std::size_t iterations = 0;
  AdoptionCurve initial;
};

class FitError : public Error {
public:
  using Error::Error;
};

/// Least-squares logistic fit (Levenberg-Marquardt) with equal weights.
///
/// Starts from cap = 1.1 x max observation, midpoint = year the data cross
/// half the maximum, rate = 4 / data span. Needs at least three
/// observations; throws FitError when the iteration cap is hit.
FitReport fit_adoption(std::span<const Observation> observations, const FitOptions& options = {});

/// Average contribution of one EV to fleet peak power under a charging paradigm.
struct ParadigmContribution {
  std::string paradigm;       ///< "control", "MIN-DEV" or "MIN-COST"
  double participation = 1.0; ///< fraction of the fleet running the planner
  std::string horizon;        ///< "daily" or "weekly"
  double per_ev_peak_kw = 0.0;

  std::string label() const;
};

/// Per-EV contribution from a measured fleet peak.
ParadigmContribution contribution_from_peak(std::string paradigm, double participation, std::string horizon,
                                            double fleet_peak_kw, std::size_t fleet_size);

/// Peak-power contributions measured on the 130-vehicle reference pool.
std::vector<ParadigmContribution> reference_contributions();

/// Projected fleet peak power in MW.
double project_peak_power(const AdoptionCurve& curve, const ParadigmContribution& contribution, double year);

/// CSV `year,paradigm,peak_mw`, one row per (year, paradigm).
void write_projection(std::ostream& out, const AdoptionCurve& curve,
                      std::span<const ParadigmContribution> paradigms, std::span<const double> years);

} // namespace evcoop
