#include "evcoop/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

#include "csv.hpp"

namespace evcoop {

namespace {

constexpr std::size_t kReferenceFleet = 130;

AdoptionCurve initial_guess(std::span<const Observation> obs) {
  std::vector<Observation> sorted(obs.begin(), obs.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Observation& a, const Observation& b) { return a.year < b.year; });
  double peak = 0.0;
  for (const auto& o : sorted) peak = std::max(peak, o.cumulative_sales);
  const double half = peak / 2.0;

  double midpoint = sorted.front().year;
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const auto& a = sorted[k - 1];
    const auto& b = sorted[k];
    if (a.cumulative_sales < half && b.cumulative_sales >= half) {
      const double frac = (half - a.cumulative_sales) / (b.cumulative_sales - a.cumulative_sales);
      midpoint = a.year + frac * (b.year - a.year);
      break;
    }
  }
  const double span = sorted.back().year - sorted.front().year;
  return {1.1 * peak, 4.0 / span, midpoint};
}

} // namespace

void AdoptionCurve::validate() const {
  if (!(std::isfinite(cap) && cap > 0.0)) throw Error("adoption curve: cap must be > 0");
  if (!(std::isfinite(rate) && rate > 0.0)) throw Error("adoption curve: rate must be > 0");
  if (!std::isfinite(midpoint)) throw Error("adoption curve: midpoint must be finite");
}

double logistic_sales(const AdoptionCurve& curve, double year) {
  return curve.cap / (1.0 + std::exp(-curve.rate * (year - curve.midpoint)));
}

std::vector<Observation> read_observations(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  if (!csv::next_row(in, line, row)) throw ParseError(source, row, "empty observations file");
  csv::expect_header(csv::split(line), {"year", "cumulative_sales"}, source);
  std::vector<Observation> obs;
  while (csv::next_row(in, line, row)) {
    const auto f = csv::split(line);
    if (f.size() != 2) throw ParseError(source, row, "expected 2 fields");
    Observation o{csv::to_double(f[0], source, row, "year"),
                  csv::to_double(f[1], source, row, "cumulative_sales")};
    if (o.cumulative_sales < 0.0) throw ParseError(source, row, "cumulative_sales must be >= 0");
    obs.push_back(o);
  }
  return obs;
}

std::vector<Observation> read_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_observations(in, path.string());
}

FitReport fit_adoption(std::span<const Observation> observations, const FitOptions& options) {
  if (observations.size() < 3) {
    throw FitError("fit_adoption: need at least 3 observations, got " + std::to_string(observations.size()));
  }
  const auto init = initial_guess(observations);
  if (!(init.cap > 0.0) || !std::isfinite(init.rate)) {
    throw FitError("fit_adoption: observations do not span a usable range");
  }

  // Work with cap and residuals scaled by the initial cap so the normal
  // equations stay well conditioned.
  const double scale = init.cap;
  const auto n = static_cast<Eigen::Index>(observations.size());
  Eigen::VectorXd years(n), targets(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    years[i] = observations[static_cast<std::size_t>(i)].year;
    targets[i] = observations[static_cast<std::size_t>(i)].cumulative_sales / scale;
  }

  auto residuals = [&](const Eigen::Vector3d& p) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      r[i] = p[0] / (1.0 + std::exp(-p[1] * (years[i] - p[2]))) - targets[i];
    }
    return r;
  };
  auto jacobian = [&](const Eigen::Vector3d& p) {
    Eigen::MatrixXd J(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dt = years[i] - p[2];
      const double e = std::exp(-p[1] * dt);
      const double denom = (1.0 + e) * (1.0 + e);
      J(i, 0) = 1.0 / (1.0 + e);
      J(i, 1) = p[0] * e * dt / denom;
      J(i, 2) = -p[0] * e * p[1] / denom;
    }
    return J;
  };

  Eigen::Vector3d p(1.0, init.rate, init.midpoint);
  Eigen::VectorXd r = residuals(p);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  std::size_t iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::MatrixXd J = jacobian(p);
    const Eigen::Matrix3d JtJ = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-15) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::Matrix3d A = JtJ;
      A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = A.ldlt().solve(-g);
      const Eigen::Vector3d trial = p + step;
      const Eigen::VectorXd trial_r = residuals(trial);
      const double trial_cost = trial_r.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double rel_step = step.cwiseAbs().cwiseQuotient(p.cwiseAbs().cwiseMax(1e-12)).maxCoeff();
        p = trial;
        r = trial_r;
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (rel_step < options.tolerance) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      converged = true;  // no downhill step left at machine precision
      break;
    }
    if (converged) break;
  }

  if (!converged) {
    std::ostringstream msg;
    msg << "fit_adoption: no convergence after " << iter << " iterations (cap=" << p[0] * scale
        << ", rate=" << p[1] << ", midpoint=" << p[2] << ", rss=" << cost * scale * scale << ")";
    throw FitError(msg.str());
  }

  FitReport report;
  report.curve = {p[0] * scale, p[1], p[2]};
  report.residual_sum_squares = cost * scale * scale;
  report.iterations = iter;
  report.initial = init;
  try {
    report.curve.validate();
  } catch (const Error& e) {
    throw FitError(std::string("fit_adoption: degenerate fit: ") + e.what());
  }
  return report;
}

std::string ParadigmContribution::label() const {
  if (paradigm == "control") return "control";
  std::ostringstream os;
  os << paradigm << ' ' << std::lround(participation * 100.0) << "% " << horizon;
  return os.str();
}

ParadigmContribution contribution_from_peak(std::string paradigm, double participation, std::string horizon,
                                            double fleet_peak_kw, std::size_t fleet_size) {
  if (fleet_size == 0) throw Error("contribution_from_peak: empty fleet");
  if (!(fleet_peak_kw > 0.0)) throw Error("contribution_from_peak: peak must be > 0");
  return {std::move(paradigm), participation, std::move(horizon),
          fleet_peak_kw / static_cast<double>(fleet_size)};
}

std::vector<ParadigmContribution> reference_contributions() {
  struct Row {
    const char* paradigm;
    double participation;
    double daily_kw;
    double weekly_kw;
  };
  // Aggregate peak power of the reference pool, kW.
  static constexpr Row rows[] = {
      {"MIN-COST", 1.00, 217.43, 200.84}, {"MIN-DEV", 1.00, 119.43, 121.04},
      {"MIN-COST", 0.75, 170.83, 164.50}, {"MIN-DEV", 0.75, 113.06, 118.81},
      {"MIN-COST", 0.50, 145.74, 141.25}, {"MIN-DEV", 0.50, 149.75, 148.34},
      {"MIN-COST", 0.25, 182.56, 175.74}, {"MIN-DEV", 0.25, 181.64, 184.51},
  };
  std::vector<ParadigmContribution> out;
  out.push_back(contribution_from_peak("control", 0.0, "daily", 223.00, kReferenceFleet));
  for (const auto& row : rows) {
    out.push_back(contribution_from_peak(row.paradigm, row.participation, "daily", row.daily_kw, kReferenceFleet));
  }
  for (const auto& row : rows) {
    out.push_back(contribution_from_peak(row.paradigm, row.participation, "weekly", row.weekly_kw, kReferenceFleet));
  }
  return out;
}

double project_peak_power(const AdoptionCurve& curve, const ParadigmContribution& contribution, double year) {
  return contribution.per_ev_peak_kw * logistic_sales(curve, year) / 1000.0;
}

void write_projection(std::ostream& out, const AdoptionCurve& curve,
                      std::span<const ParadigmContribution> paradigms, std::span<const double> years) {
  out << "year,paradigm,peak_mw\n";
  for (double year : years) {
    for (const auto& p : paradigms) {
      out << csv::format_double(year) << ',' << p.label() << ','
          << csv::format_double(project_peak_power(curve, p, year)) << '\n';
    }
  }
}

} // namespace evcoop
