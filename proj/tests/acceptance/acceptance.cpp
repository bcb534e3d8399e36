// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "epos_oracle.hpp"
#include "evcoop/forecast.hpp"
#include "evcoop/harness.hpp"

namespace {

using namespace evcoop;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// 1. Every parent decision equals exhaustive enumeration.
Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::size_t instances = 0, decisions = 0, mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 7;
    const std::size_t v = 1 + rng() % 4;
    const std::size_t T = 1 + rng() % 24;
    const std::size_t fan_out = 2 + rng() % 2;
    std::vector<std::vector<oracle::IntSeries>> plans(n);
    for (auto& agent : plans) {
      agent.resize(1 + rng() % v);
      for (auto& p : agent) {
        p.resize(T);
        for (auto& x : p) x = static_cast<std::int64_t>(rng() % 10);
      }
    }
    oracle::IntSeries int_price(T);
    for (auto& x : int_price) x = static_cast<std::int64_t>(1 + rng() % 5);
    const Series price(int_price.begin(), int_price.end());
    const auto tree = build_tree(n, rng(), fan_out);
    const auto real = oracle::to_real(plans);
    for (Objective objective : {Objective::min_dev, Objective::min_cost}) {
      ++instances;
      const auto got = run_optimization(real, tree, objective, price);
      const auto ref = oracle::reference(plans, tree, objective, int_price);
      if (got.selected != ref.selected || got.total != Series(ref.total.begin(), ref.total.end())) ++mismatches;
      for (const auto& d : got.decisions) {
        ++decisions;
        if (d.own_plan != ref.selected[d.agent] || d.child_plans != ref.offers[d.agent][d.own_plan].child_plans) {
          ++mismatches;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          format("%zu instances, %zu parent decisions, %zu mismatches, %.2f s", instances, decisions, mismatches,
                 secs)};
}

struct PlanCorpusEntry {
  EvModel model;
  SocSignal soc;
  std::vector<FlexibilityWindow> windows;
  PlanSet plans;
  std::size_t interval = 0;
};

// Random single-vehicle days planned with random options; shared by criteria 2 and 3.
const std::vector<PlanCorpusEntry>& plan_corpus(std::size_t& generation_errors) {
  static std::vector<PlanCorpusEntry> corpus;
  static std::size_t errors = 0;
  if (corpus.empty()) {
    const auto catalog = default_catalog();
    std::mt19937_64 rng(77);
    const std::size_t intervals[] = {1, 5, 10, 15, 30, 60};
    for (std::size_t k = 0; corpus.size() < 1000; ++k) {
      const Seed s = rng();
      const auto trips = synthesize_trips(1, 1440 * 7, s);
      const std::int64_t day = static_cast<std::int64_t>(rng() % 7);
      std::vector<TripRecord> today;
      for (auto t : trips) {
        if (t.start / 1440 != day) continue;
        t.start -= day * 1440;
        t.end -= day * 1440;
        today.push_back(t);
      }
      PlanCorpusEntry e;
      e.model = catalog[rng() % catalog.size()];
      SocProfileOptions opts;
      opts.initial_soc = 0.55 + 0.45 * std::uniform_real_distribution<double>()(rng);
      try {
        e.soc = build_soc_profile(today, e.model, 1440, opts);
      } catch (const InfeasibleTripError&) {
        continue;
      }
      const auto likelihood = usage_likelihood(trips, 1440, 60, 1440 * 7);
      e.interval = intervals[rng() % std::size(intervals)];
      const PlanOptions options{e.interval, 1 + rng() % 4, rng()};
      e.windows = compute_windows(e.soc, e.model);
      try {
        e.plans = plan_agent("ev", e.soc, e.model, likelihood, options);
      } catch (const PlanGenerationError&) {
        ++errors;
        continue;
      }
      corpus.push_back(std::move(e));
    }
  }
  generation_errors = errors;
  return corpus;
}

// 2. Per-window delivered energy matches the deficit within one interval quantum.
Outcome energy_conservation() {
  std::size_t generation_errors = 0;
  const auto& corpus = plan_corpus(generation_errors);
  std::size_t checked = 0, violations = 0;
  for (const auto& e : corpus) {
    const double step_h = e.soc.step_hours();
    const double quantum = static_cast<double>(e.interval) * e.model.charge_kw * step_h;
    for (const auto& plan : e.plans.plans) {
      for (const auto& w : e.windows) {
        double kwh = 0.0;
        for (std::size_t t = w.start; t < w.end; ++t) kwh += plan.values[t] * step_h;
        const double deficit = (1.0 - w.soc_at_start) * e.model.battery_kwh;
        ++checked;
        if (std::abs(kwh - deficit) > quantum + 1e-9) ++violations;
      }
    }
  }
  return {violations == 0 && generation_errors == 0,
          format("%zu plan sets, %zu plan-windows, %zu violations, %zu generation errors", corpus.size(), checked,
                 violations, generation_errors)};
}

// 3. Values are 0 or the charge power, nonzero exactly where the planned SoC rises.
Outcome demand_structure() {
  std::size_t generation_errors = 0;
  const auto& corpus = plan_corpus(generation_errors);
  std::size_t checked = 0, violations = 0;
  for (const auto& e : corpus) {
    for (const auto& plan : e.plans.plans) {
      const auto& soc = plan.planned_soc.values;
      for (std::size_t t = 0; t < plan.values.size(); ++t) {
        ++checked;
        const double x = plan.values[t];
        const bool rises = soc[t + 1] > soc[t];
        if ((x != 0.0 && x != e.model.charge_kw) || ((x != 0.0) != rises)) ++violations;
      }
    }
  }
  return {violations == 0, format("%zu timesteps, %zu violations", checked, violations)};
}

ExperimentConfig fleet_config() {
  ExperimentConfig c;
  c.horizon = 1440;
  c.objective = Objective::min_dev;
  c.participation = 1.0;
  c.repetitions = 50;
  c.v_max = 4;
  c.fleet_size = 130;
  c.observed_steps = 10080;
  c.seed = 2024;
  return c;
}

const ExperimentResult& fleet_result(double& secs) {
  static ExperimentResult result;
  static double elapsed = -1.0;
  if (elapsed < 0.0) {
    const auto t0 = Clock::now();
    result = run_experiment(fleet_config());
    elapsed = seconds_since(t0);
  }
  secs = elapsed;
  return result;
}

// 4. MIN-DEV lowers sigma below control on a synthetic fleet.
Outcome sigma_reduction() {
  double secs = 0.0;
  const auto& r = fleet_result(secs);
  std::size_t below = 0;
  double sum = 0.0;
  for (const auto& rep : r.repetitions) {
    below += rep.metrics.sigma < r.control.sigma;
    sum += rep.metrics.relative_sigma_reduction;
  }
  const double share = static_cast<double>(below) / static_cast<double>(r.repetitions.size());
  const double mean_reduction = sum / static_cast<double>(r.repetitions.size());
  return {share >= 0.95 && mean_reduction > 0.10 && secs < 300.0,
          format("control sigma %.2f kW, below control in %zu/%zu reps, mean reduction %.1f%%, %.1f s",
                 r.control.sigma, below, r.repetitions.size(), 100.0 * mean_reduction, secs)};
}

// 5. Mean discomfort within [all plan 1, all last plan]; fairness within the reversed bounds.
Outcome envelope_containment() {
  double secs = 0.0;
  const auto& r = fleet_result(secs);
  std::size_t discomfort_violations = 0, fairness_violations = 0, between_either_order = 0;
  double lo = 0.0, mid = 0.0, hi = 0.0;
  for (const auto& rep : r.repetitions) {
    const double d = rep.metrics.mean_discomfort;
    if (d < rep.discomfort_first_plan || d > rep.discomfort_last_plan) ++discomfort_violations;
    between_either_order += d >= std::min(rep.discomfort_first_plan, rep.discomfort_last_plan) &&
                            d <= std::max(rep.discomfort_first_plan, rep.discomfort_last_plan);
    const double f = rep.metrics.fairness;
    if (f > rep.fairness_first_plan || f < rep.fairness_last_plan) ++fairness_violations;
    lo += rep.discomfort_first_plan;
    mid += d;
    hi += rep.discomfort_last_plan;
  }
  const double reps = static_cast<double>(r.repetitions.size());
  return {discomfort_violations == 0 && fairness_violations == 0,
          format("discomfort outside envelope in %zu/%zu reps, fairness in %zu/%zu "
                 "(means: plan 1 %.5f, EPOS %.5f, last plan %.5f, control %.5f; "
                 "EPOS between the two bounds in either order in %zu/%zu)",
                 discomfort_violations, r.repetitions.size(), fairness_violations, r.repetitions.size(), lo / reps,
                 mid / reps, hi / reps, r.control_discomfort, between_either_order, r.repetitions.size())};
}

// 6. fairness(D) + population sigma(D) = 1.
Outcome fairness_identity() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> d(1 + rng() % 200);
    const double scale = std::pow(10.0, -3.0 * u(rng));
    for (double& x : d) x = scale * u(rng);
    // Independent two-pass deviation.
    double m = 0.0;
    for (double x : d) m += x;
    m /= static_cast<double>(d.size());
    double ss = 0.0;
    for (double x : d) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / static_cast<double>(d.size()));
    worst = std::max(worst, std::abs(fairness(d) + sd - 1.0));
  }
  return {worst <= 1e-12, format("max |F + sigma - 1| = %.3g over 1000 vectors", worst)};
}

std::vector<Observation> california() {
  return read_observations(fs::path(EVCOOP_DATA_DIR) / "california_sales.csv");
}

// 7. Logistic fit to the California anchors.
Outcome adoption_fit() {
  const auto obs = california();
  const auto t0 = Clock::now();
  const auto fit = fit_adoption(obs);
  const double secs = seconds_since(t0);
  const auto& c = fit.curve;
  const bool ok = std::abs(c.rate - 0.653) <= 0.05 && std::abs(c.cap / 1.53e6 - 1.0) <= 0.05 &&
                  std::abs(c.midpoint - 2019.0) <= 0.5 && secs < 1.0;
  return {ok, format("C = %.4g, r = %.4f /yr, t_mid = %.2f, %zu iterations, %.3f s", c.cap, c.rate, c.midpoint,
                     fit.iterations, secs)};
}

// 8. 2025 peak projections for control and full-participation daily MIN-DEV.
Outcome peak_projection() {
  const auto t0 = Clock::now();
  const auto curve = fit_adoption(california()).curve;
  const auto control = contribution_from_peak("control", 0.0, "daily", 223.0, 130);
  const auto min_dev = contribution_from_peak("MIN-DEV", 1.0, "daily", 119.43, 130);
  const double p_control = project_peak_power(curve, control, 2025.0);
  const double p_min_dev = project_peak_power(curve, min_dev, 2025.0);
  const double secs = seconds_since(t0);
  const double reduction = 1.0 - p_min_dev / p_control;
  const bool ok = std::abs(p_control / 2573.0 - 1.0) <= 0.02 && p_min_dev < 1378.0 * 1.02 && reduction > 0.46 &&
                  secs < 1.0;
  return {ok, format("control %.1f MW, MIN-DEV %.1f MW, reduction %.2f%%, %.3f s", p_control, p_min_dev,
                     100.0 * reduction, secs)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Two optimize runs with one config and seed write identical files.
Outcome determinism() {
  auto config = fleet_config();
  config.repetitions = 3;
  const auto base = fs::temp_directory_path() / "evcoop_acceptance_determinism";
  fs::remove_all(base);
  write_results(run_experiment(config), base / "a");
  write_results(run_experiment(config), base / "b");
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(entry.path(), base / "a");
    if (slurp(entry.path()) != slurp(base / "b" / rel)) ++differing;
  }
  fs::remove_all(base);
  return {files > 0 && differing == 0, format("%zu files compared, %zu differ", files, differing)};
}

// 10. Hand-traced window signals.
Outcome window_suite() {
  const auto run = [](std::vector<double> soc, std::size_t ct) {
    return compute_windows(std::span<const double>(soc), [ct](double) { return ct; });
  };
  std::size_t failures = 0;
  failures += !run({1.0, 0.9, 0.8, 0.7, 0.6, 0.5}, 1).empty();
  failures += !run({0.4, 0.4, 0.4, 0.4}, 0).empty();
  const auto traced = run({1.0, 0.8, 0.6, 0.7, 0.8, 0.9, 1.0, 1.0, 0.9}, 3);
  failures += !(traced.size() == 1 && traced[0].start == 2 && traced[0].end == 7 && traced[0].soc_at_start == 0.6);
  const std::vector<double> two_rises{1.0, 0.7, 0.5, 0.6, 0.7, 0.6, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.0};
  const auto short_kept = run(two_rises, 2);
  failures += !(short_kept.size() == 2 && short_kept[0].start == 2 && short_kept[0].end == 4 &&
                short_kept[1].start == 6 && short_kept[1].end == 12);
  const auto short_dropped = run(two_rises, 5);
  failures += !(short_dropped.size() == 1 && short_dropped[0].start == 6 && short_dropped[0].index == 0);
  const auto only_short = run({1.0, 0.5, 0.6, 0.7, 0.4}, 5);
  failures += !only_short.empty();
  return {failures == 0, format("6 signals, %zu failures", failures)};
}

} // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"plan selection matches exhaustive enumeration", oracle_equivalence},
      {"per-window energy matches the charge deficit", energy_conservation},
      {"demand values follow the planned SoC", demand_structure},
      {"MIN-DEV lowers sigma on a 130-vehicle fleet", sigma_reduction},
      {"discomfort and fairness inside the plan envelope", envelope_containment},
      {"fairness plus sigma equals one", fairness_identity},
      {"adoption curve fit", adoption_fit},
      {"2025 peak power projection", peak_projection},
      {"optimize output is deterministic", determinism},
      {"flexibility window suite", window_suite},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %zu: %s  %s  [%s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
