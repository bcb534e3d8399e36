#pragma once

// Experiment orchestration: configuration, fleet construction, plan books,
// seeded repetitions and result files.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evcoop/common.hpp"
#include "evcoop/epos.hpp"
#include "evcoop/ev_model.hpp"
#include "evcoop/metrics.hpp"
#include "evcoop/plangen.hpp"

namespace evcoop {

std::string_view library_version() noexcept;

struct ExperimentConfig {
  std::size_t horizon = 1440;  ///< optimization horizon T, timesteps (1 min each)
  Objective objective = Objective::min_dev;
  double participation = 1.0;
  std::size_t repetitions = 50;
  std::size_t v_max = 4;
  std::size_t interval_m = 15;
  std::optional<Seed> seed;
  std::filesystem::path price_path;
  std::filesystem::path trips_path;
  std::filesystem::path catalog_path;
  std::filesystem::path plans_path;
  std::size_t fleet_size = 130;       ///< synthetic fleet size when no trips file is given
  std::size_t observed_steps = 10080; ///< length of the trip history; 0 infers it from the trips
  std::size_t smoothing_width = 60;
  bool resample_participants = false;
  double kwh_per_gallon = kKwhPerGallon;

  /// Sets one field from its key; throws on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);

  void validate() const;

  Seed seed_or_throw() const;
};

/// Flat `key = value` text; `#` starts a comment.
ExperimentConfig read_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig read_config(const std::filesystem::path& path);
void write_config(std::ostream& out, const ExperimentConfig& config);

struct FleetAgent {
  std::string id;
  EvModel model;
  std::vector<TripRecord> trips;
  SocSignal soc;  ///< over the whole observed period
};

struct FleetScenario {
  std::vector<FleetAgent> agents;
  std::size_t observed_steps = 0;
};

/// Builds SoC signals for every vehicle; models follow catalog market shares.
FleetScenario build_fleet(std::span<const TripRecord> trips, std::span<const EvModel> catalog,
                          std::size_t observed_steps, Seed seed, double kwh_per_gallon = kKwhPerGallon);

/// Reads the trip CSV and catalog (default catalog when `catalog_path` is empty).
/// `observed_steps == 0` rounds the last trip end up to a multiple of `horizon`.
FleetScenario ingest_fleet(const std::filesystem::path& trips_path, const std::filesystem::path& catalog_path,
                           std::size_t horizon, std::size_t observed_steps, Seed seed,
                           double kwh_per_gallon = kKwhPerGallon);

/// Commute-like trips: weekday morning and evening commutes with an
/// occasional evening errand, midday outings on weekends. Day 0 is a Monday.
std::vector<TripRecord> synthesize_trips(std::size_t n, std::size_t observed_steps, Seed seed);

FleetScenario synthesize_fleet(std::size_t n, std::size_t observed_steps, Seed seed,
                               std::span<const EvModel> catalog);

/// round(fraction * n) distinct agents chosen by seed, returned sorted.
std::vector<std::size_t> select_participants(std::size_t n, double fraction, Seed seed);

/// Plans for one agent over one optimization period.
struct PeriodPlans {
  PlanSet plans;
  DemandPlan control;
};

/// Every agent's plans for every period of the observed history.
struct PlanBook {
  std::size_t horizon = 0;
  std::size_t periods = 0;
  double step_hours = 1.0 / 60.0;
  std::vector<std::string> agent_ids;
  std::vector<std::string> models;
  std::vector<std::vector<PeriodPlans>> entries;  ///< [agent][period]

  std::size_t agent_count() const noexcept { return agent_ids.size(); }
};

PlanBook build_plan_book(const FleetScenario& fleet, const ExperimentConfig& config);

void write_plan_book(std::ostream& out, const PlanBook& book);
PlanBook read_plan_book(std::istream& in);
PlanBook read_plan_book(const std::filesystem::path& path);

/// Synthetic two-peak diurnal spot price, USD/kWh, one value per minute.
PriceSignal default_price(std::size_t steps);

/// Price from the configured file, or the default; must tile the total horizon.
PriceSignal load_price(const ExperimentConfig& config, std::size_t total_steps);

struct RepetitionResult {
  std::size_t repetition = 0;
  Seed seed = 0;
  RunMetrics metrics;
  Series curve;
  std::vector<std::size_t> participants;
  std::vector<std::vector<std::size_t>> selections;  ///< [period][agent], 0-based
  std::vector<double> agent_discomfort;
  double discomfort_first_plan = 0.0;  ///< every participant on plan 1
  double discomfort_last_plan = 0.0;   ///< every participant on its last plan
  double fairness_first_plan = 0.0;
  double fairness_last_plan = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::size_t agents = 0;
  std::size_t periods = 0;
  Series control_curve;
  CurveMetrics control;
  double control_discomfort = 0.0;
  double control_fairness = 0.0;
  std::vector<RepetitionResult> repetitions;
  std::vector<double> selection_distribution;
};

/// Repetition seed: SplitMix64 of (seed, repetition).
Seed repetition_seed(Seed seed, std::size_t repetition);

/// Runs the configured repetitions over a prepared plan book.
ExperimentResult optimize_plan_book(const PlanBook& book, const ExperimentConfig& config, const PriceSignal& price);

/// Fleet (ingested or synthetic) -> plan book -> repetitions.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

MeanStd summarize(std::span<const double> values);

/// metrics.csv, selection_distribution.csv, selections.csv, curves/*.csv, run.txt.
void write_results(const ExperimentResult& result, const std::filesystem::path& dir);

void write_curve(std::ostream& out, std::span<const double> curve);
Series read_curve(std::istream& in, const std::string& source = "<curve>");

} // namespace evcoop
