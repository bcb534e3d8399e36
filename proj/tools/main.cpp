// evcoop command-line front end.
//
//   evcoop synth    --fleet-size 130 --seed 7 --out trips.csv
//   evcoop ingest   --trips trips.csv --seed 7 --out fleet.csv
//   evcoop plangen  --trips trips.csv --seed 7 --out plans.json
//   evcoop optimize --config run.cfg --seed 7 --out-dir results/
//   evcoop forecast --observations data/california_sales.csv --out projection.csv
//   evcoop report   --results results/

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evcoop/forecast.hpp"
#include "evcoop/harness.hpp"

namespace fs = std::filesystem;
using namespace evcoop;

namespace {

// Experiment flags shared by subcommands. Values are kept as text and applied
// on top of the config file through ExperimentConfig::set.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  bool resample = false;

  void attach(CLI::App* app, bool with_experiment_keys) {
    app->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    add(app, "--seed", "seed", "random seed");
    add(app, "--horizon", "horizon", "optimization horizon T in timesteps");
    add(app, "--trips", "trips_path", "trip CSV (vehicle_id,start_min,end_min,avg_speed_mph,destination)");
    add(app, "--catalog", "catalog_path", "EV model catalog CSV");
    add(app, "--fleet-size", "fleet_size", "synthetic fleet size when no trips are given");
    add(app, "--observed-steps", "observed_steps", "length of the trip history in timesteps (0 infers it)");
    add(app, "--smoothing-width", "smoothing_width", "usage-likelihood moving-average width");
    add(app, "--kwh-per-gallon", "kwh_per_gallon", "energy per gallon-equivalent");
    add(app, "--v-max", "v_max", "maximum plans per agent");
    add(app, "--interval-m", "interval_m", "charging interval length in timesteps");
    if (!with_experiment_keys) return;
    add(app, "--objective", "objective", "MIN-DEV or MIN-COST");
    add(app, "--participation", "participation", "fraction of agents running the planner");
    add(app, "--repetitions", "repetitions", "number of repetitions");
    add(app, "--price", "price_path", "price CSV (t,usd_per_kwh)");
    add(app, "--plans", "plans_path", "plan book produced by `plangen`");
    app->add_flag("--resample-participants", resample, "draw a fresh participant subset per repetition");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : read_config(fs::path(config_path));
    for (const auto& [key, value] : values) config.set(key, value);
    if (resample) config.resample_participants = true;
    config.validate();
    return config;
  }

private:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }
};

FleetScenario load_fleet(const ExperimentConfig& config) {
  const Seed seed = config.seed_or_throw();
  if (!config.trips_path.empty()) {
    return ingest_fleet(config.trips_path, config.catalog_path, config.horizon, config.observed_steps, seed,
                        config.kwh_per_gallon);
  }
  const auto catalog = config.catalog_path.empty() ? default_catalog() : read_catalog(config.catalog_path);
  return synthesize_fleet(config.fleet_size, std::max(config.observed_steps, config.horizon), seed, catalog);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

int cmd_synth(const ConfigFlags& flags, const fs::path& out_path) {
  const auto config = flags.resolve();
  const auto trips = synthesize_trips(config.fleet_size, config.observed_steps, config.seed_or_throw());
  auto out = open_out(out_path);
  write_trips(out, trips);
  std::cout << "wrote " << trips.size() << " trips for " << config.fleet_size << " vehicles to " << out_path.string() << '\n';
  return 0;
}

int cmd_ingest(const ConfigFlags& flags, const fs::path& out_path) {
  const auto config = flags.resolve();
  const auto fleet = load_fleet(config);
  auto out = open_out(out_path);
  out << "agent_id,model,trips,min_soc,windows\n";
  for (const auto& agent : fleet.agents) {
    double lowest = 1.0;
    for (double x : agent.soc.values) lowest = std::min(lowest, x);
    const auto windows = compute_windows(agent.soc, agent.model);
    out << agent.id << ',' << agent.model.name << ',' << agent.trips.size() << ',' << lowest << ','
        << windows.size() << '\n';
  }
  std::cout << "ingested " << fleet.agents.size() << " vehicles over " << fleet.observed_steps << " timesteps\n";
  return 0;
}

int cmd_plangen(const ConfigFlags& flags, const fs::path& out_path) {
  const auto config = flags.resolve();
  const auto book = build_plan_book(load_fleet(config), config);
  auto out = open_out(out_path);
  write_plan_book(out, book);
  std::cout << "wrote plans for " << book.agent_count() << " agents x " << book.periods << " periods to "
            << out_path.string() << '\n';
  return 0;
}

int cmd_optimize(const ConfigFlags& flags, const fs::path& out_dir) {
  const auto config = flags.resolve();
  const auto result = run_experiment(config);
  write_results(result, out_dir);
  std::vector<double> reductions;
  for (const auto& r : result.repetitions) reductions.push_back(r.metrics.relative_sigma_reduction);
  const auto s = summarize(reductions);
  std::cout << to_string(config.objective) << ": " << result.repetitions.size() << " repetitions, "
            << result.agents << " agents; relative sigma reduction " << s.mean << " +/- " << s.stddev
            << "; results in " << out_dir.string() << '\n';
  return 0;
}

int cmd_forecast(const fs::path& observations, const fs::path& out_path, const std::string& table,
                 std::vector<double> years) {
  const auto obs = read_observations(observations);
  const auto fit = fit_adoption(obs);
  std::cout << "cap = " << fit.curve.cap << " vehicles, rate = " << fit.curve.rate
            << " /yr, midpoint = " << fit.curve.midpoint << " (rss " << fit.residual_sum_squares << ", "
            << fit.iterations << " iterations)\n";
  std::vector<ParadigmContribution> paradigms;
  for (auto& p : reference_contributions()) {
    if (p.paradigm == "control" || p.horizon == table) paradigms.push_back(std::move(p));
  }
  if (years.empty()) {
    for (int y = 2010; y <= 2030; ++y) years.push_back(y);
  }
  auto out = open_out(out_path);
  write_projection(out, fit.curve, paradigms, years);
  std::cout << "wrote projection to " << out_path.string() << '\n';
  return 0;
}

std::vector<std::vector<std::string>> read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

// Prints mean +/- sd of every metrics.csv column and re-derives each
// repetition's sigma from its curve file as a consistency check.
int cmd_report(const fs::path& dir) {
  const auto rows = read_table(dir / "metrics.csv");
  if (rows.size() < 2) throw Error("report: no repetitions in " + (dir / "metrics.csv").string());
  const auto& header = rows.front();
  for (std::size_t c = 2; c < header.size(); ++c) {
    std::vector<double> xs;
    for (std::size_t r = 1; r < rows.size(); ++r) xs.push_back(std::stod(rows[r].at(c)));
    const auto s = summarize(xs);
    std::cout << header[c] << ": " << s.mean << " +/- " << s.stddev << '\n';
  }
  std::size_t mismatches = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    std::ostringstream name;
    name << "rep_" << std::setw(3) << std::setfill('0') << rows[r][0] << ".csv";
    std::ifstream in(dir / "curves" / name.str());
    if (!in) throw Error("report: missing curve " + name.str());
    const auto curve = read_curve(in, name.str());
    const double sigma = population_stddev(curve);
    if (std::abs(sigma - std::stod(rows[r][2])) > 1e-9 * std::max(1.0, sigma)) ++mismatches;
  }
  std::cout << "curves checked: " << rows.size() - 1 << ", sigma mismatches: " << mismatches << '\n';
  return mismatches == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized EV charging planner and simulator"};
  app.set_version_flag("--version", std::string(library_version()));
  app.require_subcommand(1);

  ConfigFlags synth_flags, ingest_flags, plangen_flags, optimize_flags;
  std::string synth_out = "trips.csv", ingest_out = "fleet.csv", plans_out = "plans.json", out_dir = "results";

  auto* synth = app.add_subcommand("synth", "generate a synthetic commute trip CSV");
  synth_flags.attach(synth, false);
  synth->add_option("--out", synth_out, "output trip CSV");

  auto* ingest = app.add_subcommand("ingest", "validate trips and summarize the fleet");
  ingest_flags.attach(ingest, false);
  ingest->add_option("--out", ingest_out, "output fleet summary CSV");

  auto* plangen = app.add_subcommand("plangen", "generate per-agent plans for every period");
  plangen_flags.attach(plangen, false);
  plangen->add_option("--out", plans_out, "output plan book (JSON)");

  auto* optimize = app.add_subcommand("optimize", "run seeded repetitions of the tree selection");
  optimize_flags.attach(optimize, true);
  optimize->add_option("--out-dir", out_dir, "directory for CSV results and run metadata");

  std::string observations = "data/california_sales.csv", projection_out = "projection.csv", table = "daily";
  std::vector<double> years;
  auto* forecast = app.add_subcommand("forecast", "fit the adoption curve and project peak power");
  forecast->add_option("--observations", observations, "CSV year,cumulative_sales")->check(CLI::ExistingFile);
  forecast->add_option("--out", projection_out, "output projection CSV");
  forecast->add_option("--table", table, "reference contributions: daily or weekly")
      ->check(CLI::IsMember({"daily", "weekly"}));
  forecast->add_option("--years", years, "projection years (default 2010..2030)");

  std::string results = "results";
  auto* report = app.add_subcommand("report", "summarize a results directory");
  report->add_option("--results", results, "directory written by `optimize`");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(synth_flags, synth_out);
    if (*ingest) return cmd_ingest(ingest_flags, ingest_out);
    if (*plangen) return cmd_plangen(plangen_flags, plans_out);
    if (*optimize) {
      if (!optimize_flags.values.count("seed")) {
        std::cerr << "error: optimize requires --seed\n";
        return 2;
      }
      return cmd_optimize(optimize_flags, out_dir);
    }
    if (*forecast) return cmd_forecast(observations, projection_out, table, years);
    if (*report) return cmd_report(results);
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
