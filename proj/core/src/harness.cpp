#include "evcoop/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"

#ifndef EVCOOP_VERSION
#define EVCOOP_VERSION "0.0.0"
#endif

namespace evcoop {

namespace {

constexpr std::size_t kMinutesPerDay = 1440;

// Stream tags for mix_seed; keep them stable, they define replayability.
constexpr std::uint64_t kModelStream = 0xA551;
constexpr std::uint64_t kParticipantStream = 0x9A47;
constexpr std::uint64_t kPlanStream = 0x504C414E;

std::size_t parse_size(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size())
    throw Error("config '" + std::string(key) + "': expected a non-negative integer, got '" + std::string(value) + "'");
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(out))
    throw Error("config '" + std::string(key) + "': expected a number, got '" + std::string(value) + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw Error("config '" + std::string(key) + "': expected true/false, got '" + std::string(value) + "'");
}

std::string fmt(double x) { return csv::format_double(x); }

std::string vehicle_name(std::size_t index, std::size_t n) {
  std::ostringstream os;
  const int width = std::max<int>(3, static_cast<int>(std::to_string(n).size()));
  os << "ev" << std::setw(width) << std::setfill('0') << index + 1;
  return os.str();
}

// Minute-of-horizon helper for the trip generator.
struct DayBuilder {
  std::mt19937_64& rng;
  std::vector<TripRecord>& out;
  std::string id;
  std::int64_t day_start;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double normal(double mu, double sd) { return std::normal_distribution<double>(mu, sd)(rng); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }

  // Appends a trip starting at `minute` of the day; returns its end minute.
  std::int64_t trip(double minute, double duration, double speed, Destination dest) {
    TripRecord t;
    t.vehicle_id = id;
    t.start = day_start + static_cast<std::int64_t>(std::lround(minute));
    t.end = t.start + std::max<std::int64_t>(1, std::lround(duration));
    t.avg_speed_mph = std::round(speed * 10.0) / 10.0;
    t.destination = dest;
    out.push_back(t);
    return t.end - day_start;
  }

  double commute_speed() { return chance(0.15) ? uniform(61.0, 68.0) : uniform(20.0, 55.0); }
};

void synthesize_day(DayBuilder& day, bool weekday) {
  if (weekday) {
    const double depart = std::clamp(day.normal(7.75 * 60, 40.0), 5.5 * 60, 10.0 * 60);
    const double commute = day.uniform(15.0, 45.0);
    const auto dest = day.chance(0.8) ? Destination::work : Destination::school;
    const auto arrive = static_cast<double>(day.trip(depart, commute, day.commute_speed(), dest));
    const double leave = std::clamp(day.normal(17.25 * 60, 45.0), std::max(15.0 * 60, arrive + 240.0), 20.0 * 60);
    const auto home = static_cast<double>(day.trip(leave, day.uniform(15.0, 45.0), day.commute_speed(), Destination::home));
    if (day.chance(0.3)) {
      const double out = std::max(home + 30.0, day.normal(19.5 * 60, 40.0));
      const double leg = day.uniform(10.0, 25.0);
      const double speed = day.uniform(20.0, 35.0);
      if (out + 2 * leg + 90.0 < 23.5 * 60) {
        const auto at_errand = static_cast<double>(day.trip(out, leg, speed, Destination::other));
        day.trip(at_errand + day.uniform(20.0, 60.0), leg, speed, Destination::home);
      }
    }
  } else {
    double cursor = day.uniform(9.5 * 60, 13.0 * 60);
    const int outings = day.chance(0.5) ? 2 : 1;
    for (int k = 0; k < outings && cursor < 19.0 * 60; ++k) {
      const double leg = day.uniform(15.0, 45.0);
      const double speed = day.uniform(20.0, 50.0);
      const auto there = static_cast<double>(day.trip(cursor, leg, speed, Destination::other));
      const auto back = static_cast<double>(day.trip(there + day.uniform(60.0, 180.0), leg, speed, Destination::home));
      cursor = back + day.uniform(90.0, 240.0);
    }
  }
}

} // namespace

std::string_view library_version() noexcept { return EVCOOP_VERSION; }

// --- configuration ---

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  value = csv::trim(value);
  if (key == "horizon") horizon = parse_size(key, value);
  else if (key == "objective") objective = parse_objective(value);
  else if (key == "participation") participation = parse_real(key, value);
  else if (key == "repetitions") repetitions = parse_size(key, value);
  else if (key == "v_max") v_max = parse_size(key, value);
  else if (key == "interval_m") interval_m = parse_size(key, value);
  else if (key == "seed") seed = parse_size(key, value);
  else if (key == "price_path") price_path = std::string(value);
  else if (key == "trips_path") trips_path = std::string(value);
  else if (key == "catalog_path") catalog_path = std::string(value);
  else if (key == "plans_path") plans_path = std::string(value);
  else if (key == "fleet_size") fleet_size = parse_size(key, value);
  else if (key == "observed_steps") observed_steps = parse_size(key, value);
  else if (key == "smoothing_width") smoothing_width = parse_size(key, value);
  else if (key == "resample_participants") resample_participants = parse_bool(key, value);
  else if (key == "kwh_per_gallon") kwh_per_gallon = parse_real(key, value);
  else throw Error("unknown config key '" + std::string(key) + "'");
}

void ExperimentConfig::validate() const {
  if (horizon == 0) throw Error("config: horizon must be >= 1");
  if (!(participation > 0.0 && participation <= 1.0)) throw Error("config: participation must lie in (0,1]");
  if (repetitions == 0) throw Error("config: repetitions must be >= 1");
  if (v_max == 0) throw Error("config: v_max must be >= 1");
  if (interval_m == 0) throw Error("config: interval_m must be >= 1");
  if (smoothing_width == 0) throw Error("config: smoothing_width must be >= 1");
  if (fleet_size == 0) throw Error("config: fleet_size must be >= 1");
  if (!(kwh_per_gallon > 0.0)) throw Error("config: kwh_per_gallon must be > 0");
}

Seed ExperimentConfig::seed_or_throw() const {
  if (!seed) throw Error("config: a seed is required");
  return *seed;
}

ExperimentConfig read_config(std::istream& in, const std::string& source) {
  ExperimentConfig config;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    const auto text = csv::trim(std::string_view(line).substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, row, "expected 'key = value'");
    try {
      config.set(csv::trim(text.substr(0, eq)), csv::trim(text.substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(source, row, e.what());
    }
  }
  return config;
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_config(in, path.string());
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  out << "horizon = " << c.horizon << '\n'
      << "objective = " << to_string(c.objective) << '\n'
      << "participation = " << fmt(c.participation) << '\n'
      << "repetitions = " << c.repetitions << '\n'
      << "v_max = " << c.v_max << '\n'
      << "interval_m = " << c.interval_m << '\n';
  if (c.seed) out << "seed = " << *c.seed << '\n';
  if (!c.price_path.empty()) out << "price_path = " << c.price_path.string() << '\n';
  if (!c.trips_path.empty()) out << "trips_path = " << c.trips_path.string() << '\n';
  if (!c.catalog_path.empty()) out << "catalog_path = " << c.catalog_path.string() << '\n';
  if (!c.plans_path.empty()) out << "plans_path = " << c.plans_path.string() << '\n';
  out << "fleet_size = " << c.fleet_size << '\n'
      << "observed_steps = " << c.observed_steps << '\n'
      << "smoothing_width = " << c.smoothing_width << '\n'
      << "resample_participants = " << (c.resample_participants ? "true" : "false") << '\n'
      << "kwh_per_gallon = " << fmt(c.kwh_per_gallon) << '\n';
}

// --- fleets ---

FleetScenario build_fleet(std::span<const TripRecord> trips, std::span<const EvModel> catalog,
                          std::size_t observed_steps, Seed seed, double kwh_per_gallon) {
  if (observed_steps == 0) throw Error("build_fleet: observed period must be >= 1 step");
  const auto groups = group_by_vehicle(trips);
  if (groups.empty()) throw Error("build_fleet: no vehicles");
  const auto models = assign_models(groups.size(), catalog, mix_seed(seed, kModelStream));

  FleetScenario fleet;
  fleet.observed_steps = observed_steps;
  fleet.agents.reserve(groups.size());
  SocProfileOptions options;
  options.kwh_per_gallon = kwh_per_gallon;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    FleetAgent agent;
    agent.id = groups[i].first;
    agent.model = models[i];
    agent.trips = groups[i].second;
    for (std::size_t k = 1; k < agent.trips.size(); ++k) {
      if (agent.trips[k].start < agent.trips[k - 1].end)
        throw Error("vehicle '" + agent.id + "': overlapping trips");
    }
    agent.soc = build_soc_profile(agent.trips, agent.model, observed_steps, options);
    fleet.agents.push_back(std::move(agent));
  }
  return fleet;
}

FleetScenario ingest_fleet(const std::filesystem::path& trips_path, const std::filesystem::path& catalog_path,
                           std::size_t horizon, std::size_t observed_steps, Seed seed, double kwh_per_gallon) {
  if (horizon == 0) throw Error("ingest_fleet: horizon must be >= 1");
  const auto trips = read_trips(trips_path);
  const auto catalog = catalog_path.empty() ? default_catalog() : read_catalog(catalog_path);
  if (observed_steps == 0) {
    std::int64_t last = 0;
    for (const auto& t : trips) last = std::max(last, t.end);
    const auto periods = (static_cast<std::size_t>(last) + horizon - 1) / horizon;
    observed_steps = std::max<std::size_t>(1, periods) * horizon;
  }
  return build_fleet(trips, catalog, observed_steps, seed, kwh_per_gallon);
}

std::vector<TripRecord> synthesize_trips(std::size_t n, std::size_t observed_steps, Seed seed) {
  if (n == 0) throw Error("synthesize_trips: n must be >= 1");
  std::vector<TripRecord> trips;
  const std::size_t days = (observed_steps + kMinutesPerDay - 1) / kMinutesPerDay;
  for (std::size_t v = 0; v < n; ++v) {
    std::mt19937_64 rng(mix_seed(seed, v));
    std::vector<TripRecord> own;
    for (std::size_t d = 0; d < days; ++d) {
      DayBuilder day{rng, own, vehicle_name(v, n), static_cast<std::int64_t>(d * kMinutesPerDay)};
      synthesize_day(day, d % 7 < 5);
    }
    for (auto& t : own) {
      if (t.start >= static_cast<std::int64_t>(observed_steps)) continue;
      trips.push_back(std::move(t));
    }
  }
  return trips;
}

FleetScenario synthesize_fleet(std::size_t n, std::size_t observed_steps, Seed seed,
                               std::span<const EvModel> catalog) {
  const auto trips = synthesize_trips(n, observed_steps, seed);
  if (trips.empty()) {
    // Horizon too short for any trip: every vehicle idles at full charge.
    FleetScenario fleet;
    fleet.observed_steps = observed_steps;
    const auto models = assign_models(n, catalog, mix_seed(seed, kModelStream));
    for (std::size_t i = 0; i < n; ++i) {
      FleetAgent agent{vehicle_name(i, n), models[i], {}, build_soc_profile({}, models[i], observed_steps)};
      fleet.agents.push_back(std::move(agent));
    }
    return fleet;
  }
  auto fleet = build_fleet(trips, catalog, observed_steps, seed);
  if (fleet.agents.size() != n) {
    // Vehicles without trips in a short horizon still belong to the fleet.
    std::vector<FleetAgent> all;
    const auto models = assign_models(n, catalog, mix_seed(seed, kModelStream));
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto id = vehicle_name(i, n);
      if (k < fleet.agents.size() && fleet.agents[k].id == id) {
        all.push_back(std::move(fleet.agents[k++]));
      } else {
        all.push_back({id, models[i], {}, build_soc_profile({}, models[i], observed_steps)});
      }
    }
    fleet.agents = std::move(all);
  }
  return fleet;
}

std::vector<std::size_t> select_participants(std::size_t n, double fraction, Seed seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw Error("select_participants: fraction must lie in [0,1]");
  const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// --- plan books ---

PlanBook build_plan_book(const FleetScenario& fleet, const ExperimentConfig& config) {
  config.validate();
  const Seed seed = config.seed_or_throw();
  const std::size_t T = config.horizon;
  if (fleet.observed_steps % T != 0) {
    throw Error("plan book: observed period (" + std::to_string(fleet.observed_steps) +
                ") is not a multiple of the horizon (" + std::to_string(T) + ")");
  }
  PlanBook book;
  book.horizon = T;
  book.periods = fleet.observed_steps / T;
  book.step_hours = 1.0 / 60.0;
  for (std::size_t a = 0; a < fleet.agents.size(); ++a) {
    const auto& agent = fleet.agents[a];
    book.agent_ids.push_back(agent.id);
    book.models.push_back(agent.model.name);
    book.step_hours = agent.soc.step_hours();
    const auto likelihood = usage_likelihood(agent.trips, T, config.smoothing_width, fleet.observed_steps);
    std::vector<PeriodPlans> periods;
    periods.reserve(book.periods);
    for (std::size_t p = 0; p < book.periods; ++p) {
      SocSignal slice;
      slice.resolution_minutes = agent.soc.resolution_minutes;
      const auto first = agent.soc.values.begin() + static_cast<std::ptrdiff_t>(p * T);
      slice.values.assign(first, first + static_cast<std::ptrdiff_t>(T + 1));
      PlanOptions options{config.interval_m, config.v_max, mix_seed(mix_seed(seed, kPlanStream + a), p)};
      PeriodPlans entry;
      entry.plans = plan_agent(agent.id, slice, agent.model, likelihood, options);
      entry.control = control_plan(slice, agent.model, likelihood);
      periods.push_back(std::move(entry));
    }
    book.entries.push_back(std::move(periods));
  }
  return book;
}

void write_plan_book(std::ostream& out, const PlanBook& book) {
  nlohmann::json j;
  j["format"] = "evcoop-planbook";
  j["version"] = 1;
  j["horizon"] = book.horizon;
  j["periods"] = book.periods;
  j["step_hours"] = book.step_hours;
  auto agents = nlohmann::json::array();
  for (std::size_t a = 0; a < book.agent_count(); ++a) {
    nlohmann::json agent;
    agent["agent_id"] = book.agent_ids[a];
    agent["model"] = book.models[a];
    auto periods = nlohmann::json::array();
    for (const auto& entry : book.entries[a]) {
      periods.push_back({{"control", {{"discomfort", entry.control.discomfort}, {"runs", encode_runs(entry.control.values)}}},
                         {"plan_set", entry.plans}});
    }
    agent["periods"] = std::move(periods);
    agents.push_back(std::move(agent));
  }
  j["agents"] = std::move(agents);
  out << j.dump() << '\n';
}

PlanBook read_plan_book(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("plan book: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "evcoop-planbook") throw Error("plan book: unknown format");
    PlanBook book;
    book.horizon = j.at("horizon").get<std::size_t>();
    book.periods = j.at("periods").get<std::size_t>();
    book.step_hours = j.at("step_hours").get<double>();
    for (const auto& agent : j.at("agents")) {
      book.agent_ids.push_back(agent.at("agent_id").get<std::string>());
      book.models.push_back(agent.at("model").get<std::string>());
      std::vector<PeriodPlans> periods;
      for (const auto& p : agent.at("periods")) {
        PeriodPlans entry;
        entry.control.discomfort = p.at("control").at("discomfort").get<double>();
        entry.control.values = decode_runs(p.at("control").at("runs"), book.horizon);
        entry.plans = p.at("plan_set").get<PlanSet>();
        for (const auto& plan : entry.plans.plans) {
          if (plan.values.size() != book.horizon) throw Error("plan book: plan horizon mismatch");
        }
        periods.push_back(std::move(entry));
      }
      if (periods.size() != book.periods) throw Error("plan book: agent '" + book.agent_ids.back() + "' has wrong period count");
      book.entries.push_back(std::move(periods));
    }
    return book;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("plan book: ") + e.what());
  }
}

PlanBook read_plan_book(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_plan_book(in);
}

// --- prices ---

PriceSignal default_price(std::size_t steps) {
  PriceSignal price;
  price.values.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double hour = static_cast<double>(t % kMinutesPerDay) / 60.0;
    const double morning = (hour - 8.0) / 1.5;
    const double evening = (hour - 18.5) / 2.0;
    price.values[t] = 0.08 + 0.06 * std::exp(-0.5 * morning * morning) + 0.10 * std::exp(-0.5 * evening * evening);
  }
  return price;
}

PriceSignal load_price(const ExperimentConfig& config, std::size_t total_steps) {
  if (config.price_path.empty()) return default_price(total_steps);
  auto price = read_price(config.price_path);
  price.validate();
  const std::size_t len = price.values.size();
  if (total_steps % len != 0) {
    throw Error("price signal of " + std::to_string(len) + " steps does not tile a horizon of " +
                std::to_string(total_steps));
  }
  PriceSignal tiled;
  tiled.values.resize(total_steps);
  for (std::size_t t = 0; t < total_steps; ++t) tiled.values[t] = price.values[t % len];
  return tiled;
}

// --- experiments ---

Seed repetition_seed(Seed seed, std::size_t repetition) { return mix_seed(seed, repetition); }

ExperimentResult optimize_plan_book(const PlanBook& book, const ExperimentConfig& config, const PriceSignal& price) {
  config.validate();
  const Seed seed = config.seed_or_throw();
  const std::size_t n = book.agent_count();
  const std::size_t T = book.horizon;
  const std::size_t P = book.periods;
  if (n == 0) throw Error("optimize: empty plan book");
  if (config.horizon != T) {
    throw Error("optimize: config horizon " + std::to_string(config.horizon) + " differs from plan book horizon " +
                std::to_string(T));
  }
  const std::size_t total = T * P;
  if (price.values.size() == 0 || total % price.values.size() != 0)
    throw Error("optimize: price signal does not tile the horizon");
  Series full_price(total);
  for (std::size_t t = 0; t < total; ++t) full_price[t] = price.values[t % price.values.size()];

  ExperimentResult result;
  result.config = config;
  result.agents = n;
  result.periods = P;
  result.control_curve.assign(total, 0.0);
  std::vector<double> control_discomfort(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < P; ++p) {
      const auto& c = book.entries[a][p].control;
      for (std::size_t t = 0; t < T; ++t) result.control_curve[p * T + t] += c.values[t];
      control_discomfort[a] += c.discomfort / static_cast<double>(P);
    }
  }
  result.control = curve_metrics(result.control_curve, full_price, book.step_hours);
  result.control_discomfort = system_discomfort(control_discomfort);
  result.control_fairness = fairness(control_discomfort);

  auto participants_for = [&](std::size_t rep) {
    const Seed s = config.resample_participants ? mix_seed(repetition_seed(seed, rep), kParticipantStream)
                                                : mix_seed(seed, kParticipantStream);
    return select_participants(n, config.participation, s);
  };

  std::vector<std::vector<std::size_t>> counted_selections;
  for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
    RepetitionResult r;
    r.repetition = rep;
    r.seed = repetition_seed(seed, rep);
    r.participants = participants_for(rep);
    std::vector<bool> participates(n, false);
    for (std::size_t a : r.participants) participates[a] = true;

    const auto tree = build_tree(n, r.seed);
    r.curve.assign(total, 0.0);
    r.agent_discomfort.assign(n, 0.0);
    std::vector<double> first_plan(n, 0.0), last_plan(n, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      std::vector<std::vector<Series>> plans(n);
      for (std::size_t a = 0; a < n; ++a) {
        const auto& entry = book.entries[a][p];
        if (participates[a]) {
          for (const auto& plan : entry.plans.plans) plans[a].push_back(plan.values);
        } else {
          plans[a].push_back(entry.control.values);
        }
      }
      const std::span<const double> period_price(full_price.data() + p * T, T);
      OptimizationResult opt;
      try {
        opt = run_optimization(plans, tree, config.objective, period_price);
      } catch (const Error& e) {
        throw Error("repetition " + std::to_string(rep) + ", period " + std::to_string(p) + ": " + e.what());
      }
      std::copy(opt.total.begin(), opt.total.end(), r.curve.begin() + static_cast<std::ptrdiff_t>(p * T));

      std::vector<std::size_t> counted;
      for (std::size_t a = 0; a < n; ++a) {
        const auto& entry = book.entries[a][p];
        const double scale = 1.0 / static_cast<double>(P);
        if (participates[a]) {
          counted.push_back(opt.selected[a]);
          r.agent_discomfort[a] += entry.plans.plans[opt.selected[a]].discomfort * scale;
          first_plan[a] += entry.plans.plans.front().discomfort * scale;
          last_plan[a] += entry.plans.plans.back().discomfort * scale;
        } else {
          r.agent_discomfort[a] += entry.control.discomfort * scale;
          first_plan[a] += entry.control.discomfort * scale;
          last_plan[a] += entry.control.discomfort * scale;
        }
      }
      counted_selections.push_back(std::move(counted));
      r.selections.push_back(std::move(opt.selected));
    }

    const auto cm = curve_metrics(r.curve, full_price, book.step_hours);
    r.metrics.sigma = cm.sigma;
    r.metrics.cost = cm.cost;
    r.metrics.peak_power = cm.peak;
    r.metrics.mean_discomfort = system_discomfort(r.agent_discomfort);
    r.metrics.fairness = fairness(r.agent_discomfort);
    r.metrics.relative_sigma_reduction =
        result.control.sigma > 0.0 ? relative_reduction(cm.sigma, result.control.sigma) : std::nan("");
    r.metrics.relative_cost_reduction =
        result.control.cost > 0.0 ? relative_reduction(cm.cost, result.control.cost) : std::nan("");
    r.discomfort_first_plan = system_discomfort(first_plan);
    r.discomfort_last_plan = system_discomfort(last_plan);
    r.fairness_first_plan = fairness(first_plan);
    r.fairness_last_plan = fairness(last_plan);
    result.repetitions.push_back(std::move(r));
  }
  result.selection_distribution = plan_selection_distribution(counted_selections, config.v_max);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Seed seed = config.seed_or_throw();
  PlanBook book;
  if (!config.plans_path.empty()) {
    book = read_plan_book(config.plans_path);
  } else {
    FleetScenario fleet;
    if (!config.trips_path.empty()) {
      fleet = ingest_fleet(config.trips_path, config.catalog_path, config.horizon, config.observed_steps, seed,
                           config.kwh_per_gallon);
    } else {
      const auto catalog = config.catalog_path.empty() ? default_catalog() : read_catalog(config.catalog_path);
      const std::size_t observed = std::max(config.observed_steps, config.horizon);
      fleet = synthesize_fleet(config.fleet_size, observed, seed, catalog);
    }
    book = build_plan_book(fleet, config);
  }
  const auto price = load_price(config, book.horizon * book.periods);
  return optimize_plan_book(book, config, price);
}

MeanStd summarize(std::span<const double> values) {
  if (values.empty()) return {};
  return {mean(values), population_stddev(values)};
}

void write_curve(std::ostream& out, std::span<const double> curve) {
  out << "t,kw\n";
  for (std::size_t t = 0; t < curve.size(); ++t) out << t << ',' << fmt(curve[t]) << '\n';
}

Series read_curve(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  if (!csv::next_row(in, line, row)) throw ParseError(source, row, "empty curve file");
  csv::expect_header(csv::split(line), {"t", "kw"}, source);
  Series curve;
  while (csv::next_row(in, line, row)) {
    const auto f = csv::split(line);
    if (f.size() != 2) throw ParseError(source, row, "expected 2 fields");
    if (csv::to_int(f[0], source, row, "t") != static_cast<std::int64_t>(curve.size()))
      throw ParseError(source, row, "timesteps must be consecutive from 0");
    curve.push_back(csv::to_double(f[1], source, row, "kw"));
  }
  return curve;
}

void write_results(const ExperimentResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "curves");
  auto open = [](const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
  };

  {
    auto out = open(dir / "metrics.csv");
    out << "repetition,seed,sigma_kw,cost_usd,peak_kw,mean_discomfort,fairness,relative_sigma_reduction,"
           "relative_cost_reduction,discomfort_plan1,discomfort_planv,fairness_plan1,fairness_planv\n";
    for (const auto& r : result.repetitions) {
      const auto& m = r.metrics;
      out << r.repetition << ',' << r.seed << ',' << fmt(m.sigma) << ',' << fmt(m.cost) << ',' << fmt(m.peak_power)
          << ',' << fmt(m.mean_discomfort) << ',' << fmt(m.fairness) << ',' << fmt(m.relative_sigma_reduction) << ','
          << fmt(m.relative_cost_reduction) << ',' << fmt(r.discomfort_first_plan) << ','
          << fmt(r.discomfort_last_plan) << ',' << fmt(r.fairness_first_plan) << ',' << fmt(r.fairness_last_plan)
          << '\n';
    }
  }
  {
    auto out = open(dir / "selection_distribution.csv");
    out << "plan,probability\n";
    for (std::size_t j = 0; j < result.selection_distribution.size(); ++j) {
      out << j + 1 << ',' << fmt(result.selection_distribution[j]) << '\n';
    }
  }
  {
    auto out = open(dir / "selections.csv");
    out << "repetition,period,agent_index,plan\n";
    for (const auto& r : result.repetitions) {
      for (std::size_t p = 0; p < r.selections.size(); ++p) {
        for (std::size_t a = 0; a < r.selections[p].size(); ++a) {
          out << r.repetition << ',' << p << ',' << a << ',' << r.selections[p][a] + 1 << '\n';
        }
      }
    }
  }
  {
    auto out = open(dir / "curves" / "control.csv");
    write_curve(out, result.control_curve);
  }
  for (const auto& r : result.repetitions) {
    std::ostringstream name;
    name << "rep_" << std::setw(3) << std::setfill('0') << r.repetition << ".csv";
    auto out = open(dir / "curves" / name.str());
    write_curve(out, r.curve);
  }
  {
    auto out = open(dir / "run.txt");
    out << "# evcoop run metadata\n";
    out << "version = " << library_version() << '\n';
    out << "repetition_seed = splitmix64(seed + 0x9E3779B97F4A7C15 * (repetition + 1))\n";
    write_config(out, result.config);
    out << "agents = " << result.agents << '\n' << "periods = " << result.periods << '\n';
    out << "control.sigma_kw = " << fmt(result.control.sigma) << '\n'
        << "control.cost_usd = " << fmt(result.control.cost) << '\n'
        << "control.peak_kw = " << fmt(result.control.peak) << '\n'
        << "control.mean_discomfort = " << fmt(result.control_discomfort) << '\n'
        << "control.fairness = " << fmt(result.control_fairness) << '\n';
    auto column = [&](auto get) {
      std::vector<double> xs;
      for (const auto& r : result.repetitions) xs.push_back(get(r));
      return summarize(xs);
    };
    const std::pair<const char*, MeanStd> rows[] = {
        {"sigma_kw", column([](const RepetitionResult& r) { return r.metrics.sigma; })},
        {"cost_usd", column([](const RepetitionResult& r) { return r.metrics.cost; })},
        {"peak_kw", column([](const RepetitionResult& r) { return r.metrics.peak_power; })},
        {"mean_discomfort", column([](const RepetitionResult& r) { return r.metrics.mean_discomfort; })},
        {"fairness", column([](const RepetitionResult& r) { return r.metrics.fairness; })},
        {"relative_sigma_reduction", column([](const RepetitionResult& r) { return r.metrics.relative_sigma_reduction; })},
        {"relative_cost_reduction", column([](const RepetitionResult& r) { return r.metrics.relative_cost_reduction; })},
    };
    for (const auto& [name, ms] : rows) {
      out << name << ".mean = " << fmt(ms.mean) << '\n' << name << ".std = " << fmt(ms.stddev) << '\n';
    }
  }
}

} // namespace evcoop
