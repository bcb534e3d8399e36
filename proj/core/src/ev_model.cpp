#include "evcoop/ev_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>

#include "csv.hpp"

namespace evcoop {

namespace {

const std::vector<std::string> kCatalogHeader = {"name",       "mpg_city", "mpg_highway",
                                                 "battery_kwh", "charge_kw", "market_share"};
const std::vector<std::string> kTripHeader = {"vehicle_id", "start_min", "end_min", "avg_speed_mph",
                                              "destination"};

// Values within this distance of a bound are snapped onto it.
constexpr double kSocSnap = 1e-9;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

} // namespace

void EvModel::validate() const {
  const auto positive = [&](double v, const char* what) {
    if (!(std::isfinite(v) && v > 0.0)) throw Error("model '" + name + "': " + what + " must be > 0");
  };
  positive(mpg_city, "mpg_city");
  positive(mpg_highway, "mpg_highway");
  positive(battery_kwh, "battery_kwh");
  positive(charge_kw, "charge_kw");
  if (!(market_share >= 0.0 && market_share <= 1.0))
    throw Error("model '" + name + "': market_share must lie in [0,1]");
}

void validate_catalog(std::span<const EvModel> catalog) {
  if (catalog.empty()) throw Error("catalog is empty");
  double total = 0.0;
  for (const auto& m : catalog) {
    m.validate();
    total += m.market_share;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw Error("catalog market shares sum to " + csv::format_double(total) + ", expected 1");
}

std::vector<EvModel> default_catalog() {
  // Market shares approximate 2015 US plug-in sales among these five models.
  return {
      {"Nissan Leaf", 126.0, 101.0, 24.0, 6.6, 0.28},
      {"Tesla Model S 85", 88.0, 90.0, 85.0, 9.6, 0.40},
      {"BMW i3", 137.0, 111.0, 22.0, 7.4, 0.18},
      {"Fiat 500e", 121.0, 103.0, 24.0, 6.6, 0.10},
      {"Ford Focus Electric", 110.0, 99.0, 23.0, 6.6, 0.04},
  };
}

std::vector<EvModel> read_catalog(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  if (!csv::next_row(in, line, row)) throw ParseError(source, row, "empty catalog file");
  csv::expect_header(csv::split(line), kCatalogHeader, source);

  std::vector<EvModel> catalog;
  while (csv::next_row(in, line, row)) {
    const auto f = csv::split(line);
    if (f.size() != kCatalogHeader.size())
      throw ParseError(source, row, "expected 6 fields, got " + std::to_string(f.size()));
    EvModel m;
    m.name = f[0];
    m.mpg_city = csv::to_double(f[1], source, row, "mpg_city");
    m.mpg_highway = csv::to_double(f[2], source, row, "mpg_highway");
    m.battery_kwh = csv::to_double(f[3], source, row, "battery_kwh");
    m.charge_kw = csv::to_double(f[4], source, row, "charge_kw");
    m.market_share = csv::to_double(f[5], source, row, "market_share");
    try {
      m.validate();
    } catch (const Error& e) {
      throw ParseError(source, row, e.what());
    }
    catalog.push_back(std::move(m));
  }
  validate_catalog(catalog);
  return catalog;
}

std::vector<EvModel> read_catalog(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_catalog(in, path.string());
}

void write_catalog(std::ostream& out, std::span<const EvModel> catalog) {
  out << "name,mpg_city,mpg_highway,battery_kwh,charge_kw,market_share\n";
  for (const auto& m : catalog) {
    out << m.name << ',' << csv::format_double(m.mpg_city) << ','
        << csv::format_double(m.mpg_highway) << ',' << csv::format_double(m.battery_kwh) << ','
        << csv::format_double(m.charge_kw) << ',' << csv::format_double(m.market_share) << '\n';
  }
}

const EvModel& find_model(std::span<const EvModel> catalog, std::string_view name) {
  const auto it = std::find_if(catalog.begin(), catalog.end(),
                               [&](const EvModel& m) { return m.name == name; });
  if (it == catalog.end()) throw Error("unknown model '" + std::string(name) + "'");
  return *it;
}

std::string_view to_string(Destination d) noexcept {
  switch (d) {
  case Destination::home: return "home";
  case Destination::work: return "work";
  case Destination::school: return "school";
  case Destination::other: return "other";
  }
  return "other";
}

Destination parse_destination(std::string_view text) {
  if (text == "home") return Destination::home;
  if (text == "work") return Destination::work;
  if (text == "school") return Destination::school;
  if (text == "other") return Destination::other;
  throw Error("unknown destination '" + std::string(text) + "'");
}

std::vector<TripRecord> read_trips(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  if (!csv::next_row(in, line, row)) throw ParseError(source, row, "empty trips file");
  csv::expect_header(csv::split(line), kTripHeader, source);

  std::vector<TripRecord> trips;
  while (csv::next_row(in, line, row)) {
    const auto f = csv::split(line);
    if (f.size() != kTripHeader.size())
      throw ParseError(source, row, "expected 5 fields, got " + std::to_string(f.size()));
    TripRecord t;
    t.vehicle_id = f[0];
    if (t.vehicle_id.empty()) throw ParseError(source, row, "empty vehicle_id");
    t.start = csv::to_int(f[1], source, row, "start_min");
    t.end = csv::to_int(f[2], source, row, "end_min");
    t.avg_speed_mph = csv::to_double(f[3], source, row, "avg_speed_mph");
    if (t.start < 0) throw ParseError(source, row, "start_min must be >= 0");
    if (t.end <= t.start) throw ParseError(source, row, "end_min must exceed start_min");
    if (t.avg_speed_mph < 0.0) throw ParseError(source, row, "avg_speed_mph must be >= 0");
    try {
      t.destination = parse_destination(f[4]);
    } catch (const Error& e) {
      throw ParseError(source, row, e.what());
    }
    trips.push_back(std::move(t));
  }
  if (trips.empty()) throw ParseError(source, row, "trips file has no records");
  return trips;
}

std::vector<TripRecord> read_trips(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_trips(in, path.string());
}

void write_trips(std::ostream& out, std::span<const TripRecord> trips) {
  out << "vehicle_id,start_min,end_min,avg_speed_mph,destination\n";
  for (const auto& t : trips) {
    out << t.vehicle_id << ',' << t.start << ',' << t.end << ','
        << csv::format_double(t.avg_speed_mph) << ',' << to_string(t.destination) << '\n';
  }
}

std::vector<std::pair<std::string, std::vector<TripRecord>>>
group_by_vehicle(std::span<const TripRecord> trips) {
  std::vector<std::pair<std::string, std::vector<TripRecord>>> groups;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& t : trips) {
    auto [it, inserted] = index.try_emplace(t.vehicle_id, groups.size());
    if (inserted) groups.emplace_back(t.vehicle_id, std::vector<TripRecord>{});
    groups[it->second].second.push_back(t);
  }
  for (auto& [id, list] : groups) {
    std::stable_sort(list.begin(), list.end(),
                     [](const TripRecord& a, const TripRecord& b) { return a.start < b.start; });
  }
  return groups;
}

double trip_energy(double speed_mph, double duration_hours, const EvModel& model,
                   double kwh_per_gallon) {
  if (!std::isfinite(speed_mph) || !std::isfinite(duration_hours) || !std::isfinite(kwh_per_gallon))
    throw Error("trip_energy: non-finite input");
  if (speed_mph < 0.0) throw Error("trip_energy: speed must be >= 0");
  if (duration_hours <= 0.0) throw Error("trip_energy: duration must be > 0");
  const double distance_miles = speed_mph * duration_hours;
  const double efficiency = speed_mph <= kHighwaySpeedMph ? model.mpg_city : model.mpg_highway;
  return distance_miles * kwh_per_gallon / efficiency;
}

InfeasibleTripError::InfeasibleTripError(std::string vehicle_id, std::size_t trip_index, double soc)
    : Error("vehicle '" + vehicle_id + "': trip " + std::to_string(trip_index) +
            " drives state of charge to " + csv::format_double(soc)),
      vehicle_id_(std::move(vehicle_id)), trip_index_(trip_index) {}

SocSignal build_soc_profile(std::span<const TripRecord> trips, const EvModel& model,
                            std::size_t horizon, const SocProfileOptions& options) {
  model.validate();
  if (!(options.initial_soc >= 0.0 && options.initial_soc <= 1.0))
    throw Error("initial_soc must lie in [0,1]");
  if (!(options.resolution_minutes > 0.0)) throw Error("resolution must be > 0");

  const double step_hours = options.resolution_minutes / 60.0;
  const double charge_per_step = model.charge_kw * step_hours / model.battery_kwh;

  // Per-step SoC drop while driving; zero when parked.
  Series drop(horizon, 0.0);
  std::vector<std::size_t> trip_at(horizon, SIZE_MAX);
  for (std::size_t k = 0; k < trips.size(); ++k) {
    const auto& trip = trips[k];
    if (trip.end <= trip.start) throw Error("trip with end <= start");
    if (k > 0 && trip.start < trips[k - 1].end) throw Error("trips overlap or are unsorted");
    const double hours = static_cast<double>(trip.steps()) * step_hours;
    const double energy = trip_energy(trip.avg_speed_mph, hours, model, options.kwh_per_gallon);
    const double per_step = energy / model.battery_kwh / static_cast<double>(trip.steps());
    const auto first = static_cast<std::size_t>(std::max<std::int64_t>(trip.start, 0));
    const auto last = static_cast<std::size_t>(std::min<std::int64_t>(trip.end, static_cast<std::int64_t>(horizon)));
    for (std::size_t t = first; t < last; ++t) {
      drop[t] = per_step;
      trip_at[t] = k;
    }
  }

  SocSignal signal;
  signal.resolution_minutes = options.resolution_minutes;
  signal.values.resize(horizon + 1);
  signal.values[0] = options.initial_soc;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double x = signal.values[t];
    double next = 0.0;
    if (trip_at[t] != SIZE_MAX) {
      next = x - drop[t];
      if (next < -kSocSnap) {
        const auto& id = trips[trip_at[t]].vehicle_id;
        throw InfeasibleTripError(id, trip_at[t], next);
      }
      next = std::max(next, 0.0);
    } else {
      next = x + charge_per_step;
      if (next >= 1.0 - kSocSnap) next = 1.0;
    }
    signal.values[t + 1] = next;
  }
  return signal;
}

UsageLikelihood usage_likelihood(std::span<const TripRecord> trips, std::size_t horizon,
                                 std::size_t smoothing_width, std::size_t observed_steps) {
  if (horizon == 0) throw Error("usage_likelihood: horizon must be > 0");
  if (smoothing_width == 0) throw Error("usage_likelihood: smoothing width must be >= 1");
  if (observed_steps == 0) observed_steps = horizon;
  if (observed_steps % horizon != 0)
    throw Error("usage_likelihood: observed period must be a multiple of the horizon");
  const std::size_t periods = observed_steps / horizon;

  std::vector<bool> in_transit(observed_steps, false);
  for (const auto& trip : trips) {
    const auto first = static_cast<std::size_t>(std::max<std::int64_t>(trip.start, 0));
    const auto last = static_cast<std::size_t>(
        std::clamp<std::int64_t>(trip.end, 0, static_cast<std::int64_t>(observed_steps)));
    for (std::size_t t = first; t < last; ++t) in_transit[t] = true;
  }

  Series folded(horizon, 0.0);
  for (std::size_t t = 0; t < observed_steps; ++t) {
    if (in_transit[t]) folded[t % horizon] += 1.0;
  }
  for (double& v : folded) v /= static_cast<double>(periods);

  UsageLikelihood out;
  out.values.resize(horizon);
  if (smoothing_width == 1) {
    out.values = folded;
    return out;
  }
  // Centered window [t - left, t + right]; prefix sums keep this O(T).
  const std::size_t left = (smoothing_width - 1) / 2;
  const std::size_t right = smoothing_width - 1 - left;
  Series prefix(horizon + 1, 0.0);
  for (std::size_t t = 0; t < horizon; ++t) prefix[t + 1] = prefix[t] + folded[t];
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t lo = t >= left ? t - left : 0;
    const std::size_t hi = std::min(horizon, t + right + 1);
    const double v = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
    out.values[t] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

std::vector<std::size_t> apportion(std::size_t n, std::span<const EvModel> catalog) {
  validate_catalog(catalog);
  std::vector<std::size_t> counts(catalog.size());
  std::vector<double> remainder(catalog.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const double quota = static_cast<double>(n) * catalog[i].market_share;
    counts[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(catalog.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

std::vector<EvModel> assign_models(std::size_t n, std::span<const EvModel> catalog, Seed seed) {
  if (n == 0) throw Error("assign_models: n must be > 0");
  const auto counts = apportion(n, catalog);
  std::vector<EvModel> out;
  out.reserve(n);
  for (std::size_t i = 0; i < catalog.size(); ++i) out.insert(out.end(), counts[i], catalog[i]);
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

} // namespace evcoop
