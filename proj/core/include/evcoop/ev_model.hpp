#pragma once

// Vehicle catalog, trip records, and conversion of trips into state-of-charge
// and usage-likelihood signals.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evcoop/common.hpp"

namespace evcoop {

/// Energy content of one gallon of gasoline, kWh (EPA MPGe convention).
inline constexpr double kKwhPerGallon = 33.705;

/// Trips averaging more than this use the highway efficiency rating.
inline constexpr double kHighwaySpeedMph = 60.0;

struct EvModel {
  std::string name;
  double mpg_city = 0.0;
  double mpg_highway = 0.0;
  double battery_kwh = 0.0;
  double charge_kw = 0.0;  ///< charging rate; also the power drawn while charging
  double market_share = 0.0;

  double charge_power_kw() const noexcept { return charge_kw; }

  /// Throws Error when any physical quantity is non-positive or the share is outside [0,1].
  void validate() const;
};

/// Validates every model and checks that the market shares sum to 1 (1e-9).
void validate_catalog(std::span<const EvModel> catalog);

/// The five reference models: Leaf, Model S 85, i3, 500e, Focus Electric.
std::vector<EvModel> default_catalog();

/// Catalog CSV: `name,mpg_city,mpg_highway,battery_kwh,charge_kw,market_share`.
std::vector<EvModel> read_catalog(std::istream& in, const std::string& source = "<catalog>");
std::vector<EvModel> read_catalog(const std::filesystem::path& path);
void write_catalog(std::ostream& out, std::span<const EvModel> catalog);

/// Finds a model by name; throws when absent.
const EvModel& find_model(std::span<const EvModel> catalog, std::string_view name);

enum class Destination { home, work, school, other };

std::string_view to_string(Destination d) noexcept;
Destination parse_destination(std::string_view text);

/// One trip; `start`/`end` are timestep indices from horizon start, end exclusive.
struct TripRecord {
  std::string vehicle_id;
  std::int64_t start = 0;
  std::int64_t end = 0;
  double avg_speed_mph = 0.0;
  Destination destination = Destination::other;

  std::int64_t steps() const noexcept { return end - start; }
};

/// Trip CSV: `vehicle_id,start_min,end_min,avg_speed_mph,destination` with header.
std::vector<TripRecord> read_trips(std::istream& in, const std::string& source = "<trips>");
std::vector<TripRecord> read_trips(const std::filesystem::path& path);
void write_trips(std::ostream& out, std::span<const TripRecord> trips);

/// Groups trips per vehicle, preserving first-appearance order of ids and
/// sorting each vehicle's trips by start.
std::vector<std::pair<std::string, std::vector<TripRecord>>>
group_by_vehicle(std::span<const TripRecord> trips);

/// State of charge sampled at timesteps 0..T (T+1 values, each in [0,1]).
struct SocSignal {
  Series values;
  double resolution_minutes = 1.0;

  std::size_t horizon() const noexcept { return values.empty() ? 0 : values.size() - 1; }
  double step_hours() const noexcept { return resolution_minutes / 60.0; }
};

/// Probability the vehicle is in use at each of the T timesteps.
struct UsageLikelihood {
  Series values;
};

/// Energy (kWh) consumed by a trip of the given average speed and duration.
double trip_energy(double speed_mph, double duration_hours, const EvModel& model,
                   double kwh_per_gallon = kKwhPerGallon);

class InfeasibleTripError : public Error {
public:
  InfeasibleTripError(std::string vehicle_id, std::size_t trip_index, double soc);

  const std::string& vehicle_id() const noexcept { return vehicle_id_; }
  std::size_t trip_index() const noexcept { return trip_index_; }

private:
  std::string vehicle_id_;
  std::size_t trip_index_;
};

struct SocProfileOptions {
  double initial_soc = 1.0;
  double resolution_minutes = 1.0;
  double kwh_per_gallon = kKwhPerGallon;
};

/// SoC trace under charge-on-arrival behaviour: linear discharge over each
/// trip, charging at the model's rate whenever parked until full.
///
/// Trips must be sorted and non-overlapping. A trip that would take the SoC
/// below zero raises InfeasibleTripError. Trip steps past the horizon are
/// dropped.
SocSignal build_soc_profile(std::span<const TripRecord> trips, const EvModel& model,
                            std::size_t horizon, const SocProfileOptions& options = {});

/// Empirical in-transit frequency, folded onto `horizon` and smoothed.
///
/// `observed_steps` is the length of the observation period the trips cover
/// (defaults to `horizon`); it must be a multiple of `horizon`. Each period
/// contributes an in-transit indicator and the per-timestep mean is smoothed
/// by a centered moving average of `smoothing_width` (1 disables smoothing;
/// the window is truncated at the edges).
UsageLikelihood usage_likelihood(std::span<const TripRecord> trips, std::size_t horizon,
                                 std::size_t smoothing_width = 60,
                                 std::size_t observed_steps = 0);

/// Largest-remainder apportionment of `n` vehicles across the catalog shares.
/// Remainders are handed out by descending fractional part, catalog order on ties.
std::vector<std::size_t> apportion(std::size_t n, std::span<const EvModel> catalog);

/// `n` models in market-share proportion, in a seed-determined order.
std::vector<EvModel> assign_models(std::size_t n, std::span<const EvModel> catalog, Seed seed);

} // namespace evcoop
