#pragma once

// Local operational planning: flexibility windows, charging slots, and the
// generation of alternative charging plans for one vehicle.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "evcoop/common.hpp"
#include "evcoop/ev_model.hpp"

namespace evcoop {

/// Parked interval over which the SoC does not decrease.
///
/// `start` is the strict local minimum of the SoC signal; `end` (exclusive)
/// is the last index before the SoC falls again, or the horizon. Charging at
/// step t moves the SoC from index t to t+1, so steps [start, end) are the
/// ones a plan may use.
struct FlexibilityWindow {
  std::size_t start = 0;
  std::size_t end = 0;
  double soc_at_start = 0.0;
  std::size_t index = 0;  ///< 0-based ordinal among accepted windows

  std::size_t size() const noexcept { return end - start; }
};

struct ChargingSlot {
  std::size_t window = 0;
  std::size_t ordinal = 0;  ///< 1-based position inside the window
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t rank = 0;  ///< 0 = least likely to be interrupted

  std::size_t size() const noexcept { return end - start; }
};

struct SlotCount {
  std::size_t count = 0;
  std::size_t slot_size = 0;
};

struct DemandPlan {
  Series values;  ///< kW per timestep, length T; each value is 0 or the charge power
  std::size_t plan_index = 0;  ///< 0-based
  double discomfort = 0.0;
  SocSignal planned_soc;
};

struct PlanSet {
  std::string agent_id;
  std::vector<DemandPlan> plans;

  std::size_t size() const noexcept { return plans.size(); }
};

/// Timesteps needed to charge from `soc_at_start` to full, rounded up.
std::size_t charge_time(const EvModel& model, double soc_at_start, double resolution_minutes = 1.0);

/// Windows long enough for a full charge from their starting SoC.
std::vector<FlexibilityWindow> compute_windows(const SocSignal& signal, const EvModel& model);

/// Same detection with an explicit charge-time rule, for callers that already know it.
template <typename ChargeTimeFn>
std::vector<FlexibilityWindow> compute_windows(std::span<const double> soc, ChargeTimeFn&& charge_steps);

/// Number of slots per window, capped at `v_max`, and the resulting slot size.
std::vector<SlotCount> slot_counts(std::span<const FlexibilityWindow> windows, const EvModel& model,
                                   std::size_t v_max, double resolution_minutes = 1.0);

/// Contiguous slots of `slot_size`; the last slot also takes any trailing
/// remainder of the window.
std::vector<ChargingSlot> compute_slots(const FlexibilityWindow& window, std::size_t count,
                                        std::size_t slot_size);

/// Sorts slots by ascending mean likelihood over their timesteps (earlier
/// start on ties) and fills in `rank`.
std::vector<ChargingSlot> rank_slots(std::vector<ChargingSlot> slots, const UsageLikelihood& likelihood);

/// Demand implied by a SoC trajectory: `power_kw` where the SoC strictly rises, else 0.
Series demand_from_soc(std::span<const double> soc, double power_kw);

/// Mean of (1 - soc[t+1]) * likelihood[t] over the T timesteps. `soc` has T+1 values.
double discomfort(std::span<const double> soc, std::span<const double> likelihood);

double plan_discomfort(const DemandPlan& plan, const UsageLikelihood& likelihood);

/// The historic charge-on-arrival behaviour expressed as a plan.
DemandPlan control_plan(const SocSignal& signal, const EvModel& model, const UsageLikelihood& likelihood);

struct PlanOptions {
  std::size_t interval_steps = 15;  ///< minimum uninterrupted charging interval
  std::size_t v_max = 4;
  Seed seed = 0;
};

/// Window slots in rank order, one entry per window.
using RankedSlots = std::vector<std::vector<ChargingSlot>>;

/// Builds max(slot count) plans. Plan j charges each window's deficit in
/// intervals placed uniformly at random on the interval grid of the j
/// lowest-ranked slots of that window (fewer when the window has fewer slots).
/// Outside the windows each plan keeps the historic SoC trajectory.
///
/// With no windows the set holds a single plan equal to the control plan.
PlanSet generate_plans(const std::string& agent_id, const SocSignal& signal,
                       std::span<const FlexibilityWindow> windows, const RankedSlots& ranked,
                       const EvModel& model, const UsageLikelihood& likelihood,
                       const PlanOptions& options);

/// Full pipeline: windows, slot counts, slots, ranking, plans.
PlanSet plan_agent(const std::string& agent_id, const SocSignal& signal, const EvModel& model,
                   const UsageLikelihood& likelihood, const PlanOptions& options);

class PlanGenerationError : public Error {
public:
  using Error::Error;
};

// PlanSet interchange (JSON). Values are run-length encoded as [start, end, kw] triples.
void to_json(nlohmann::json& j, const PlanSet& set);
void from_json(const nlohmann::json& j, PlanSet& set);

nlohmann::json encode_runs(std::span<const double> values);
Series decode_runs(const nlohmann::json& runs, std::size_t horizon);

// --- template implementation ---

template <typename ChargeTimeFn>
std::vector<FlexibilityWindow> compute_windows(std::span<const double> soc, ChargeTimeFn&& charge_steps) {
  std::vector<FlexibilityWindow> windows;
  if (soc.size() < 3) return windows;
  const std::size_t horizon = soc.size() - 1;
  std::size_t t = 1;
  while (t < horizon) {
    if (soc[t] < soc[t - 1] && soc[t] < soc[t + 1]) {
      const std::size_t start = t;
      ++t;
      while (t < horizon && soc[t] <= soc[t + 1]) ++t;
      const std::size_t end = t;
      if (end - start >= charge_steps(soc[start])) {
        windows.push_back({start, end, soc[start], windows.size()});
      }
    } else {
      ++t;
    }
  }
  return windows;
}

} // namespace evcoop
