#include "evcoop/plangen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

namespace evcoop {

namespace {

constexpr double kFullSnap = 1e-9;
constexpr double kRankTieTolerance = 1e-12;

struct Cell {
  std::size_t start;
  std::size_t end;
  std::size_t size() const { return end - start; }
};

// Marks the charging steps of one plan inside one window. Each of the
// ceil(ct/m) intervals lands on a distinct m-aligned cell of the chosen
// slots; the last interval is shortened to the remainder so the total is
// exactly ct steps, and may use a truncated cell at a slot's end.
std::vector<bool> place_intervals(const FlexibilityWindow& window, std::span<const ChargingSlot> slots,
                                  std::size_t charge_steps, std::size_t interval, std::mt19937_64& rng) {
  std::vector<bool> charging(window.size(), false);
  if (charge_steps == 0) return charging;
  const std::size_t intervals = (charge_steps + interval - 1) / interval;
  const std::size_t remainder = charge_steps - (intervals - 1) * interval;

  std::vector<Cell> cells;
  for (const auto& slot : slots) {
    for (std::size_t p = slot.start; p < slot.end; p += interval) {
      cells.push_back({p, std::min(p + interval, slot.end)});
    }
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.start < b.start; });
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].size() >= remainder) eligible.push_back(c);
  }
  std::shuffle(eligible.begin(), eligible.end(), rng);

  std::vector<std::pair<std::size_t, std::size_t>> picked;  // (cell, length)
  bool remainder_placed = false;
  for (std::size_t c : eligible) {
    if (picked.size() == intervals) break;
    const bool full = cells[c].size() == interval;
    if (full) {
      picked.emplace_back(c, interval);
    } else if (!remainder_placed) {
      picked.emplace_back(c, remainder);
      remainder_placed = true;
    }
  }
  if (picked.size() < intervals) {
    throw PlanGenerationError("window " + std::to_string(window.index) + ": slots hold " +
                              std::to_string(picked.size()) + " of " + std::to_string(intervals) +
                              " charging intervals");
  }
  if (!remainder_placed) picked.back().second = remainder;

  for (const auto& [c, length] : picked) {
    for (std::size_t t = cells[c].start; t < cells[c].start + length; ++t) {
      charging[t - window.start] = true;
    }
  }
  return charging;
}

} // namespace

std::size_t charge_time(const EvModel& model, double soc_at_start, double resolution_minutes) {
  if (!(soc_at_start >= 0.0 && soc_at_start <= 1.0)) throw Error("charge_time: SoC must lie in [0,1]");
  const double hours = (1.0 - soc_at_start) * model.battery_kwh / model.charge_kw;
  const double steps = hours * 60.0 / resolution_minutes;
  return static_cast<std::size_t>(std::max(0.0, std::ceil(steps - 1e-9)));
}

std::vector<FlexibilityWindow> compute_windows(const SocSignal& signal, const EvModel& model) {
  return compute_windows(std::span<const double>(signal.values), [&](double soc) {
    return charge_time(model, soc, signal.resolution_minutes);
  });
}

std::vector<SlotCount> slot_counts(std::span<const FlexibilityWindow> windows, const EvModel& model,
                                   std::size_t v_max, double resolution_minutes) {
  if (v_max == 0) throw Error("slot_counts: v_max must be >= 1");
  std::vector<SlotCount> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    const std::size_t ct = charge_time(model, w.soc_at_start, resolution_minutes);
    if (ct == 0) {
      out.push_back({1, w.size()});
      continue;
    }
    SlotCount sc{w.size() / ct, ct};
    if (sc.count >= v_max) {
      sc.count = v_max;
      sc.slot_size = w.size() / v_max;
    }
    out.push_back(sc);
  }
  return out;
}

std::vector<ChargingSlot> compute_slots(const FlexibilityWindow& window, std::size_t count,
                                        std::size_t slot_size) {
  if (count == 0) throw Error("compute_slots: count must be >= 1");
  if (count * slot_size > window.size()) throw Error("compute_slots: slots exceed the window");
  std::vector<ChargingSlot> slots;
  slots.reserve(count);
  for (std::size_t o = 1; o <= count; ++o) {
    ChargingSlot s;
    s.window = window.index;
    s.ordinal = o;
    s.start = window.start + (o - 1) * slot_size;
    s.end = o == count ? window.end : window.start + o * slot_size;
    s.rank = o - 1;
    slots.push_back(s);
  }
  return slots;
}

std::vector<ChargingSlot> rank_slots(std::vector<ChargingSlot> slots, const UsageLikelihood& likelihood) {
  std::vector<double> score(slots.size(), 0.0);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& s = slots[k];
    if (s.end > likelihood.values.size() || s.size() == 0) throw Error("rank_slots: slot outside likelihood");
    double sum = 0.0;
    for (std::size_t t = s.start; t < s.end; ++t) sum += likelihood.values[t];
    score[k] = sum / static_cast<double>(s.size());
  }
  std::vector<std::size_t> order(slots.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::abs(score[a] - score[b]) > kRankTieTolerance) return score[a] < score[b];
    return slots[a].start < slots[b].start;
  });
  std::vector<ChargingSlot> ranked;
  ranked.reserve(slots.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    ranked.push_back(slots[order[r]]);
    ranked.back().rank = r;
  }
  return ranked;
}

Series demand_from_soc(std::span<const double> soc, double power_kw) {
  if (soc.empty()) return {};
  Series d(soc.size() - 1, 0.0);
  for (std::size_t t = 0; t + 1 < soc.size(); ++t) {
    if (soc[t] < soc[t + 1]) d[t] = power_kw;
  }
  return d;
}

double discomfort(std::span<const double> soc, std::span<const double> likelihood) {
  if (soc.size() != likelihood.size() + 1)
    throw Error("discomfort: SoC must have one more sample than the likelihood");
  if (likelihood.empty()) throw Error("discomfort: empty horizon");
  double sum = 0.0;
  for (std::size_t t = 0; t < likelihood.size(); ++t) sum += (1.0 - soc[t + 1]) * likelihood[t];
  return sum / static_cast<double>(likelihood.size());
}

double plan_discomfort(const DemandPlan& plan, const UsageLikelihood& likelihood) {
  return discomfort(plan.planned_soc.values, likelihood.values);
}

DemandPlan control_plan(const SocSignal& signal, const EvModel& model, const UsageLikelihood& likelihood) {
  DemandPlan plan;
  plan.values = demand_from_soc(signal.values, model.charge_power_kw());
  plan.plan_index = 0;
  plan.planned_soc = signal;
  plan.discomfort = plan_discomfort(plan, likelihood);
  return plan;
}

PlanSet generate_plans(const std::string& agent_id, const SocSignal& signal,
                       std::span<const FlexibilityWindow> windows, const RankedSlots& ranked,
                       const EvModel& model, const UsageLikelihood& likelihood,
                       const PlanOptions& options) {
  if (options.interval_steps == 0) throw Error("generate_plans: interval must be >= 1");
  if (ranked.size() != windows.size()) throw Error("generate_plans: one slot list per window required");
  if (likelihood.values.size() != signal.horizon())
    throw Error("generate_plans: likelihood and SoC horizons differ");

  std::size_t plan_count = 1;
  for (const auto& slots : ranked) {
    if (slots.empty()) throw Error("generate_plans: window without slots");
    plan_count = std::max(plan_count, slots.size());
  }

  const double step_hours = signal.step_hours();
  const double soc_per_step = model.charge_power_kw() * step_hours / model.battery_kwh;

  std::vector<Series> trajectories(plan_count, signal.values);
  std::mt19937_64 rng(options.seed);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& window = windows[w];
    const std::size_t ct = charge_time(model, window.soc_at_start, signal.resolution_minutes);
    for (std::size_t j = 0; j < plan_count; ++j) {
      const std::size_t used = std::min(j + 1, ranked[w].size());
      const auto charging = place_intervals(window, std::span(ranked[w]).first(used), ct,
                                            options.interval_steps, rng);
      auto& x = trajectories[j];
      for (std::size_t t = window.start; t < window.end; ++t) {
        double next = x[t];
        if (charging[t - window.start]) {
          next = x[t] + soc_per_step;
          if (next >= 1.0 - kFullSnap) next = 1.0;
        }
        x[t + 1] = next;
      }
    }
  }

  PlanSet set;
  set.agent_id = agent_id;
  set.plans.reserve(plan_count);
  for (std::size_t j = 0; j < plan_count; ++j) {
    DemandPlan plan;
    plan.plan_index = j;
    plan.planned_soc.values = std::move(trajectories[j]);
    plan.planned_soc.resolution_minutes = signal.resolution_minutes;
    plan.values = demand_from_soc(plan.planned_soc.values, model.charge_power_kw());
    plan.discomfort = plan_discomfort(plan, likelihood);
    set.plans.push_back(std::move(plan));
  }
  return set;
}

PlanSet plan_agent(const std::string& agent_id, const SocSignal& signal, const EvModel& model,
                   const UsageLikelihood& likelihood, const PlanOptions& options) {
  const auto windows = compute_windows(signal, model);
  const auto counts = slot_counts(windows, model, options.v_max, signal.resolution_minutes);
  RankedSlots ranked;
  ranked.reserve(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    ranked.push_back(rank_slots(compute_slots(windows[w], counts[w].count, counts[w].slot_size), likelihood));
  }
  return generate_plans(agent_id, signal, windows, ranked, model, likelihood, options);
}

nlohmann::json encode_runs(std::span<const double> values) {
  auto runs = nlohmann::json::array();
  std::size_t t = 0;
  while (t < values.size()) {
    if (values[t] == 0.0) {
      ++t;
      continue;
    }
    const std::size_t start = t;
    while (t < values.size() && values[t] == values[start]) ++t;
    runs.push_back({start, t, values[start]});
  }
  return runs;
}

Series decode_runs(const nlohmann::json& runs, std::size_t horizon) {
  Series values(horizon, 0.0);
  for (const auto& run : runs) {
    const auto start = run.at(0).get<std::size_t>();
    const auto end = run.at(1).get<std::size_t>();
    const auto kw = run.at(2).get<double>();
    if (start >= end || end > horizon) throw Error("plan run outside the horizon");
    std::fill(values.begin() + static_cast<std::ptrdiff_t>(start),
              values.begin() + static_cast<std::ptrdiff_t>(end), kw);
  }
  return values;
}

void to_json(nlohmann::json& j, const PlanSet& set) {
  j = nlohmann::json::object();
  j["agent_id"] = set.agent_id;
  j["v"] = set.plans.size();
  j["horizon"] = set.plans.empty() ? 0 : set.plans.front().values.size();
  auto plans = nlohmann::json::array();
  for (const auto& p : set.plans) {
    plans.push_back({{"plan", p.plan_index + 1}, {"discomfort", p.discomfort}, {"runs", encode_runs(p.values)}});
  }
  j["plans"] = std::move(plans);
}

void from_json(const nlohmann::json& j, PlanSet& set) {
  set.agent_id = j.at("agent_id").get<std::string>();
  const auto v = j.at("v").get<std::size_t>();
  const auto horizon = j.at("horizon").get<std::size_t>();
  const auto& plans = j.at("plans");
  if (plans.size() != v) throw Error("plan set '" + set.agent_id + "': v does not match plan count");
  set.plans.clear();
  for (const auto& p : plans) {
    DemandPlan plan;
    const auto index = p.at("plan").get<std::size_t>();
    if (index != set.plans.size() + 1) throw Error("plan set '" + set.agent_id + "': plans out of order");
    plan.plan_index = index - 1;
    plan.discomfort = p.at("discomfort").get<double>();
    plan.values = decode_runs(p.at("runs"), horizon);
    set.plans.push_back(std::move(plan));
  }
}

} // namespace evcoop
