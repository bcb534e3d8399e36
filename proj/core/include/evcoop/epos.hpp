#pragma once

// Tree-structured, bottom-up cooperative plan selection.
//
// Every agent offers one or more candidate demand plans. Agents sit in a
// tree; each parent enumerates the Cartesian product of the aggregate plans
// its children offer, pairs it with each of its own plans, and keeps the
// combination that minimizes the objective over the accumulated subtree
// demand. The parent then offers one aggregate per own plan to its own
// parent. The root fixes its plan and the choices propagate back down.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "evcoop/common.hpp"

namespace evcoop {

enum class Objective { min_dev, min_cost };

std::string_view to_string(Objective o) noexcept;
Objective parse_objective(std::string_view text);

/// Rooted tree over agent indices 0..n-1.
struct TreeTopology {
  std::size_t root = 0;
  std::vector<std::vector<std::size_t>> children;  ///< indexed by agent
  std::vector<std::size_t> level_order;            ///< root first

  std::size_t size() const noexcept { return children.size(); }
  std::size_t depth() const;

  /// Throws unless the structure is a single connected tree covering every agent once.
  void validate() const;
};

/// Seeded permutation of the agents laid out as a complete tree in level order.
TreeTopology build_tree(std::size_t agent_count, Seed seed, std::size_t fan_out = 2);

struct CombinationalPlan {
  Series values;
  std::vector<std::size_t> choice;  ///< per-child aggregate index
};

/// Cartesian product of the children's aggregate plans, child 1 most
/// significant. Each element is the elementwise sum of one aggregate per child.
std::vector<CombinationalPlan> combine(std::span<const std::vector<Series>> children_aggregates);

struct PriceSignal {
  Series values;  ///< USD/kWh per timestep

  void validate() const;
};

/// CSV `t,usd_per_kwh`, t = 0..T-1 in order.
PriceSignal read_price(std::istream& in, const std::string& source = "<price>");
PriceSignal read_price(const std::filesystem::path& path);
void write_price(std::ostream& out, const PriceSignal& price);

struct Selection {
  std::size_t combination = 0;
  std::size_t parent_plan = 0;
  double objective = 0.0;
};

/// Objective value of a demand vector.
double objective_value(Objective objective, std::span<const double> demand, std::span<const double> price);

/// The (combination, parent plan) pair with the least demand standard
/// deviation. Pairs are scanned parent-plan-major; a later pair only wins by
/// a strict improvement, so ties go to the lowest index. An empty
/// combination list stands for a zero contribution.
Selection select_min_dev(std::span<const CombinationalPlan> combos, std::span<const Series> parent_plans);

/// As select_min_dev, minimizing the price-weighted demand sum.
Selection select_min_cost(std::span<const CombinationalPlan> combos, std::span<const Series> parent_plans,
                          const PriceSignal& price);

/// Decision taken at one agent during the bottom-up pass, for its selected own plan.
struct ParentDecision {
  std::size_t agent = 0;
  std::size_t own_plan = 0;
  std::vector<std::size_t> child_plans;  ///< chosen plan of each child, in child order
  double objective = 0.0;                ///< objective of the resulting subtree aggregate
};

struct OptimizationResult {
  std::vector<std::size_t> selected;  ///< plan index per agent
  Series total;                       ///< aggregate demand at the root
  std::vector<ParentDecision> decisions;  ///< one per agent with children, level order
};

/// Runs the bottom-up selection. `plans[a]` lists agent a's candidate plans;
/// non-participants pass a single fixed plan. `price` is required for MIN-COST.
OptimizationResult run_optimization(std::span<const std::vector<Series>> plans, const TreeTopology& topology,
                                    Objective objective, std::span<const double> price = {});

/// Selection map and root curve as JSON text.
void write_selection(std::ostream& out, std::span<const std::string> agent_ids,
                     const OptimizationResult& result);

} // namespace evcoop
