#include "evcoop/epos.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "csv.hpp"

namespace evcoop {

namespace {

// A candidate must beat the incumbent by more than this (relative) to
// replace it; equal objectives keep the earlier enumeration index.
constexpr double kTieTolerance = 1e-12;

bool improves(double candidate, double incumbent) {
  return candidate < incumbent - kTieTolerance * std::max(1.0, std::abs(incumbent));
}

void check_horizon(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw Error(std::string(what) + ": horizon mismatch (" + std::to_string(expected) + " vs " +
                std::to_string(got) + ")");
  }
}

// Odometer over per-child choice counts, child 0 most significant.
bool next_combination(std::vector<std::size_t>& digits, std::span<const std::size_t> radix) {
  for (std::size_t k = digits.size(); k-- > 0;) {
    if (++digits[k] < radix[k]) return true;
    digits[k] = 0;
  }
  return false;
}

Selection select(std::span<const CombinationalPlan> combos, std::span<const Series> parent_plans,
                 Objective objective, std::span<const double> price) {
  if (parent_plans.empty()) throw Error("selection: no parent plans");
  const std::size_t horizon = parent_plans.front().size();
  if (objective == Objective::min_cost) check_horizon(horizon, price.size(), "select_min_cost");
  for (const auto& c : combos) check_horizon(horizon, c.values.size(), "selection");

  Selection best;
  bool first = true;
  Series sum(horizon);
  const std::size_t combo_count = std::max<std::size_t>(combos.size(), 1);
  for (std::size_t p = 0; p < parent_plans.size(); ++p) {
    check_horizon(horizon, parent_plans[p].size(), "selection");
    for (std::size_t c = 0; c < combo_count; ++c) {
      for (std::size_t t = 0; t < horizon; ++t) {
        sum[t] = parent_plans[p][t] + (combos.empty() ? 0.0 : combos[c].values[t]);
      }
      const double value = objective_value(objective, sum, price);
      if (first || improves(value, best.objective)) {
        best = {c, p, value};
        first = false;
      }
    }
  }
  return best;
}

} // namespace

std::string_view to_string(Objective o) noexcept {
  return o == Objective::min_dev ? "MIN-DEV" : "MIN-COST";
}

Objective parse_objective(std::string_view text) {
  if (text == "MIN-DEV" || text == "min-dev" || text == "min_dev") return Objective::min_dev;
  if (text == "MIN-COST" || text == "min-cost" || text == "min_cost") return Objective::min_cost;
  throw Error("unknown objective '" + std::string(text) + "' (expected MIN-DEV or MIN-COST)");
}

std::size_t TreeTopology::depth() const {
  if (children.empty()) return 0;
  std::vector<std::size_t> level(children.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t node : level_order) {
    for (std::size_t c : children[node]) {
      level[c] = level[node] + 1;
      deepest = std::max(deepest, level[c]);
    }
  }
  return deepest;
}

void TreeTopology::validate() const {
  const std::size_t n = children.size();
  if (n == 0) throw Error("tree: no agents");
  if (root >= n) throw Error("tree: root out of range");
  std::vector<int> seen(n, 0);
  std::deque<std::size_t> queue{root};
  seen[root] = 1;
  std::size_t visited = 0;
  while (!queue.empty()) {
    const std::size_t node = queue.front();
    queue.pop_front();
    ++visited;
    for (std::size_t c : children[node]) {
      if (c >= n) throw Error("tree: child out of range");
      if (seen[c]++) throw Error("tree: agent reached twice (cycle or shared child)");
      queue.push_back(c);
    }
  }
  if (visited != n) throw Error("tree: not every agent is connected to the root");
  if (level_order.size() != n || level_order.front() != root) throw Error("tree: bad level order");
}

TreeTopology build_tree(std::size_t agent_count, Seed seed, std::size_t fan_out) {
  if (agent_count == 0) throw Error("build_tree: at least one agent required");
  if (fan_out == 0) throw Error("build_tree: fan-out must be >= 1");
  std::vector<std::size_t> perm(agent_count);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  TreeTopology tree;
  tree.children.assign(agent_count, {});
  tree.root = perm.front();
  tree.level_order = perm;
  for (std::size_t pos = 1; pos < agent_count; ++pos) {
    const std::size_t parent_pos = (pos - 1) / fan_out;
    tree.children[perm[parent_pos]].push_back(perm[pos]);
  }
  return tree;
}

std::vector<CombinationalPlan> combine(std::span<const std::vector<Series>> children_aggregates) {
  if (children_aggregates.empty()) throw Error("combine: no children");
  std::vector<std::size_t> radix;
  std::size_t horizon = 0;
  bool first = true;
  for (const auto& child : children_aggregates) {
    if (child.empty()) throw Error("combine: child offers no plans");
    for (const auto& plan : child) {
      if (first) {
        horizon = plan.size();
        first = false;
      }
      check_horizon(horizon, plan.size(), "combine");
    }
    radix.push_back(child.size());
  }

  std::vector<CombinationalPlan> out;
  std::vector<std::size_t> digits(radix.size(), 0);
  do {
    CombinationalPlan combo{Series(horizon, 0.0), digits};
    for (std::size_t u = 0; u < digits.size(); ++u) {
      const auto& agg = children_aggregates[u][digits[u]];
      for (std::size_t t = 0; t < horizon; ++t) combo.values[t] += agg[t];
    }
    out.push_back(std::move(combo));
  } while (next_combination(digits, radix));
  return out;
}

void PriceSignal::validate() const {
  for (double p : values) {
    if (!(std::isfinite(p) && p >= 0.0)) throw Error("price values must be finite and >= 0");
  }
}

PriceSignal read_price(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t row = 0;
  if (!csv::next_row(in, line, row)) throw ParseError(source, row, "empty price file");
  csv::expect_header(csv::split(line), {"t", "usd_per_kwh"}, source);
  PriceSignal price;
  while (csv::next_row(in, line, row)) {
    const auto f = csv::split(line);
    if (f.size() != 2) throw ParseError(source, row, "expected 2 fields");
    const auto t = csv::to_int(f[0], source, row, "t");
    if (t != static_cast<std::int64_t>(price.values.size()))
      throw ParseError(source, row, "timesteps must be consecutive from 0");
    const double p = csv::to_double(f[1], source, row, "usd_per_kwh");
    if (p < 0.0) throw ParseError(source, row, "price must be >= 0");
    price.values.push_back(p);
  }
  if (price.values.empty()) throw ParseError(source, row, "price file has no records");
  return price;
}

PriceSignal read_price(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_price(in, path.string());
}

void write_price(std::ostream& out, const PriceSignal& price) {
  out << "t,usd_per_kwh\n";
  for (std::size_t t = 0; t < price.values.size(); ++t) {
    out << t << ',' << csv::format_double(price.values[t]) << '\n';
  }
}

double objective_value(Objective objective, std::span<const double> demand, std::span<const double> price) {
  if (objective == Objective::min_dev) return population_variance(demand);
  double cost = 0.0;
  for (std::size_t t = 0; t < demand.size(); ++t) cost += demand[t] * price[t];
  return cost;
}

Selection select_min_dev(std::span<const CombinationalPlan> combos, std::span<const Series> parent_plans) {
  auto s = select(combos, parent_plans, Objective::min_dev, {});
  s.objective = std::sqrt(s.objective);
  return s;
}

Selection select_min_cost(std::span<const CombinationalPlan> combos, std::span<const Series> parent_plans,
                          const PriceSignal& price) {
  price.validate();
  return select(combos, parent_plans, Objective::min_cost, price.values);
}

OptimizationResult run_optimization(std::span<const std::vector<Series>> plans, const TreeTopology& topology,
                                    Objective objective, std::span<const double> price) {
  topology.validate();
  const std::size_t n = topology.size();
  if (plans.size() != n) {
    throw Error("run_optimization: " + std::to_string(plans.size()) + " plan sets for a tree of " +
                std::to_string(n) + " agents");
  }
  if (plans[0].empty()) throw Error("run_optimization: agent 0 has no plans");
  const std::size_t horizon = plans[0][0].size();
  for (std::size_t a = 0; a < n; ++a) {
    if (plans[a].empty()) throw Error("run_optimization: agent " + std::to_string(a) + " has no plans");
    for (const auto& p : plans[a]) check_horizon(horizon, p.size(), "run_optimization");
  }
  if (objective == Objective::min_cost) {
    check_horizon(horizon, price.size(), "run_optimization price");
    PriceSignal{Series(price.begin(), price.end())}.validate();
  }

  // aggregates[a][j]: subtree demand offered upward when agent a runs plan j.
  // picks[a][j]: the children's plans that realize it.
  std::vector<std::vector<Series>> aggregates(n);
  std::vector<std::vector<std::vector<std::size_t>>> picks(n);
  std::vector<std::vector<double>> objectives(n);

  Series sum(horizon);
  for (auto it = topology.level_order.rbegin(); it != topology.level_order.rend(); ++it) {
    const std::size_t agent = *it;
    const auto& kids = topology.children[agent];
    const auto& own = plans[agent];
    aggregates[agent].resize(own.size());
    picks[agent].resize(own.size());
    objectives[agent].resize(own.size());

    std::vector<std::size_t> radix;
    for (std::size_t c : kids) radix.push_back(aggregates[c].size());

    for (std::size_t j = 0; j < own.size(); ++j) {
      double best = 0.0;
      std::vector<std::size_t> best_digits;
      std::vector<std::size_t> digits(kids.size(), 0);
      bool first = true;
      do {
        std::copy(own[j].begin(), own[j].end(), sum.begin());
        for (std::size_t u = 0; u < kids.size(); ++u) {
          const auto& agg = aggregates[kids[u]][digits[u]];
          for (std::size_t t = 0; t < horizon; ++t) sum[t] += agg[t];
        }
        const double value = objective_value(objective, sum, price);
        if (first || improves(value, best)) {
          best = value;
          best_digits = digits;
          aggregates[agent][j] = sum;
          first = false;
        }
      } while (!kids.empty() && next_combination(digits, radix));
      picks[agent][j] = std::move(best_digits);
      objectives[agent][j] = best;
    }
  }

  OptimizationResult result;
  result.selected.assign(n, 0);
  const std::size_t root = topology.root;
  {
    std::size_t best_j = 0;
    for (std::size_t j = 1; j < objectives[root].size(); ++j) {
      if (improves(objectives[root][j], objectives[root][best_j])) best_j = j;
    }
    result.selected[root] = best_j;
  }
  for (std::size_t agent : topology.level_order) {
    const auto& kids = topology.children[agent];
    if (kids.empty()) continue;
    const std::size_t j = result.selected[agent];
    ParentDecision decision;
    decision.agent = agent;
    decision.own_plan = j;
    decision.child_plans = picks[agent][j];
    decision.objective = objectives[agent][j];
    if (objective == Objective::min_dev) decision.objective = std::sqrt(decision.objective);
    for (std::size_t u = 0; u < kids.size(); ++u) result.selected[kids[u]] = decision.child_plans[u];
    result.decisions.push_back(std::move(decision));
  }
  result.total = std::move(aggregates[root][result.selected[root]]);
  return result;
}

void write_selection(std::ostream& out, std::span<const std::string> agent_ids,
                     const OptimizationResult& result) {
  if (agent_ids.size() != result.selected.size()) throw Error("write_selection: id count mismatch");
  nlohmann::json j;
  auto sel = nlohmann::json::object();
  for (std::size_t a = 0; a < agent_ids.size(); ++a) sel[agent_ids[a]] = result.selected[a] + 1;
  j["selection"] = std::move(sel);
  j["curve_kw"] = result.total;
  out << j.dump(1) << '\n';
}

} // namespace evcoop
