#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "evcoop/plangen.hpp"

namespace evcoop {
namespace {

EvModel leaf() { return find_model(default_catalog(), "Nissan Leaf"); }

std::vector<FlexibilityWindow> windows_with(std::vector<double> soc, std::size_t ct) {
  return compute_windows(std::span<const double>(soc), [ct](double) { return ct; });
}

TEST(ComputeWindows, MonotoneDecreasingHasNone) {
  EXPECT_TRUE(windows_with({1.0, 0.9, 0.8, 0.7, 0.6}, 1).empty());
  EXPECT_TRUE(windows_with({1.0, 1.0, 1.0, 1.0}, 0).empty());
}

TEST(ComputeWindows, HandTracedSignal) {
  const auto w = windows_with({1.0, 0.8, 0.6, 0.7, 0.8, 0.9, 1.0, 1.0, 0.9}, 3);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].start, 2u);
  EXPECT_EQ(w[0].end, 7u);
  EXPECT_DOUBLE_EQ(w[0].soc_at_start, 0.6);
  EXPECT_EQ(w[0].index, 0u);
}

TEST(ComputeWindows, ShortRiseIsExcluded) {
  // Two rising steps after the minimum, then a fall.
  const std::vector<double> soc{1.0, 0.7, 0.5, 0.6, 0.7, 0.6, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.0};
  const auto loose = windows_with(soc, 2);
  ASSERT_EQ(loose.size(), 2u);
  EXPECT_EQ(loose[0].start, 2u);
  EXPECT_EQ(loose[0].end, 4u);
  EXPECT_EQ(loose[1].start, 6u);
  EXPECT_EQ(loose[1].end, 12u);
  const auto strict = windows_with(soc, 5);
  ASSERT_EQ(strict.size(), 1u);
  EXPECT_EQ(strict[0].start, 6u);
  EXPECT_EQ(strict[0].index, 0u);
}

TEST(ComputeWindows, FlatStretchAfterFallDoesNotOpen) {
  // 0.5 is reached and held: no strict minimum at index 2 or 3.
  EXPECT_TRUE(windows_with({1.0, 0.7, 0.5, 0.5, 0.6, 0.7, 0.8}, 1).empty());
  // A plateau inside a rise keeps the window open.
  const auto w = windows_with({1.0, 0.5, 0.6, 0.6, 0.7, 0.6}, 1);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].end, 4u);
}

TEST(ComputeWindows, NoStartAtFirstOrLastIndex) {
  EXPECT_TRUE(windows_with({0.2, 0.5, 0.8}, 1).empty());
  EXPECT_TRUE(windows_with({1.0, 0.8, 0.6}, 1).empty());
}

TEST(ComputeWindows, UsesModelChargeTime) {
  // Leaf from 0.5 needs 110 minutes.
  SocSignal s;
  s.values = {1.0, 0.5};
  const double step = 6.6 / 24.0 / 60.0;
  for (int k = 1; k <= 150; ++k) s.values.push_back(std::min(1.0, 0.5 + k * step));
  s.values.push_back(0.9);
  auto w = compute_windows(s, leaf());
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].start, 1u);
  EXPECT_EQ(w[0].size(), 150u);
  s.values.erase(s.values.begin() + 100, s.values.end() - 1);  // park for 98 minutes only
  EXPECT_TRUE(compute_windows(s, leaf()).empty());
}

TEST(ChargeTime, ExamplesAtOneMinuteResolution) {
  EXPECT_EQ(charge_time(leaf(), 1.0), 0u);
  EXPECT_EQ(charge_time(leaf(), 0.0), 219u);
  EXPECT_EQ(charge_time(leaf(), 0.5), 110u);
  EXPECT_EQ(charge_time(leaf(), 0.0, 15.0), 15u);
  EXPECT_THROW(charge_time(leaf(), 1.5), Error);
}

TEST(SlotCounts, BothBranches) {
  const auto m = leaf();
  const std::size_t ct = charge_time(m, 0.5);  // 110
  const std::vector<FlexibilityWindow> w{{0, ct, 0.5, 0}, {1000, 1000 + 10 * ct, 0.5, 1}, {3000, 3000 + 3 * ct, 0.5, 2},
                                         {5000, 5000 + 3 * ct + 40, 0.5, 3}};
  const auto c = slot_counts(w, m, 4);
  EXPECT_EQ(c[0].count, 1u);
  EXPECT_EQ(c[0].slot_size, ct);
  EXPECT_EQ(c[1].count, 4u);
  EXPECT_EQ(c[1].slot_size, 10 * ct / 4);
  EXPECT_EQ(c[2].count, 3u);
  EXPECT_EQ(c[2].slot_size, ct);
  EXPECT_EQ(c[3].count, 3u);
  EXPECT_EQ(c[3].slot_size, ct);
  EXPECT_THROW(slot_counts(w, m, 0), Error);
}

TEST(ComputeSlots, IndexArithmetic) {
  const FlexibilityWindow w{100, 340, 0.3, 0};
  const auto s = compute_slots(w, 3, 80);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].start, 100u);
  EXPECT_EQ(s[0].end, 180u);
  EXPECT_EQ(s[1].start, 180u);
  EXPECT_EQ(s[1].end, 260u);
  EXPECT_EQ(s[2].start, 260u);
  EXPECT_EQ(s[2].end, 340u);
  EXPECT_EQ(s[2].ordinal, 3u);

  const auto one = compute_slots(w, 1, 80);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].start, 100u);

  const auto rem = compute_slots({0, 10, 0.3, 0}, 3, 3);
  EXPECT_EQ(rem[0].size(), 3u);
  EXPECT_EQ(rem[1].size(), 3u);
  EXPECT_EQ(rem[2].start, 6u);
  EXPECT_EQ(rem[2].end, 10u);
}

TEST(RankSlots, OrdersByMeanLikelihood) {
  const auto slots = compute_slots({0, 30, 0.2, 0}, 3, 10);
  UsageLikelihood uniform{Series(30, 0.3)};
  const auto same = rank_slots(slots, uniform);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(same[k].ordinal, k + 1);
    EXPECT_EQ(same[k].rank, k);
  }
  UsageLikelihood first_busy{Series(30, 0.0)};
  for (std::size_t t = 0; t < 10; ++t) first_busy.values[t] = 0.8;
  const auto r = rank_slots(slots, first_busy);
  EXPECT_EQ(r[0].ordinal, 2u);
  EXPECT_EQ(r[1].ordinal, 3u);
  EXPECT_EQ(r[2].ordinal, 1u);
}

TEST(RankSlots, TwoQuietSlotsComeFirst) {
  // Slots 1 and 2 quiet, slot 2 quietest; slot 3 busy.
  const auto slots = compute_slots({0, 30, 0.2, 0}, 3, 10);
  UsageLikelihood l{Series(30, 0.0)};
  for (std::size_t t = 0; t < 10; ++t) l.values[t] = 0.05;
  for (std::size_t t = 20; t < 30; ++t) l.values[t] = 0.6;
  const auto r = rank_slots(slots, l);
  EXPECT_EQ(r[0].ordinal, 2u);
  EXPECT_EQ(r[1].ordinal, 1u);
  EXPECT_EQ(r[2].ordinal, 3u);
}

TEST(Discomfort, EquationExamples) {
  // x(1..4) = (1, .5, .5, 1) preceded by x0; lambda on steps 1..4.
  const std::vector<double> soc{0.3, 1.0, 0.5, 0.5, 1.0};
  EXPECT_DOUBLE_EQ(discomfort(soc, std::vector<double>{0, 1, 1, 0}), 0.25);
  EXPECT_EQ(discomfort(soc, std::vector<double>{0, 0, 0, 0}), 0.0);
  EXPECT_EQ(discomfort(std::vector<double>(5, 1.0), std::vector<double>{0.4, 1, 1, 0.2}), 0.0);
  EXPECT_THROW(discomfort(soc, std::vector<double>{0, 1, 1}), Error);
}

TEST(DemandFromSoc, PowerWhereSocRises) {
  const auto d = demand_from_soc(std::vector<double>{0.5, 0.6, 0.6, 0.55, 0.7}, 7.4);
  EXPECT_EQ(d, (Series{7.4, 0.0, 0.0, 7.4}));
}

// A Leaf that drives from 08:00 to 09:00 and 17:00 to 18:30 on one day.
SocSignal commute_day(const EvModel& m) {
  const std::vector<TripRecord> trips{{"v", 480, 540, 35.0, Destination::work},
                                      {"v", 1020, 1110, 30.0, Destination::home}};
  return build_soc_profile(trips, m, 1440);
}

UsageLikelihood commute_likelihood() {
  const std::vector<TripRecord> trips{{"v", 480, 540, 35.0, Destination::work},
                                      {"v", 1020, 1110, 30.0, Destination::home}};
  return usage_likelihood(trips, 1440, 60);
}

TEST(GeneratePlans, SingleSlotWindowChargesContiguously) {
  const auto m = leaf();
  // Park for exactly the charge time from 0.5.
  const std::size_t ct = charge_time(m, 0.5);
  SocSignal s;
  s.values = {1.0, 0.5};
  const double step = 6.6 / 24.0 / 60.0;
  for (std::size_t k = 1; k <= ct; ++k) s.values.push_back(std::min(1.0, 0.5 + k * step));
  s.values.push_back(0.95);
  const UsageLikelihood l{Series(s.horizon(), 0.1)};
  const auto set = plan_agent("a", s, m, l, {15, 4, 9});
  ASSERT_EQ(set.size(), 1u);
  const auto& p = set.plans[0].values;
  for (std::size_t t = 1; t <= ct; ++t) EXPECT_EQ(p[t], m.charge_kw) << t;
  EXPECT_EQ(p[0], 0.0);
  EXPECT_EQ(p[ct + 1], 0.0);
}

TEST(GeneratePlans, LeafFromEmptyWithThirtyMinuteIntervals) {
  const auto m = leaf();
  SocSignal s;
  s.values = {0.3, 0.0};
  const double step = 6.6 / 24.0 / 60.0;
  for (std::size_t k = 1; k <= 600; ++k) s.values.push_back(std::min(1.0, k * step));
  s.values.push_back(0.8);
  const UsageLikelihood l{Series(s.horizon(), 0.0)};
  const auto windows = compute_windows(s, m);
  ASSERT_EQ(windows.size(), 1u);
  EXPECT_EQ(charge_time(m, 0.0), 219u);
  const auto set = plan_agent("a", s, m, l, {30, 4, 3});
  EXPECT_EQ(set.size(), 2u);  // 600 / 219 = 2 slots
  for (const auto& plan : set.plans) {
    const auto steps = std::count(plan.values.begin(), plan.values.end(), m.charge_kw);
    const double kwh = static_cast<double>(steps) * m.charge_kw / 60.0;
    EXPECT_GE(kwh, 24.0);
    EXPECT_LE(kwh, 24.0 + 30.0 * m.charge_kw / 60.0);
    // Charging intervals start on the 30-step grid of the slot they occupy.
    std::size_t runs = 0;
    for (std::size_t t = 0; t < plan.values.size(); ++t) {
      if (plan.values[t] > 0.0 && (t == 0 || plan.values[t - 1] == 0.0)) ++runs;
    }
    EXPECT_LE(runs, 8u);
  }
}

TEST(GeneratePlans, PlanJUsesItsLowestRankedSlots) {
  const auto m = leaf();
  const auto s = commute_day(m);
  const auto l = commute_likelihood();
  const auto windows = compute_windows(s, m);
  ASSERT_FALSE(windows.empty());
  const auto counts = slot_counts(windows, m, 4);
  RankedSlots ranked;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    ranked.push_back(rank_slots(compute_slots(windows[w], counts[w].count, counts[w].slot_size), l));
  }
  const auto set = generate_plans("a", s, windows, ranked, m, l, {15, 4, 21});
  std::size_t expected = 1;
  for (const auto& c : counts) expected = std::max(expected, c.count);
  ASSERT_EQ(set.size(), expected);
  for (std::size_t j = 0; j < set.size(); ++j) {
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const std::size_t used = std::min(j + 1, ranked[w].size());
      for (std::size_t t = windows[w].start; t < windows[w].end; ++t) {
        if (set.plans[j].values[t] == 0.0) continue;
        bool inside = false;
        for (std::size_t k = 0; k < used; ++k) inside |= t >= ranked[w][k].start && t < ranked[w][k].end;
        EXPECT_TRUE(inside) << "plan " << j << " window " << w << " t " << t;
      }
    }
  }
}

TEST(GeneratePlans, OutsideWindowsPlansFollowControl) {
  const auto m = leaf();
  const auto s = commute_day(m);
  const auto l = commute_likelihood();
  const auto set = plan_agent("a", s, m, l, {15, 4, 5});
  const auto control = control_plan(s, m, l);
  const auto windows = compute_windows(s, m);
  for (const auto& plan : set.plans) {
    for (std::size_t t = 0; t < s.horizon(); ++t) {
      bool in_window = false;
      for (const auto& w : windows) in_window |= t >= w.start && t < w.end;
      if (!in_window) {
        EXPECT_EQ(plan.values[t], control.values[t]) << t;
      }
    }
  }
}

TEST(GeneratePlans, NoWindowsGivesTheControlPlan) {
  SocSignal s;
  s.values.assign(50, 1.0);
  const UsageLikelihood l{Series(49, 0.2)};
  const auto set = plan_agent("a", s, leaf(), l, {15, 4, 1});
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.plans[0].values, Series(49, 0.0));
  EXPECT_EQ(set.plans[0].discomfort, 0.0);
}

TEST(GeneratePlans, DeterministicPerSeed) {
  const auto m = leaf();
  const auto s = commute_day(m);
  const auto l = commute_likelihood();
  const auto a = plan_agent("a", s, m, l, {15, 4, 5});
  const auto b = plan_agent("a", s, m, l, {15, 4, 5});
  const auto c = plan_agent("a", s, m, l, {15, 4, 6});
  bool any_difference = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a.plans[j].values, b.plans[j].values);
    EXPECT_EQ(a.plans[j].discomfort, b.plans[j].discomfort);
    any_difference |= a.plans[j].values != c.plans[j].values;
  }
  EXPECT_TRUE(any_difference);
}

TEST(GeneratePlans, DiscomfortIsComputedOnThePlannedTrajectory) {
  const auto m = leaf();
  const auto s = commute_day(m);
  const auto l = commute_likelihood();
  const auto set = plan_agent("a", s, m, l, {15, 4, 5});
  for (const auto& plan : set.plans) {
    EXPECT_DOUBLE_EQ(plan.discomfort, discomfort(plan.planned_soc.values, l.values));
    EXPECT_EQ(plan.values, demand_from_soc(plan.planned_soc.values, m.charge_kw));
  }
}

TEST(PlanSetJson, RoundTrip) {
  const auto m = leaf();
  const auto set = plan_agent("agent-7", commute_day(m), m, commute_likelihood(), {15, 4, 5});
  const nlohmann::json j = set;
  EXPECT_EQ(j.at("v").get<std::size_t>(), set.size());
  const auto back = j.get<PlanSet>();
  EXPECT_EQ(back.agent_id, "agent-7");
  ASSERT_EQ(back.size(), set.size());
  for (std::size_t k = 0; k < set.size(); ++k) {
    EXPECT_EQ(back.plans[k].values, set.plans[k].values);
    EXPECT_EQ(back.plans[k].discomfort, set.plans[k].discomfort);
    EXPECT_EQ(back.plans[k].plan_index, k);
  }
  nlohmann::json broken = j;
  broken["v"] = set.size() + 1;
  EXPECT_THROW(broken.get<PlanSet>(), Error);
}

} // namespace
} // namespace evcoop
