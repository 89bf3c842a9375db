/* Copyright 2026 The JD3Net Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <random>

#include "jd3/parallel.hpp"
#include "jd3/search.hpp"
#include "oracles.hpp"
#include "reference_table.hpp"

namespace jd3 {
namespace {

SearchConstraints base(double budget, double rho, std::size_t d_max = 4) {
  SearchConstraints c;
  c.budget_gflops = budget;
  c.rho = rho;
  c.d_max = d_max;
  return c;
}

TEST(Rational, FromDecimal) {
  EXPECT_EQ(Rational::from_decimal(0.7), (Rational{7, 10}));
  EXPECT_EQ(Rational::from_decimal(1.2), (Rational{6, 5}));
  EXPECT_EQ(Rational::from_decimal(1.0), (Rational{1, 1}));
  EXPECT_THROW(Rational::from_decimal(-1), std::invalid_argument);
  EXPECT_TRUE(within_ratio(84, 56, Rational{3, 2}));
  EXPECT_FALSE(within_ratio(88, 56, Rational{3, 2}));
  EXPECT_TRUE(within_ratio(28, 40, Rational{7, 10}));  // exactly on the boundary
}

TEST(Solve, TinyBudgetIsInfeasible) {
  const auto r = solve(base(1e-3, 1.0));
  EXPECT_FALSE(r.feasible);
  EXPECT_EQ(r.feasible_count, 0u);
  nlohmann::json j = r;
  EXPECT_EQ(j.at("status"), "infeasible");
}

TEST(Solve, SmallHeadlineIsInFeasibleSet) {
  const auto c = base(25, 1.0);
  const auto pts = enumerate_feasible(c);
  const bool found = std::any_of(pts.begin(), pts.end(), [](const FeasiblePoint& p) {
    return p.config.d == 3 && p.config.w == 64 && p.config.blocks == 64;
  });
  EXPECT_TRUE(found);
  EXPECT_EQ(solve(c).feasible_count, pts.size());
}

TEST(Solve, FeasibleCountMatchesBruteForce) {
  for (double budget : {8.0, 25.0}) {
    for (double rho : {0.5, 1.0}) {
      const auto c = base(budget, rho);
      const auto rr = c.rho_exact();
      const auto naive = oracle::naive_argmax(c.budget_flops(), rr.num, rr.den, 1, 4, 4, 8, 512, 4, 512, 1, 3);
      const auto r = solve(c);
      EXPECT_EQ(r.feasible_count, naive.count);
    }
  }
}

TEST(Solve, EveryFeasiblePointSatisfiesConstraints) {
  const auto c = base(25, 0.7);
  for (const auto& p : enumerate_feasible(c)) {
    EXPECT_LE(p.flops.flops, c.budget_flops());
    EXPECT_LE(p.config.blocks * 10, 7 * p.config.w);
    EXPECT_TRUE(p.config.on_grid(4));
    EXPECT_GE(p.config.d, 1u);
    EXPECT_LE(p.config.d, 4u);
  }
}

TEST(Solve, ReproducesPublishedSearchRows) {
  for (const auto& row : reference::kSearchRows) {
    SearchConstraints c = base(row.budget_gflops, row.rho, row.d_max);
    const auto r = solve(c);
    ASSERT_TRUE(r.feasible);
    SCOPED_TRACE(std::to_string(row.budget_gflops) + " GF rho " + std::to_string(row.rho));
    EXPECT_EQ(r.best.d, row.d);
    if (row.headline) {
      EXPECT_EQ(r.best.w, row.w);
      EXPECT_EQ(r.best.blocks, row.b);
    } else {
      EXPECT_LE(std::abs(static_cast<long>(r.best.w) - static_cast<long>(row.w)), 4);
      EXPECT_LE(std::abs(static_cast<long>(r.best.blocks) - static_cast<long>(row.b)), 4);
    }
  }
}

TEST(Solve, WideDownsamplingProbePrefersLargeRatio) {
  const auto r = unconstrained_d_probe(base(128, 1.2), 8);
  ASSERT_TRUE(r.feasible);
  EXPECT_GE(r.best.d, 5u);
  EXPECT_LE(r.best.d, 8u);
}

TEST(Solve, MatchesNaiveArgmaxOnReducedGrids) {
  std::mt19937_64 rng(31);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  for (int t = 0; t < 25; ++t) {
    SearchConstraints c;
    c.budget_gflops = std::uniform_real_distribution<double>(0.5, 40)(rng);
    c.rho = static_cast<double>(pick(2, 20)) / 10.0;
    c.d_min = pick(1, 3);
    c.d_max = c.d_min + pick(0, 3);
    c.w_max = 4 * pick(8, 40);
    c.b_max = 4 * pick(4, 40);
    c.c_in = pick(1, 5);
    const auto rr = c.rho_exact();
    const auto naive = oracle::naive_argmax(c.budget_flops(), rr.num, rr.den, c.d_min, c.d_max, 4, c.w_min, c.w_max,
                                            c.b_min, c.b_max, c.c_in, 3);
    const auto r = solve(c);
    ASSERT_EQ(r.feasible, naive.found);
    if (!naive.found) continue;
    EXPECT_EQ(r.best.d, naive.d);
    EXPECT_EQ(r.best.w, naive.w);
    EXPECT_EQ(r.best.blocks, naive.b);
    EXPECT_EQ(r.best_flops.flops, naive.flops);
    EXPECT_EQ(r.feasible_count, naive.count);
  }
}

TEST(Solve, EntropyMonotoneInBudget) {
  double prev = -1e300;
  for (double budget : {4.0, 8.0, 16.0, 25.0, 64.0, 128.0}) {
    const auto r = solve(base(budget, 1.0));
    ASSERT_TRUE(r.feasible);
    EXPECT_GE(r.best_entropy.H, prev);
    prev = r.best_entropy.H;
  }
}

TEST(Solve, EntropyMonotoneInRho) {
  double prev = -1e300;
  for (double rho : {0.5, 0.7, 1.0, 1.2, 1.5, 2.0}) {
    const auto r = solve(base(25, rho));
    EXPECT_GE(r.best_entropy.H, prev);
    prev = r.best_entropy.H;
  }
}

TEST(Solve, FrontierIsSortedAndLedByBest) {
  const auto r = solve(base(25, 1.0));
  ASSERT_EQ(r.frontier.size(), 10u);
  EXPECT_EQ(r.frontier.front().config, r.best);
  for (std::size_t i = 1; i < r.frontier.size(); ++i) EXPECT_TRUE(better_point(r.frontier[i - 1], r.frontier[i]));
}

TEST(Solve, ThreadCountDoesNotChangeResult) {
  const auto c = base(64, 1.2);
  set_num_threads(1);
  const nlohmann::json a = solve(c);
  set_num_threads(4);
  const nlohmann::json b = solve(c);
  set_num_threads(1);
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Solve, InvalidConstraints) {
  auto c = base(25, 1.0);
  c.d_min = 3;
  c.d_max = 2;
  EXPECT_THROW(solve(c), ConfigError);
  EXPECT_THROW(solve(base(0, 1.0)), ConfigError);
  EXPECT_THROW(solve(base(25, 0)), ConfigError);
}

TEST(Sweep, RowOrderAndContent) {
  const auto rows = sweep({25, 128}, {0.5, 1.0}, base(0, 0));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].budget_gflops, 25);
  EXPECT_EQ(rows[1].rho, 1.0);
  EXPECT_EQ(rows[1].config, base(25, 1.0).config(3, 64, 64));
  EXPECT_EQ(rows[2].budget_gflops, 128);
  nlohmann::json j = rows[1];
  EXPECT_EQ(j.get<SweepRow>().config.w, 64u);
}

TEST(SearchJson, ConstraintsRoundTrip) {
  auto c = base(128, 1.2, 8);
  c.w_max = 300;
  c.convention = FlopsConvention::macs_only;
  nlohmann::json j = c;
  EXPECT_EQ(j.at("rho_num"), 6);
  EXPECT_EQ(j.at("rho_den"), 5);
  const auto c2 = j.get<SearchConstraints>();
  EXPECT_EQ(nlohmann::json(c2).dump(), j.dump());
}

}  // namespace
}  // namespace jd3
