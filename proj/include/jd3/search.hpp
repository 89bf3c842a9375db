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

// Exact solver for
//
//   max_{d, w, B}  entropy_modified(d, w, B)
//   s.t.           B / w <= rho,  d_min <= d <= d_max,  FLOPs(256x256) <= budget
//
// over the (w, B) grid. The grid is small enough (< 2e5 points) that
// exhaustive enumeration is exact and fast.

#ifndef JD3_SEARCH_HPP_
#define JD3_SEARCH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/arch.hpp"
#include "jd3/parallel.hpp"

namespace jd3 {

/// Non-negative rational num/den in lowest terms.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  /// Decimal value rounded to 6 fractional digits, e.g. 0.7 -> 7/10.
  static Rational from_decimal(double v) {
    if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("rational: bad value");
    constexpr std::uint64_t kScale = 1'000'000;
    const auto n = static_cast<std::uint64_t>(std::llround(v * static_cast<double>(kScale)));
    const std::uint64_t g = std::gcd(n, kScale);
    return {n / g, kScale / g};
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

struct SearchConstraints {
  double budget_gflops = 25;
  std::size_t ref_h = 256;
  std::size_t ref_w = 256;
  double rho = 1.0;
  std::size_t d_min = 1;
  std::size_t d_max = 4;
  std::size_t grid = 4;
  std::size_t w_min = 8;
  std::size_t w_max = 512;
  std::size_t b_min = 4;
  std::size_t b_max = 512;
  std::size_t c_in = 1;
  std::size_t c_out = 3;
  FlopsConvention convention = FlopsConvention::macs_plus_bias;
  std::size_t top_n = 10;

  std::uint64_t budget_flops() const {
    return static_cast<std::uint64_t>(std::llround(budget_gflops * 1e9));
  }
  Rational rho_exact() const { return Rational::from_decimal(rho); }

  void validate() const {
    if (!(budget_gflops > 0)) throw ConfigError("budget must be positive");
    if (!(rho > 0)) throw ConfigError("rho must be positive");
    if (d_min < 1 || d_min > d_max) throw ConfigError("need 1 <= d_min <= d_max");
    if (grid < 1) throw ConfigError("grid must be >= 1");
    if (w_min > w_max || b_min > b_max) throw ConfigError("empty w or B range");
    if (ref_h < d_max || ref_w < d_max) throw ConfigError("reference resolution below d_max");
  }

  /// Grid values in [lo, hi] that are multiples of `grid`.
  std::vector<std::size_t> grid_values(std::size_t lo, std::size_t hi) const {
    std::vector<std::size_t> out;
    for (std::size_t v = (lo + grid - 1) / grid * grid; v <= hi; v += grid) out.push_back(v);
    return out;
  }

  ArchConfig config(std::size_t d, std::size_t w, std::size_t b) const {
    ArchConfig c;
    c.d = d;
    c.w = w;
    c.blocks = b;
    c.c_in = c_in;
    c.c_out = c_out;
    return c;
  }
};

/// Exact integer test of B / w <= rho.
inline bool within_ratio(std::size_t blocks, std::size_t w, const Rational& rho) {
  return static_cast<unsigned __int128>(blocks) * rho.den <= static_cast<unsigned __int128>(rho.num) * w;
}

struct FeasiblePoint {
  ArchConfig config;
  double entropy = 0;       // H of the modified score
  double sum_term = 0;
  double density_term = 0;
  FlopsReport flops;
};

/// Strict ordering: higher entropy, then lower FLOPs, lower d, lower B, lower w.
inline bool better_point(const FeasiblePoint& a, const FeasiblePoint& b) {
  if (a.entropy != b.entropy) return a.entropy > b.entropy;
  if (a.flops.flops != b.flops.flops) return a.flops.flops < b.flops.flops;
  if (a.config.d != b.config.d) return a.config.d < b.config.d;
  if (a.config.blocks != b.config.blocks) return a.config.blocks < b.config.blocks;
  return a.config.w < b.config.w;
}

struct SearchResult {
  SearchConstraints constraints;
  bool feasible = false;
  ArchConfig best;
  EntropyReport best_entropy;
  FlopsReport best_flops;
  std::uint64_t feasible_count = 0;
  std::vector<FeasiblePoint> frontier;
};

namespace detail {

inline FeasiblePoint make_point(const ArchConfig& cfg, const FlopsReport& fr) {
  FeasiblePoint p;
  p.config = cfg;
  p.sum_term = entropy_sum_term(cfg);
  p.density_term = modified_density_term(cfg);
  p.entropy = p.density_term * p.sum_term;
  p.flops = fr;
  return p;
}

// Visits every feasible point with one fixed d, in (w, B) ascending order.
// FLOPs grow with B, so the B loop stops at the first over-budget value.
template <typename Visit>
void for_each_feasible_in_slice(const SearchConstraints& c, std::size_t d, Visit&& visit) {
  const Rational rho = c.rho_exact();
  const std::uint64_t budget = c.budget_flops();
  const auto bs = c.grid_values(c.b_min, c.b_max);
  for (std::size_t w : c.grid_values(std::max<std::size_t>(c.w_min, 4), c.w_max)) {
    for (std::size_t b : bs) {
      if (!within_ratio(b, w, rho)) break;
      const ArchConfig cfg = c.config(d, w, b);
      const FlopsReport fr = flops(cfg, c.ref_h, c.ref_w, c.convention);
      if (fr.flops > budget) break;
      visit(cfg, fr);
    }
  }
}

}  // namespace detail

/// Every grid point satisfying all constraints, ordered by (d, w, B).
inline std::vector<FeasiblePoint> enumerate_feasible(const SearchConstraints& c) {
  c.validate();
  std::vector<FeasiblePoint> out;
  for (std::size_t d = c.d_min; d <= c.d_max; ++d) {
    detail::for_each_feasible_in_slice(c, d, [&](const ArchConfig& cfg, const FlopsReport& fr) {
      out.push_back(detail::make_point(cfg, fr));
    });
  }
  return out;
}

/// Argmax of the modified entropy over the feasible grid. d-slices may be
/// enumerated in parallel; the merge uses the total order of better_point so
/// the result does not depend on the thread count.
inline SearchResult solve(const SearchConstraints& c) {
  c.validate();
  struct Slice {
    std::uint64_t count = 0;
    std::vector<FeasiblePoint> top;  // sorted best-first, at most max(top_n, 1)
  };
  const std::size_t keep = std::max<std::size_t>(c.top_n, 1);
  const std::size_t slices = c.d_max - c.d_min + 1;
  std::vector<Slice> parts(slices);

  parallel_for(slices, [&](std::size_t i) {
    Slice& s = parts[i];
    detail::for_each_feasible_in_slice(c, c.d_min + i, [&](const ArchConfig& cfg, const FlopsReport& fr) {
      ++s.count;
      FeasiblePoint p = detail::make_point(cfg, fr);
      if (s.top.size() == keep && !better_point(p, s.top.back())) return;
      auto pos = std::upper_bound(s.top.begin(), s.top.end(), p, better_point);
      s.top.insert(pos, std::move(p));
      if (s.top.size() > keep) s.top.pop_back();
    });
  });

  SearchResult r;
  r.constraints = c;
  std::vector<FeasiblePoint> merged;
  for (auto& s : parts) {
    r.feasible_count += s.count;
    merged.insert(merged.end(), s.top.begin(), s.top.end());
  }
  std::sort(merged.begin(), merged.end(), better_point);
  if (merged.size() > c.top_n) merged.resize(c.top_n);
  if (r.feasible_count == 0) return r;

  // Winner across slices; independent of top_n (which may be 0).
  FeasiblePoint best;
  bool have = false;
  for (auto& s : parts) {
    if (!s.top.empty() && (!have || better_point(s.top.front(), best))) {
      best = s.top.front();
      have = true;
    }
  }
  r.feasible = true;
  r.best = best.config;
  r.best_entropy = entropy_modified(best.config);
  r.best_flops = best.flops;
  r.frontier = std::move(merged);
  return r;
}

/// solve() with the downsampling bound relaxed to `d_max` (default 8).
inline SearchResult unconstrained_d_probe(SearchConstraints c, std::size_t d_max = 8) {
  c.d_max = d_max;
  return solve(c);
}

struct SweepRow {
  double budget_gflops = 0;
  double rho = 0;
  std::size_t d_min = 1;
  std::size_t d_max = 4;
  bool feasible = false;
  ArchConfig config;
  double entropy = 0;
  std::uint64_t flops = 0;
  std::uint64_t feasible_count = 0;
};

/// One solve per (budget, rho) cell, budgets outer, rhos inner.
inline std::vector<SweepRow> sweep(const std::vector<double>& budgets, const std::vector<double>& rhos,
                                   const SearchConstraints& base) {
  if (budgets.empty() || rhos.empty()) throw ConfigError("sweep needs non-empty budget and rho lists");
  std::vector<SweepRow> rows;
  for (double budget : budgets) {
    for (double rho : rhos) {
      SearchConstraints c = base;
      c.budget_gflops = budget;
      c.rho = rho;
      const SearchResult r = solve(c);
      SweepRow row;
      row.budget_gflops = budget;
      row.rho = rho;
      row.d_min = c.d_min;
      row.d_max = c.d_max;
      row.feasible = r.feasible;
      row.feasible_count = r.feasible_count;
      if (r.feasible) {
        row.config = r.best;
        row.entropy = r.best_entropy.H;
        row.flops = r.best_flops.flops;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const SearchConstraints& c) {
  const Rational r = c.rho_exact();
  j = nlohmann::json{{"budget_gflops", c.budget_gflops},
                     {"budget_flops", c.budget_flops()},
                     {"ref_h", c.ref_h},
                     {"ref_w", c.ref_w},
                     {"rho", c.rho},
                     {"rho_num", r.num},
                     {"rho_den", r.den},
                     {"d_min", c.d_min},
                     {"d_max", c.d_max},
                     {"grid", c.grid},
                     {"w_range", {c.w_min, c.w_max}},
                     {"B_range", {c.b_min, c.b_max}},
                     {"c_in", c.c_in},
                     {"c_out", c.c_out},
                     {"flops_convention", to_string(c.convention)},
                     {"top_n", c.top_n}};
}

inline void from_json(const nlohmann::json& j, SearchConstraints& c) {
  c = SearchConstraints{};
  j.at("budget_gflops").get_to(c.budget_gflops);
  j.at("rho").get_to(c.rho);
  if (j.contains("ref_h")) j.at("ref_h").get_to(c.ref_h);
  if (j.contains("ref_w")) j.at("ref_w").get_to(c.ref_w);
  if (j.contains("d_min")) j.at("d_min").get_to(c.d_min);
  if (j.contains("d_max")) j.at("d_max").get_to(c.d_max);
  if (j.contains("grid")) j.at("grid").get_to(c.grid);
  if (j.contains("w_range")) {
    c.w_min = j.at("w_range").at(0);
    c.w_max = j.at("w_range").at(1);
  }
  if (j.contains("B_range")) {
    c.b_min = j.at("B_range").at(0);
    c.b_max = j.at("B_range").at(1);
  }
  if (j.contains("c_in")) j.at("c_in").get_to(c.c_in);
  if (j.contains("c_out")) j.at("c_out").get_to(c.c_out);
  if (j.contains("flops_convention")) {
    c.convention = flops_convention_from_string(j.at("flops_convention").get<std::string>());
  }
  if (j.contains("top_n")) j.at("top_n").get_to(c.top_n);
}

inline void to_json(nlohmann::json& j, const FeasiblePoint& p) {
  j = nlohmann::json{{"config", p.config},
                     {"entropy", p.entropy},
                     {"sum_term", p.sum_term},
                     {"density_term", p.density_term},
                     {"flops", p.flops}};
}

inline void from_json(const nlohmann::json& j, FeasiblePoint& p) {
  j.at("config").get_to(p.config);
  j.at("entropy").get_to(p.entropy);
  j.at("sum_term").get_to(p.sum_term);
  j.at("density_term").get_to(p.density_term);
  j.at("flops").get_to(p.flops);
}

inline void to_json(nlohmann::json& j, const SearchResult& r) {
  j = nlohmann::json{{"constraints", r.constraints},
                     {"feasible", r.feasible},
                     {"feasible_count", r.feasible_count}};
  if (r.feasible) {
    j["best"] = r.best;
    j["best_entropy"] = r.best_entropy;
    j["best_flops"] = r.best_flops;
    j["frontier"] = r.frontier;
  } else {
    j["status"] = "infeasible";
  }
}

inline void to_json(nlohmann::json& j, const SweepRow& r) {
  j = nlohmann::json{{"budget_gflops", r.budget_gflops}, {"rho", r.rho},
                     {"d_min", r.d_min},                 {"d_max", r.d_max},
                     {"feasible", r.feasible},           {"feasible_count", r.feasible_count}};
  if (r.feasible) {
    j["d"] = r.config.d;
    j["w"] = r.config.w;
    j["B"] = r.config.blocks;
    j["entropy"] = r.entropy;
    j["flops"] = r.flops;
    j["gflops"] = static_cast<double>(r.flops) * 1e-9;
  }
}

inline void from_json(const nlohmann::json& j, SweepRow& r) {
  r = SweepRow{};
  j.at("budget_gflops").get_to(r.budget_gflops);
  j.at("rho").get_to(r.rho);
  j.at("d_min").get_to(r.d_min);
  j.at("d_max").get_to(r.d_max);
  j.at("feasible").get_to(r.feasible);
  j.at("feasible_count").get_to(r.feasible_count);
  if (r.feasible) {
    j.at("d").get_to(r.config.d);
    j.at("w").get_to(r.config.w);
    j.at("B").get_to(r.config.blocks);
    j.at("entropy").get_to(r.entropy);
    j.at("flops").get_to(r.flops);
  }
}

}  // namespace jd3

#endif  // JD3_SEARCH_HPP_
