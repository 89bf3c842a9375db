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

// Randomized finite-difference checks of every hand-written backward pass,
// plus pixel-shuffle inverse checks. Used by `jd3net gradcheck`.

#ifndef JD3_GRADCHECK_SUITE_HPP_
#define JD3_GRADCHECK_SUITE_HPP_

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/gradcheck.hpp"
#include "jd3/metrics.hpp"
#include "jd3/network.hpp"
#include "jd3/ops.hpp"

namespace jd3 {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 6;           // random shapes per op
  std::size_t shuffle_trials = 100;
  double tolerance = 1e-5;          // max relative error
  double eps = 1e-3;                // five-point stencil step
  std::vector<std::string> ops;     // empty = all
};

struct GradCheckResult {
  std::string op;
  std::string wrt;
  Shape shape;
  double max_rel_error = 0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckResult> checks;
  std::size_t shuffle_checks = 0;
  std::size_t shuffle_failures = 0;
  double tolerance = 0;

  std::size_t failures() const {
    return shuffle_failures +
           static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return !c.passed; }));
  }
  std::size_t total() const { return checks.size() + shuffle_checks; }
  double worst() const {
    double w = 0;
    for (const auto& c : checks) w = std::max(w, c.max_rel_error);
    return w;
  }
};

inline const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops{"conv2d", "depthwise_conv", "layer_norm", "simple_gate", "avg_pool",
                                            "channel_scale", "pixel_shuffle", "psnr_loss", "network"};
  return ops;
}

namespace detail {

using TD = Tensor<double>;

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

class GradChecker {
 public:
  GradChecker(const GradCheckOptions& o, GradCheckReport& r) : o_(o), r_(r) {}

  template <typename F>
  void check(const std::string& op, const std::string& wrt, const TD& analytic, F&& f, const TD& at,
             double floor = 1e-6) {
    const TD fd = finite_difference_grad5(f, at, o_.eps);
    GradCheckResult res;
    res.op = op;
    res.wrt = wrt;
    res.shape = at.shape();
    res.max_rel_error = max_relative_error(analytic, fd, floor);
    res.passed = res.max_rel_error < o_.tolerance;
    r_.checks.push_back(res);
  }

 private:
  const GradCheckOptions& o_;
  GradCheckReport& r_;
};

inline void check_conv(GradChecker& gc, std::mt19937_64& rng, bool depthwise) {
  const std::size_t n = pick(rng, 1, 2), h = pick(rng, 3, 8), w = pick(rng, 3, 8);
  ConvSpec s;
  if (depthwise) {
    const std::size_t c = pick(rng, 2, 6);
    s = ConvSpec{c, c, 3, 1, c, 1};
  } else {
    const std::size_t g = pick(rng, 1, 2), k = pick(rng, 1, 3);
    s = ConvSpec{g * pick(rng, 1, 3), g * pick(rng, 1, 3), k, pick(rng, 1, 2), g, pick(rng, 0, k - 1)};
  }
  const TD x = random_uniform<double>(Shape{n, s.in_channels, h, w}, rng);
  const TD wt = random_uniform<double>(s.weight_shape(), rng);
  TD b = random_uniform<double>(Shape{s.out_channels, 1, 1, 1}, rng);
  const TD y = conv2d<double>(x, wt, b.data(), s);
  const TD r = random_uniform<double>(y.shape(), rng);
  const auto g = conv2d_backward(r, x, wt, s);
  const std::string op = depthwise ? "depthwise_conv" : "conv2d";
  gc.check(op, "input", g.input, [&](const TD& v) { return dot(r, conv2d<double>(v, wt, b.data(), s)); }, x);
  gc.check(op, "weight", g.weight, [&](const TD& v) { return dot(r, conv2d<double>(x, v, b.data(), s)); }, wt);
  const TD gb(b.shape(), g.bias);
  gc.check(op, "bias", gb, [&](const TD& v) { return dot(r, conv2d<double>(x, wt, v.data(), s)); }, b);
}

inline void check_layer_norm(GradChecker& gc, std::mt19937_64& rng) {
  // at least four channels: with two the normalized output is +-1 and flat
  const std::size_t n = pick(rng, 1, 2), c = pick(rng, 4, 8), h = pick(rng, 2, 6), w = pick(rng, 2, 6);
  const TD x = random_uniform<double>(Shape{n, c, h, w}, rng);
  const TD gm = random_uniform<double>(Shape{c, 1, 1, 1}, rng);
  const TD bt = random_uniform<double>(Shape{c, 1, 1, 1}, rng);
  const TD r = random_uniform<double>(x.shape(), rng);
  const auto g = layer_norm_channels_backward<double>(r, x, gm.data());
  gc.check("layer_norm", "input", g.input,
           [&](const TD& v) { return dot(r, layer_norm_channels<double>(v, gm.data(), bt.data())); }, x);
  gc.check("layer_norm", "gamma", TD(gm.shape(), g.gamma),
           [&](const TD& v) { return dot(r, layer_norm_channels<double>(x, v.data(), bt.data())); }, gm);
  gc.check("layer_norm", "beta", TD(bt.shape(), g.beta),
           [&](const TD& v) { return dot(r, layer_norm_channels<double>(x, gm.data(), v.data())); }, bt);
}

inline void check_gate(GradChecker& gc, std::mt19937_64& rng) {
  const std::size_t n = pick(rng, 1, 2), c = 2 * pick(rng, 1, 4), h = pick(rng, 2, 7), w = pick(rng, 2, 7);
  const TD x = random_uniform<double>(Shape{n, c, h, w}, rng);
  const TD r = random_uniform<double>(Shape{n, c / 2, h, w}, rng);
  gc.check("simple_gate", "input", simple_gate_backward(r, x), [&](const TD& v) { return dot(r, simple_gate(v)); }, x);
}

inline void check_pool(GradChecker& gc, std::mt19937_64& rng) {
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 5), pick(rng, 1, 6), pick(rng, 1, 6)};
  const TD x = random_uniform<double>(s, rng);
  const TD r = random_uniform<double>(Shape{s.n, s.c, 1, 1}, rng);
  gc.check("avg_pool", "input", global_avg_pool_backward(r, s), [&](const TD& v) { return dot(r, global_avg_pool(v)); },
           x);
}

inline void check_scale(GradChecker& gc, std::mt19937_64& rng) {
  const Shape s{pick(rng, 1, 2), pick(rng, 1, 5), pick(rng, 1, 6), pick(rng, 1, 6)};
  const TD x = random_uniform<double>(s, rng);
  const TD a = random_uniform<double>(Shape{s.n, s.c, 1, 1}, rng);
  const TD r = random_uniform<double>(s, rng);
  const auto [gi, ga] = channel_scale_backward(r, x, a);
  gc.check("channel_scale", "input", gi, [&](const TD& v) { return dot(r, channel_scale(v, a)); }, x);
  gc.check("channel_scale", "scale", ga, [&](const TD& v) { return dot(r, channel_scale(x, v)); }, a);
}

inline void check_shuffle(GradChecker& gc, std::mt19937_64& rng) {
  const std::size_t f = pick(rng, 1, 4);
  const Shape s{pick(rng, 1, 2), f * f * pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4)};
  const TD x = random_uniform<double>(s, rng);
  const TD r = random_uniform<double>(Shape{s.n, s.c / (f * f), s.h * f, s.w * f}, rng);
  gc.check("pixel_shuffle", "input", pixel_unshuffle(r, f), [&](const TD& v) { return dot(r, pixel_shuffle(v, f)); },
           x);
}

inline void check_psnr_loss(GradChecker& gc, std::mt19937_64& rng) {
  const Shape s{pick(rng, 1, 3), 3, pick(rng, 2, 8), pick(rng, 2, 8)};
  const TD p = random_uniform<double>(s, rng, 0.0, 1.0);
  const TD t = random_uniform<double>(s, rng, 0.0, 1.0);
  TD g;
  psnr_loss(p, t, &g);
  gc.check("psnr_loss", "pred", g, [&](const TD& v) { return psnr_loss(v, t); }, p);
}

// Linear read-out of a small network with every residual branch opened.
inline void check_network(GradChecker& gc, std::mt19937_64& rng) {
  ArchConfig c;
  c.d = pick(rng, 1, 2);
  c.w = 4 * pick(rng, 1, 2);
  c.blocks = pick(rng, 1, 2);
  c.c_in = pick(rng, 0, 1) ? 5 : 1;
  const bool sca = pick(rng, 0, 1) == 1;
  auto p = build<double>(c, rng(), sca);
  std::uniform_real_distribution<double> u(0.3, 0.8);
  for (auto& b : p.blocks) {
    b.gamma1[0] = u(rng);
    b.gamma2[0] = -u(rng);
  }
  const std::size_t hw = 2 * c.d;
  const TD x = random_uniform<double>(Shape{1, c.c_in, hw, hw}, rng);
  ForwardCache<double> cache;
  const TD y = forward(p, x, &cache);
  const TD r = random_uniform<double>(y.shape(), rng);
  TD gin;
  const auto g = backward(p, cache, r, &gin);
  gc.check("network", "input", gin, [&](const TD& v) { return dot(r, forward(p, v)); }, x);
  std::vector<std::pair<std::string, const TD*>> grads;
  visit_parameters(g, [&](const std::string& n, const TD& t) { grads.emplace_back(n, &t); });
  std::size_t i = 0;
  visit_parameters(p, [&](const std::string& n, TD& slot) {
    const TD saved = slot;
    gc.check("network", n, *grads[i++].second,
             [&](const TD& v) {
               slot = v;
               return dot(r, forward(p, x));
             },
             saved);
    slot = saved;
  });
}

}  // namespace detail

/// Runs `trials` random-shape checks of each selected op. Throws
/// std::invalid_argument for an unknown op name.
inline GradCheckReport run_gradcheck_suite(const GradCheckOptions& o) {
  std::vector<std::string> ops = o.ops.empty() ? gradcheck_ops() : o.ops;
  for (const auto& op : ops)
    if (std::find(gradcheck_ops().begin(), gradcheck_ops().end(), op) == gradcheck_ops().end())
      throw std::invalid_argument("unknown gradcheck op '" + op + "'");
  GradCheckReport rep;
  rep.tolerance = o.tolerance;
  detail::GradChecker gc(o, rep);
  std::mt19937_64 rng(o.seed);
  for (const auto& op : ops) {
    for (std::size_t t = 0; t < o.trials; ++t) {
      if (op == "conv2d") detail::check_conv(gc, rng, false);
      if (op == "depthwise_conv") detail::check_conv(gc, rng, true);
      if (op == "layer_norm") detail::check_layer_norm(gc, rng);
      if (op == "simple_gate") detail::check_gate(gc, rng);
      if (op == "avg_pool") detail::check_pool(gc, rng);
      if (op == "channel_scale") detail::check_scale(gc, rng);
      if (op == "pixel_shuffle") detail::check_shuffle(gc, rng);
      if (op == "psnr_loss") detail::check_psnr_loss(gc, rng);
      if (op == "network") detail::check_network(gc, rng);
    }
  }
  if (o.ops.empty() || std::find(ops.begin(), ops.end(), "pixel_shuffle") != ops.end()) {
    for (std::size_t t = 0; t < o.shuffle_trials; ++t) {
      const std::size_t f = detail::pick(rng, 1, 5);
      const Shape s{detail::pick(rng, 1, 3), f * f * detail::pick(rng, 1, 3), detail::pick(rng, 1, 6),
                    detail::pick(rng, 1, 6)};
      const auto x = random_uniform<double>(s, rng);
      ++rep.shuffle_checks;
      if (!(pixel_unshuffle(pixel_shuffle(x, f), f) == x)) ++rep.shuffle_failures;
    }
  }
  return rep;
}

inline void to_json(nlohmann::json& j, const GradCheckResult& r) {
  j = nlohmann::json{{"op", r.op},
                     {"wrt", r.wrt},
                     {"shape", {r.shape.n, r.shape.c, r.shape.h, r.shape.w}},
                     {"max_rel_error", r.max_rel_error},
                     {"passed", r.passed}};
}

inline void to_json(nlohmann::json& j, const GradCheckReport& r) {
  j = nlohmann::json{{"checks_run", r.total()},
                     {"failures", r.failures()},
                     {"tolerance", r.tolerance},
                     {"worst_rel_error", r.worst()},
                     {"gradient_checks", r.checks},
                     {"shuffle_inverse_checks", r.shuffle_checks},
                     {"shuffle_inverse_failures", r.shuffle_failures}};
}

}  // namespace jd3

#endif  // JD3_GRADCHECK_SUITE_HPP_
