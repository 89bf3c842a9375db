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
#include <cmath>
#include <random>

#include "jd3/gradcheck.hpp"
#include "jd3/ops.hpp"
#include "oracles.hpp"

namespace jd3 {
namespace {

using TD = Tensor<double>;

std::vector<double> no_bias() { return {}; }

TD conv(const TD& x, const TD& w, const std::vector<double>& b, const ConvSpec& s) {
  return conv2d<double>(x, w, std::span<const double>(b), s);
}

// ---------------------------------------------------------------- conv2d

TEST(Conv2d, IdentityPointwise) {
  std::mt19937_64 rng(1);
  const auto x = random_uniform<double>(Shape{2, 3, 5, 4}, rng);
  TD w(Shape{3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w(c, c, 0, 0) = 1;
  EXPECT_EQ(conv(x, w, {0, 0, 0}, ConvSpec{3, 3, 1, 1, 1, 0}), x);
}

TEST(Conv2d, DepthwiseOnesOnConstantField) {
  const double v = 0.37;
  TD x(Shape{1, 4, 6, 6}, v);
  TD w(Shape{4, 1, 3, 3}, 1.0);
  const TD y = conv(x, w, no_bias(), ConvSpec{4, 4, 3, 1, 4, 1});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 1; i < 5; ++i)
      for (std::size_t j = 1; j < 5; ++j) EXPECT_NEAR(y(0, c, i, j), 9 * v, 1e-15);
  EXPECT_NEAR(y(0, 0, 0, 0), 4 * v, 1e-15);  // corner sees 4 taps
}

TEST(Conv2d, MatchesNestedLoopOracleStrided) {
  std::mt19937_64 rng(2);
  const ConvSpec s{8, 12, 3, 2, 1, 1};
  const auto x = random_uniform<double>(Shape{4, 8, 16, 16}, rng);
  const auto w = random_uniform<double>(s.weight_shape(), rng);
  std::vector<double> b(12);
  for (auto& v : b) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const TD got = conv(x, w, b, s);
  const TD want = oracle::conv2d_naive(x, w, b, s);
  ASSERT_EQ(got.shape(), (Shape{4, 12, 8, 8}));
  for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12) << i;
}

TEST(Conv2d, MatchesOracleOverRandomSpecs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    auto pick = [&](std::size_t lo, std::size_t hi) {
      return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    const std::size_t g = pick(1, 3);
    ConvSpec s{g * pick(1, 3), g * pick(1, 3), pick(1, 4), pick(1, 3), g, 0};
    s.padding = pick(0, s.kernel - 1);
    const std::size_t h = pick(s.kernel, 9);
    const std::size_t wd = pick(s.kernel, 9);
    const auto x = random_uniform<double>(Shape{pick(1, 2), s.in_channels, h, wd}, rng);
    const auto w = random_uniform<double>(s.weight_shape(), rng);
    std::vector<double> b(s.out_channels, 0.25);
    const TD got = conv(x, w, b, s);
    const TD want = oracle::conv2d_naive(x, w, b, s);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv2d, OutputExtentFormula) {
  const ConvSpec s{1, 1, 4, 4, 1, 0};
  EXPECT_EQ(s.out_extent(16), 4u);
  EXPECT_EQ(s.out_extent(17), 4u);
  EXPECT_EQ((ConvSpec{1, 1, 3, 2, 1, 1}.out_extent(7)), 4u);
}

TEST(Conv2d, Errors) {
  TD x(Shape{1, 4, 4, 4});
  EXPECT_THROW(conv(x, TD(Shape{2, 4, 1, 1}), no_bias(), ConvSpec{3, 2, 1, 1, 1, 0}), ShapeError);
  EXPECT_THROW(conv(x, TD(Shape{3, 2, 1, 1}), no_bias(), ConvSpec{4, 3, 1, 1, 2, 0}), ShapeError);
  EXPECT_THROW(conv(x, TD(Shape{2, 4, 5, 5}), no_bias(), ConvSpec{4, 2, 5, 1, 1, 0}), ShapeError);
  x[0] = 1e308;
  x[16] = 1e308;
  EXPECT_THROW(conv(x, TD(Shape{1, 4, 1, 1}, 10.0), no_bias(), ConvSpec{4, 1, 1, 1, 1, 0}), NumericError);
}

TEST(Conv2d, IsLinearInInput) {
  std::mt19937_64 rng(4);
  const ConvSpec s{4, 6, 3, 1, 2, 1};
  const auto w = random_uniform<double>(s.weight_shape(), rng);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_uniform<double>(Shape{2, 4, 7, 5}, rng);
    const auto y = random_uniform<double>(Shape{2, 4, 7, 5}, rng);
    const double a = 1.7, b = -0.6;
    TD mix(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const TD lhs = conv(mix, w, no_bias(), s);
    const TD cx = conv(x, w, no_bias(), s);
    const TD cy = conv(y, w, no_bias(), s);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      const double rhs = a * cx[i] + b * cy[i];
      ASSERT_LE(std::abs(lhs[i] - rhs), 1e-10 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(Conv2d, CountsMacsAndBiasAdds) {
  op_counter().reset();
  TD x(Shape{2, 4, 6, 6});
  std::vector<double> b(6);
  conv(x, TD(Shape{6, 2, 3, 3}), b, ConvSpec{4, 6, 3, 1, 2, 1});
  EXPECT_EQ(op_counter().macs.load(), 2u * 6 * 36 * 2 * 9);
  EXPECT_EQ(op_counter().bias_adds.load(), 2u * 6 * 36);
}

// ------------------------------------------------------- conv2d_backward

TEST(Conv2dBackward, ZeroGradOut) {
  std::mt19937_64 rng(5);
  const ConvSpec s{4, 4, 3, 1, 1, 1};
  const auto x = random_uniform<double>(Shape{1, 4, 5, 5}, rng);
  const auto w = random_uniform<double>(s.weight_shape(), rng);
  const auto g = conv2d_backward<double>(TD(Shape{1, 4, 5, 5}), x, w, s);
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.weight.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.bias) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dBackward, ScalarChainRule) {
  const double w0 = 0.7, x0 = -1.3, g0 = 2.5;
  const auto g = conv2d_backward<double>(TD(Shape{1, 1, 1, 1}, g0), TD(Shape{1, 1, 1, 1}, x0),
                                         TD(Shape{1, 1, 1, 1}, w0), ConvSpec{});
  EXPECT_DOUBLE_EQ(g.weight[0], g0 * x0);
  EXPECT_DOUBLE_EQ(g.input[0], g0 * w0);
  EXPECT_DOUBLE_EQ(g.bias[0], g0);
}

struct ConvCase {
  Shape in;
  ConvSpec spec;
};

void check_conv_backward(const ConvCase& c, std::uint64_t seed, double tol) {
  std::mt19937_64 rng(seed);
  const auto x = random_uniform<double>(c.in, rng);
  const auto w = random_uniform<double>(c.spec.weight_shape(), rng);
  std::vector<double> b(c.spec.out_channels);
  for (auto& v : b) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const TD y = conv(x, w, b, c.spec);
  const auto r = random_uniform<double>(y.shape(), rng);
  const auto g = conv2d_backward(r, x, w, c.spec);

  const auto fx = finite_difference_grad([&](const TD& xx) { return dot(r, conv(xx, w, b, c.spec)); }, x);
  EXPECT_LT(max_relative_error(g.input, fx), tol);
  const auto fw = finite_difference_grad([&](const TD& ww) { return dot(r, conv(x, ww, b, c.spec)); }, w);
  EXPECT_LT(max_relative_error(g.weight, fw), tol);
  TD bt(Shape{b.size(), 1, 1, 1}, b);
  const auto fb = finite_difference_grad(
      [&](const TD& bb) { return dot(r, conv(x, w, std::vector<double>(bb.data().begin(), bb.data().end()), c.spec)); },
      bt);
  EXPECT_LT(max_relative_error(g.bias, fb.data()), tol);
}

TEST(Conv2dBackward, GroupedMatchesFiniteDifferences) {
  check_conv_backward({Shape{2, 4, 6, 6}, ConvSpec{4, 4, 3, 1, 2, 1}}, 11, 1e-6);
}

TEST(Conv2dBackward, StridedAndDepthwiseMatchFiniteDifferences) {
  check_conv_backward({Shape{2, 3, 8, 8}, ConvSpec{3, 5, 2, 2, 1, 0}}, 12, 1e-6);
  check_conv_backward({Shape{1, 6, 7, 5}, ConvSpec{6, 6, 3, 1, 6, 1}}, 13, 1e-6);
  check_conv_backward({Shape{2, 4, 8, 8}, ConvSpec{4, 8, 3, 2, 2, 1}}, 14, 1e-6);
}

// --------------------------------------------------------- pixel shuffle

TEST(PixelShuffle, RatioOneIsIdentity) {
  std::mt19937_64 rng(6);
  const auto x = random_uniform<double>(Shape{2, 3, 4, 5}, rng);
  EXPECT_EQ(pixel_shuffle(x, 1), x);
  EXPECT_EQ(pixel_unshuffle(x, 1), x);
}

TEST(PixelShuffle, HandEnumeratedIndexMap) {
  std::vector<double> v(16);
  for (std::size_t i = 0; i < 16; ++i) v[i] = static_cast<double>(i);
  const TD y = pixel_shuffle(TD(Shape{1, 4, 2, 2}, v), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const std::vector<double> want{0, 4, 1, 5, 8, 12, 9, 13, 2, 6, 3, 7, 10, 14, 11, 15};
  EXPECT_EQ(y.vec(), want);
}

TEST(PixelShuffle, InversePairOnRandomTensors) {
  std::mt19937_64 rng(7);
  for (std::size_t r = 1; r <= 4; ++r) {
    const auto x = random_uniform<double>(Shape{2, 2 * r * r, 3, 2}, rng);
    EXPECT_EQ(pixel_unshuffle(pixel_shuffle(x, r), r), x);
    const auto z = random_uniform<double>(Shape{2, 3, 3 * r, 2 * r}, rng);
    EXPECT_EQ(pixel_shuffle(pixel_unshuffle(z, r), r), z);
  }
}

TEST(PixelShuffle, PreservesElementMultiset) {
  std::mt19937_64 rng(8);
  const auto x = random_uniform<double>(Shape{1, 9, 4, 4}, rng);
  auto a = x.vec();
  auto b = pixel_shuffle(x, 3).vec();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(PixelUnshuffle, SplitsBayerPhases) {
  // 4x4 mosaic labelled by phase: value = 10 * phase + position-in-phase
  TD m(Shape{1, 1, 4, 4});
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) m(0, 0, y, x) = 10.0 * static_cast<double>((y % 2) * 2 + x % 2) + static_cast<double>((y / 2) * 2 + x / 2);
  const TD p = pixel_unshuffle(m, 2);
  ASSERT_EQ(p.shape(), (Shape{1, 4, 2, 2}));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) EXPECT_EQ(p(0, c, y, x), 10.0 * c + y * 2 + x);
}

TEST(PixelShuffle, Errors) {
  EXPECT_THROW(pixel_shuffle(TD(Shape{1, 6, 2, 2}), 2), ShapeError);
  EXPECT_THROW(pixel_unshuffle(TD(Shape{1, 1, 3, 4}), 2), ShapeError);
}

// ------------------------------------------------------------ layer norm

TEST(LayerNorm, ConstantInputGivesZero) {
  TD x(Shape{1, 5, 3, 3}, 2.5);
  std::vector<double> g(5, 1.0), b(5, 0.0);
  const TD y = layer_norm_channels<double>(x, g, b);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, TwoPointNormalization) {
  const double a = 0.9, bb = -0.3, eps = 1e-6;
  TD x(Shape{1, 2, 1, 1}, {a, bb});
  std::vector<double> g(2, 1.0), z(2, 0.0);
  const TD y = layer_norm_channels<double>(x, g, z, eps);
  const double half = (a - bb) / 2;
  const double s = std::abs(half) / std::sqrt(half * half + eps);
  EXPECT_NEAR(y[0], s, 1e-15);
  EXPECT_NEAR(y[1], -s, 1e-15);
}

TEST(LayerNorm, PerPixelMomentsOfOutput) {
  std::mt19937_64 rng(9);
  const auto x = random_uniform<double>(Shape{2, 8, 4, 4}, rng, -3, 3);
  std::vector<double> g(8, 1.0), z(8, 0.0);
  const TD y = layer_norm_channels<double>(x, g, z);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t p = 0; p < 16; ++p) {
      double mean = 0, var = 0, xmean = 0, xvar = 0;
      for (std::size_t c = 0; c < 8; ++c) {
        mean += y(n, c, p / 4, p % 4) / 8;
        xmean += x(n, c, p / 4, p % 4) / 8;
      }
      for (std::size_t c = 0; c < 8; ++c) {
        var += std::pow(y(n, c, p / 4, p % 4) - mean, 2) / 8;
        xvar += std::pow(x(n, c, p / 4, p % 4) - xmean, 2) / 8;
      }
      EXPECT_LT(std::abs(mean), 1e-10);
      EXPECT_NEAR(var, xvar / (xvar + kLayerNormEps), 1e-12);
    }
}

TEST(LayerNorm, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  const auto x = random_uniform<double>(Shape{2, 6, 3, 4}, rng);
  const auto gt = random_uniform<double>(Shape{6, 1, 1, 1}, rng);
  const auto bt = random_uniform<double>(Shape{6, 1, 1, 1}, rng);
  const TD y = layer_norm_channels<double>(x, gt.data(), bt.data());
  const auto r = random_uniform<double>(y.shape(), rng);
  const auto g = layer_norm_channels_backward<double>(r, x, gt.data());
  const auto fx = finite_difference_grad(
      [&](const TD& xx) { return dot(r, layer_norm_channels<double>(xx, gt.data(), bt.data())); }, x);
  EXPECT_LT(max_relative_error(g.input, fx), 1e-6);
  const auto fg = finite_difference_grad(
      [&](const TD& gg) { return dot(r, layer_norm_channels<double>(x, gg.data(), bt.data())); }, gt);
  EXPECT_LT(max_relative_error(g.gamma, fg.data()), 1e-6);
  const auto fb = finite_difference_grad(
      [&](const TD& bb) { return dot(r, layer_norm_channels<double>(x, gt.data(), bb.data())); }, bt);
  EXPECT_LT(max_relative_error(g.beta, fb.data()), 1e-6);
}

TEST(LayerNorm, ShapeErrors) {
  std::vector<double> g(3, 1.0);
  EXPECT_THROW(layer_norm_channels<double>(TD(Shape{1, 4, 2, 2}), g, g), ShapeError);
}

// ----------------------------------------------------------- simple gate

TEST(SimpleGate, MultiplicativeIdentityAndZero) {
  std::mt19937_64 rng(11);
  const auto x = random_uniform<double>(Shape{2, 3, 4, 4}, rng);
  const TD ones = concat_channels(x, TD(Shape{2, 3, 4, 4}, 1.0));
  EXPECT_EQ(simple_gate(ones), x);
  const TD zeros = concat_channels(x, TD(Shape{2, 3, 4, 4}, 0.0));
  const TD gated = simple_gate(zeros);
  for (double v : gated.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(simple_gate(ones).shape().c, 3u);
}

TEST(SimpleGate, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const auto x = random_uniform<double>(Shape{2, 8, 3, 3}, rng);
  const auto r = random_uniform<double>(Shape{2, 4, 3, 3}, rng);
  const auto g = simple_gate_backward(r, x);
  const auto f = finite_difference_grad([&](const TD& xx) { return dot(r, simple_gate(xx)); }, x);
  EXPECT_LT(max_relative_error(g, f), 1e-6);
}

TEST(SimpleGate, OddChannelsRejected) { EXPECT_THROW(simple_gate(TD(Shape{1, 3, 2, 2})), ShapeError); }

// ------------------------------------------------- channel attention ops

TEST(ChannelAttentionOps, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const auto x = random_uniform<double>(Shape{2, 3, 4, 5}, rng);
  const auto sc = random_uniform<double>(Shape{2, 3, 1, 1}, rng);
  const auto r = random_uniform<double>(x.shape(), rng);
  auto [gx, gs] = channel_scale_backward(r, x, sc);
  EXPECT_LT(max_relative_error(gx, finite_difference_grad([&](const TD& xx) { return dot(r, channel_scale(xx, sc)); }, x)), 1e-6);
  EXPECT_LT(max_relative_error(gs, finite_difference_grad([&](const TD& ss) { return dot(r, channel_scale(x, ss)); }, sc)), 1e-6);

  const auto rp = random_uniform<double>(Shape{2, 3, 1, 1}, rng);
  const auto gp = global_avg_pool_backward(rp, x.shape());
  EXPECT_LT(max_relative_error(gp, finite_difference_grad([&](const TD& xx) { return dot(rp, global_avg_pool(xx)); }, x)), 1e-6);
}

// ------------------------------------------------- finite differences

TEST(FiniteDifference, SumGivesOnes) {
  std::mt19937_64 rng(14);
  const auto x = random_uniform<double>(Shape{1, 2, 3, 3}, rng);
  const auto g = finite_difference_grad(
      [](const TD& t) {
        double s = 0;
        for (double v : t.data()) s += v;
        return s;
      },
      x);
  for (double v : g.data()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDifference, HalfSquaredNormGivesX) {
  std::mt19937_64 rng(15);
  const auto x = random_uniform<double>(Shape{1, 2, 3, 3}, rng);
  const auto g = finite_difference_grad([](const TD& t) { return 0.5 * dot(t, t); }, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], x[i], 1e-9);
}

TEST(FiniteDifference, AgreesWithConvBackwardOnSum) {
  std::mt19937_64 rng(16);
  const ConvSpec s{3, 4, 3, 1, 1, 1};
  const auto x = random_uniform<double>(Shape{1, 3, 5, 5}, rng);
  const auto w = random_uniform<double>(s.weight_shape(), rng);
  const auto sum_conv = [&](const TD& xx) {
    const TD y = conv(xx, w, no_bias(), s);
    double acc = 0;
    for (double v : y.data()) acc += v;
    return acc;
  };
  const auto g = conv2d_backward(TD(Shape{1, 4, 5, 5}, 1.0), x, w, s);
  EXPECT_LT(max_relative_error(g.input, finite_difference_grad(sum_conv, x)), 1e-6);
}

TEST(FiniteDifference, RejectsNonFiniteAndBadEps) {
  const TD x(Shape{1, 1, 1, 1}, 1.0);
  EXPECT_THROW(finite_difference_grad([](const TD&) { return std::nan(""); }, x), NumericError);
  EXPECT_THROW(finite_difference_grad([](const TD&) { return 0.0; }, x, 0.0), std::invalid_argument);
}

// All backward ops against finite differences on random shapes <= (2, 8, 8, 8).
TEST(BackwardProperty, RandomShapesAgreeWithFiniteDifferences) {
  std::mt19937_64 rng(17);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  for (int trial = 0; trial < 12; ++trial) {
    // two-channel norm output is +-1 almost everywhere, too flat for a difference quotient
    const std::size_t n = pick(1, 2), c = 2 * pick(2, 4), h = pick(3, 8), w = pick(3, 8);
    const auto x = random_uniform<double>(Shape{n, c, h, w}, rng);
    {
      const auto r = random_uniform<double>(Shape{n, c / 2, h, w}, rng);
      EXPECT_LT(max_relative_error(simple_gate_backward(r, x),
                                   finite_difference_grad([&](const TD& xx) { return dot(r, simple_gate(xx)); }, x)),
                1e-5);
    }
    {
      const auto gm = random_uniform<double>(Shape{c, 1, 1, 1}, rng);
      const auto bt = random_uniform<double>(Shape{c, 1, 1, 1}, rng);
      const auto r = random_uniform<double>(x.shape(), rng);
      const auto g = layer_norm_channels_backward<double>(r, x, gm.data());
      EXPECT_LT(max_relative_error(g.input, finite_difference_grad([&](const TD& xx) {
                                     return dot(r, layer_norm_channels<double>(xx, gm.data(), bt.data()));
                                   }, x)),
                1e-5);
    }
    {
      const std::size_t g = pick(0, 1) ? 2 : 1;
      const std::size_t k = pick(1, 3);
      ConvSpec s{c, g * pick(1, 3), k, pick(1, 2), g, pick(0, k - 1)};
      check_conv_backward({Shape{n, c, h, w}, s}, 100 + static_cast<std::uint64_t>(trial), 1e-5);
    }
  }
}

}  // namespace
}  // namespace jd3
