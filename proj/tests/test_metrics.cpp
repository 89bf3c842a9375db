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

#include <filesystem>
#include <random>

#include "jd3/gradcheck.hpp"
#include "jd3/harness.hpp"
#include "jd3/image_io.hpp"
#include "jd3/metrics.hpp"
#include "oracles.hpp"

namespace jd3 {
namespace {

using TD = Tensor<double>;

TD filled(Shape s, double v) {
  TD t(s);
  for (auto& x : t.data()) x = v;
  return t;
}

std::vector<double> plane_of(const TD& t, std::size_t n, std::size_t c) {
  return {t.plane(n, c), t.plane(n, c) + t.shape().plane()};
}

// 32x32 checkerboard of 8x8 squares at 0.05 / 0.95, three channels.
TD high_contrast() {
  TD t(Shape{1, 3, 32, 32});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) t(0, c, y, x) = ((x / 8 + y / 8) % 2) ? 0.95 : 0.05;
  return t;
}

// ---------------------------------------------------------------- psnr

TEST(Psnr, Fixtures) {
  const TD a = filled(Shape{1, 3, 8, 8}, 0.25);
  EXPECT_EQ(psnr(a, a), kPsnrCapDb);
  EXPECT_DOUBLE_EQ(psnr(filled(Shape{1, 1, 4, 4}, 0.0), filled(Shape{1, 1, 4, 4}, 1.0)), 0.0);
  EXPECT_NEAR(psnr(filled(Shape{1, 1, 4, 4}, 0.0), filled(Shape{1, 1, 4, 4}, 0.01)), 40.0, 1e-9);
  EXPECT_NEAR(psnr_from_mse(1e-4), 40.0, 1e-12);
}

TEST(Psnr, PeakScaling) {
  std::mt19937_64 rng(1);
  const TD a = random_uniform<double>(Shape{1, 3, 12, 12}, rng, 0.0, 1.0);
  const TD b = random_uniform<double>(Shape{1, 3, 12, 12}, rng, 0.0, 1.0);
  TD a8 = a, b8 = b;
  for (auto& v : a8.data()) v *= 255;
  for (auto& v : b8.data()) v *= 255;
  EXPECT_NEAR(psnr(a8, b8, 255.0), psnr(a, b), 1e-10);
  EXPECT_THROW(psnr(a, b, 0.0), std::invalid_argument);
}

TEST(Psnr, StrictlyDecreasingInMse) {
  const TD a = filled(Shape{1, 1, 4, 4}, 0.5);
  double prev = kPsnrCapDb + 1;
  for (double off : {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.3, 0.5}) {
    const double p = psnr(a, filled(Shape{1, 1, 4, 4}, 0.5 + off));
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Psnr, InvariantUnderCommonCircularShift) {
  std::mt19937_64 rng(2);
  const TD a = random_uniform<double>(Shape{1, 2, 10, 14}, rng, 0.0, 1.0);
  const TD b = random_uniform<double>(Shape{1, 2, 10, 14}, rng, 0.0, 1.0);
  TD as(a.shape()), bs(b.shape());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 10; ++y)
      for (std::size_t x = 0; x < 14; ++x) {
        as(0, c, (y + 3) % 10, (x + 5) % 14) = a(0, c, y, x);
        bs(0, c, (y + 3) % 10, (x + 5) % 14) = b(0, c, y, x);
      }
  EXPECT_NEAR(psnr(as, bs), psnr(a, b), 1e-12);
}

TEST(Psnr, ShapeMismatchThrows) {
  EXPECT_THROW(psnr(TD(Shape{1, 3, 4, 4}), TD(Shape{1, 3, 4, 5})), ShapeError);
}

// ---------------------------------------------------------------- ssim

TEST(Ssim, WindowIsNormalisedAndSymmetric) {
  const auto g = detail::gaussian_window();
  double s = 0;
  for (double v : g) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  for (std::size_t i = 0; i < kSsimWindow; ++i) EXPECT_EQ(g[i], g[kSsimWindow - 1 - i]);
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
  std::mt19937_64 rng(3);
  for (std::size_t t = 0; t < 10; ++t) {
    const TD a = random_uniform<double>(Shape{2, 3, 11 + t, 20 - t % 3u}, rng, -5.0, 5.0);
    EXPECT_EQ(ssim(a, a), 1.0);
  }
  EXPECT_EQ(ssim(filled(Shape{1, 1, 16, 16}, 0.0), filled(Shape{1, 1, 16, 16}, 0.0)), 1.0);
}

TEST(Ssim, InvertedHighContrastFixture) {
  const TD a = high_contrast();
  TD b = a;
  for (auto& v : b.data()) v = 1.0 - v;
  const double s = ssim(a, b);
  EXPECT_LT(s, 0.5);
  EXPECT_NEAR(s, oracle::ssim_plane_naive(plane_of(a, 0, 0), plane_of(b, 0, 0), 32, 32), 1e-12);
  EXPECT_NEAR(s, -0.6543061477, 1e-9);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  std::mt19937_64 rng(4);
  for (std::size_t t = 0; t < 5; ++t) {
    const TD a = random_uniform<double>(Shape{1, 1, 16 + t, 13 + 2 * t}, rng, 0.0, 1.0);
    TD b = a;
    std::normal_distribution<double> nd(0, 0.05 * static_cast<double>(t + 1));
    for (auto& v : b.data()) v += nd(rng);
    EXPECT_NEAR(ssim(a, b), oracle::ssim_plane_naive(plane_of(a, 0, 0), plane_of(b, 0, 0), a.shape().h, a.shape().w), 1e-12);
  }
}

TEST(Ssim, Symmetric) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const TD a = random_uniform<double>(Shape{1, 3, 24, 24}, rng, 0.0, 1.0);
    const TD b = random_uniform<double>(Shape{1, 3, 24, 24}, rng, 0.0, 1.0);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
  }
}

TEST(Ssim, InvariantUnderCommonTranslation) {
  std::mt19937_64 rng(6);
  const TD a = random_uniform<double>(Shape{1, 1, 20, 20}, rng, 0.0, 1.0);
  const TD b = random_uniform<double>(Shape{1, 1, 20, 20}, rng, 0.0, 1.0);
  // Embed both at offset (3, 7) in a larger canvas, then crop back.
  TD A(Shape{1, 1, 30, 30}), B(Shape{1, 1, 30, 30});
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 20; ++x) {
      A(0, 0, y + 3, x + 7) = a(0, 0, y, x);
      B(0, 0, y + 3, x + 7) = b(0, 0, y, x);
    }
  TD ca(a.shape()), cb(b.shape());
  for (std::size_t y = 0; y < 20; ++y)
    for (std::size_t x = 0; x < 20; ++x) {
      ca(0, 0, y, x) = A(0, 0, y + 3, x + 7);
      cb(0, 0, y, x) = B(0, 0, y + 3, x + 7);
    }
  EXPECT_EQ(ssim(ca, cb), ssim(a, b));
  EXPECT_NEAR(psnr(ca, cb), psnr(a, b), 0);
}

TEST(Ssim, TooSmallThrows) {
  EXPECT_THROW(ssim(TD(Shape{1, 1, 10, 32}), TD(Shape{1, 1, 10, 32})), ShapeError);
  EXPECT_THROW(ssim(TD(Shape{1, 1, 16, 16}), TD(Shape{1, 1, 16, 17})), ShapeError);
}

// ------------------------------------------------------- quantization

TEST(Metrics, EightBitRoundTripStaysClose) {
  const auto dir = std::filesystem::temp_directory_path() / "jd3_metrics_q8";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0, 0.03);
  for (int t = 0; t < 6; ++t) {
    const TD gt = procedural_scene<double>(rng, 64, 64);
    TD pred = gt;
    for (auto& v : pred.data()) v = std::clamp(v + nd(rng), 0.0, 1.0);
    save_png((dir / "gt.png").string(), gt, 8);
    save_png((dir / "pred.png").string(), pred, 8);
    const TD gt8 = load_png<double>((dir / "gt.png").string());
    const TD pred8 = load_png<double>((dir / "pred.png").string());
    EXPECT_LE(std::abs(psnr(pred8, gt8) - psnr(pred, gt)), 0.1);
    EXPECT_LE(std::abs(ssim(pred8, gt8) - ssim(pred, gt)), 0.005);
  }
  std::filesystem::remove_all(dir);
}

TEST(Metrics, EvaluateBundlesAll) {
  std::mt19937_64 rng(8);
  const TD a = random_uniform<double>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
  const TD b = random_uniform<double>(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
  const MetricReport r = evaluate(a, b);
  EXPECT_EQ(r.psnr, psnr(a, b));
  EXPECT_EQ(r.ssim, ssim(a, b));
  EXPECT_EQ(r.mse, mse(a, b));
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("peak"), 1.0);
}

// -------------------------------------------------------------- losses

TEST(PsnrLoss, EqualInputsGiveNegativeCap) {
  const TD a = filled(Shape{2, 3, 8, 8}, 0.3);
  TD g;
  EXPECT_NEAR(psnr_loss(a, a, &g), -kPsnrCapDb, 1e-9);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(PsnrLoss, IsBatchMeanOfPerImageLogMse) {
  std::mt19937_64 rng(9);
  const TD p = random_uniform<double>(Shape{3, 2, 5, 5}, rng, 0.0, 1.0);
  const TD t = random_uniform<double>(Shape{3, 2, 5, 5}, rng, 0.0, 1.0);
  double want = 0;
  for (std::size_t n = 0; n < 3; ++n) {
    double acc = 0;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 25; ++i) {
        const double d = p.plane(n, c)[i] - t.plane(n, c)[i];
        acc += d * d;
      }
    want += 10 * std::log10(acc / 50 + 1e-12);
  }
  EXPECT_NEAR(psnr_loss(p, t), want / 3, 1e-12);
}

TEST(PsnrLoss, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(10);
  const TD p = random_uniform<double>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
  const TD t = random_uniform<double>(Shape{1, 3, 8, 8}, rng, 0.0, 1.0);
  TD g;
  psnr_loss(p, t, &g);
  const TD fd = finite_difference_grad([&](const TD& x) { return psnr_loss(x, t); }, p, 1e-6);
  EXPECT_LT(max_relative_error(g, fd, 1e-6), 1e-6);
}

TEST(MseLoss, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(11);
  const TD p = random_uniform<double>(Shape{2, 3, 4, 4}, rng, 0.0, 1.0);
  const TD t = random_uniform<double>(Shape{2, 3, 4, 4}, rng, 0.0, 1.0);
  TD g;
  EXPECT_EQ(mse_loss(p, t, &g), mse(p, t));
  const TD fd = finite_difference_grad([&](const TD& x) { return mse_loss(x, t); }, p, 1e-6);
  EXPECT_LT(max_relative_error(g, fd, 1e-6), 1e-6);
}

TEST(Losses, Names) {
  EXPECT_EQ(loss_from_string(to_string(LossKind::psnr)), LossKind::psnr);
  EXPECT_EQ(loss_from_string("mse"), LossKind::mse);
  EXPECT_THROW(loss_from_string("l1"), std::invalid_argument);
}

}  // namespace
}  // namespace jd3
