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

// MSE / PSNR / SSIM and the two training losses.
//
// Conventions: peak 1.0 for float images (255 for 8-bit files), no border
// crop, PSNR capped at kPsnrCapDb (mse floored at 1e-12 * peak^2).

#ifndef JD3_METRICS_HPP_
#define JD3_METRICS_HPP_

#include <array>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/tensor.hpp"

namespace jd3 {

inline constexpr double kMseFloor = 1e-12;
inline constexpr double kPsnrCapDb = 120.0;  // 10 * log10(1 / kMseFloor)

struct MetricReport {
  double psnr = 0;
  double ssim = 0;
  double mse = 0;
  double peak = 1;
};

namespace detail {
template <Real T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}
}  // namespace detail

template <Real T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mse");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

inline double psnr_from_mse(double m, double peak = 1.0) {
  const double floor = kMseFloor * peak * peak;
  if (m <= floor) return kPsnrCapDb;
  return 10.0 * std::log10(peak * peak / m);
}

template <Real T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0) {
  if (!(peak > 0)) throw std::invalid_argument("psnr: peak must be positive");
  return psnr_from_mse(mse(a, b), peak);
}

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

namespace detail {
inline std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  const double c = (kSsimWindow - 1) / 2.0;
  double sum = 0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double x = static_cast<double>(i) - c;
    g[i] = std::exp(-x * x / (2 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Separable valid-mode filtering of one plane with the Gaussian window.
inline std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w) {
  static const auto g = gaussian_window();
  const std::size_t ow = w - kSsimWindow + 1;
  const std::size_t oh = h - kSsimWindow + 1;
  std::vector<double> tmp(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * src[y * w + x + k];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::size_t k = 0; k < kSsimWindow; ++k) acc += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}
}  // namespace detail

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03) over
/// valid windows, averaged per channel and then over channels and batch.
template <Real T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0) {
  detail::check_same_shape(a, b, "ssim");
  const Shape& s = a.shape();
  if (s.h < kSsimWindow || s.w < kSsimWindow) {
    throw ShapeError("ssim: image " + s.str() + " smaller than the 11x11 window");
  }
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t hw = s.plane();
  double total = 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      std::vector<double> pa(hw), pb(hw), aa(hw), bb(hw), ab(hw);
      const T* xa = a.plane(n, c);
      const T* xb = b.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        pa[i] = xa[i];
        pb[i] = xb[i];
        aa[i] = pa[i] * pa[i];
        bb[i] = pb[i] * pb[i];
        ab[i] = pa[i] * pb[i];
      }
      const auto mu_a = detail::filter_valid(pa, s.h, s.w);
      const auto mu_b = detail::filter_valid(pb, s.h, s.w);
      const auto e_aa = detail::filter_valid(aa, s.h, s.w);
      const auto e_bb = detail::filter_valid(bb, s.h, s.w);
      const auto e_ab = detail::filter_valid(ab, s.h, s.w);
      double plane_sum = 0;
      for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i];
        const double mb = mu_b[i];
        const double va = e_aa[i] - ma * ma;
        const double vb = e_bb[i] - mb * mb;
        const double cov = e_ab[i] - ma * mb;
        const double num = (ma * mb + ma * mb + c1) * (cov + cov + c2);
        const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        plane_sum += num / den;
      }
      total += plane_sum / static_cast<double>(mu_a.size());
    }
  return total / static_cast<double>(s.n * s.c);
}

template <Real T>
MetricReport evaluate(const Tensor<T>& pred, const Tensor<T>& target, double peak = 1.0) {
  MetricReport r;
  r.peak = peak;
  r.mse = mse(pred, target);
  r.psnr = psnr_from_mse(r.mse, peak);
  r.ssim = ssim(pred, target, peak);
  return r;
}

// ---------------------------------------------------------------------------
// Losses. Each returns the loss value and fills `grad` with d loss / d pred.
// ---------------------------------------------------------------------------

enum class LossKind { mse, psnr };

inline std::string to_string(LossKind k) { return k == LossKind::mse ? "mse" : "psnr_loss"; }

inline LossKind loss_from_string(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "psnr" || s == "psnr_loss") return LossKind::psnr;
  throw std::invalid_argument("unknown loss '" + s + "'");
}

/// Mean squared error over all elements.
template <Real T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr) {
  detail::check_same_shape(pred, target, "mse_loss");
  const double m = mse(pred, target);
  if (grad) {
    *grad = Tensor<T>(pred.shape());
    const T scale = T(2) / static_cast<T>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) (*grad)[i] = scale * (pred[i] - target[i]);
  }
  return m;
}

/// Negative PSNR (peak 1) averaged over the batch: mean_n 10*log10(mse_n + 1e-12).
/// Equal images give -kPsnrCapDb.
template <Real T>
double psnr_loss(const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr) {
  detail::check_same_shape(pred, target, "psnr_loss");
  const Shape& s = pred.shape();
  const std::size_t per = s.c * s.plane();
  const double k = 10.0 / std::log(10.0);
  if (grad) *grad = Tensor<T>(s);
  double loss = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* p = pred.plane(n, 0);
    const T* t = target.plane(n, 0);
    double acc = 0;
    for (std::size_t i = 0; i < per; ++i) {
      const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
      acc += d * d;
    }
    const double m = acc / static_cast<double>(per) + kMseFloor;
    loss += 10.0 * std::log10(m);
    if (grad) {
      // d/dp [k * ln(m)] / N = k / m * 2 (p - t) / per / N
      const double scale = k / m * 2.0 / static_cast<double>(per) / static_cast<double>(s.n);
      T* g = grad->plane(n, 0);
      for (std::size_t i = 0; i < per; ++i) g[i] = static_cast<T>(scale * (static_cast<double>(p[i]) - t[i]));
    }
  }
  return loss / static_cast<double>(s.n);
}

template <Real T>
double compute_loss(LossKind kind, const Tensor<T>& pred, const Tensor<T>& target, Tensor<T>* grad = nullptr) {
  return kind == LossKind::mse ? mse_loss(pred, target, grad) : psnr_loss(pred, target, grad);
}

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"psnr", r.psnr}, {"ssim", r.ssim}, {"mse", r.mse}, {"peak", r.peak}};
}

}  // namespace jd3

#endif  // JD3_METRICS_HPP_
