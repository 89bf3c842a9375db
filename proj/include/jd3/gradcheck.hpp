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

#ifndef JD3_GRADCHECK_HPP_
#define JD3_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "jd3/tensor.hpp"

namespace jd3 {

/// Central-difference gradient of a scalar function, one element at a time.
/// Intended for 64-bit tensors.
template <typename F>
Tensor<double> finite_difference_grad(F&& f, const Tensor<double>& x, double eps = 1e-5) {
  if (!(eps > 0)) throw std::invalid_argument("finite_difference_grad: eps must be positive");
  Tensor<double> grad(x.shape());
  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = f(static_cast<const Tensor<double>&>(probe));
    probe[i] = orig - eps;
    const double fm = f(static_cast<const Tensor<double>&>(probe));
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("finite_difference_grad: non-finite function value at element " +
                         std::to_string(i));
    }
    grad[i] = (fp - fm) / (2 * eps);
  }
  return grad;
}

/// Five-point stencil, error O(eps^4); tolerates a larger step, so less
/// round-off than the central difference.
template <typename F>
Tensor<double> finite_difference_grad5(F&& f, const Tensor<double>& x, double eps = 1e-3) {
  if (!(eps > 0)) throw std::invalid_argument("finite_difference_grad5: eps must be positive");
  Tensor<double> grad(x.shape());
  Tensor<double> probe = x;
  auto at = [&](std::size_t i, double v) {
    probe[i] = v;
    const double r = f(static_cast<const Tensor<double>&>(probe));
    if (!std::isfinite(r)) {
      throw NumericError("finite_difference_grad5: non-finite function value at element " + std::to_string(i));
    }
    return r;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    const double f2p = at(i, orig + 2 * eps), f1p = at(i, orig + eps);
    const double f1m = at(i, orig - eps), f2m = at(i, orig - 2 * eps);
    probe[i] = orig;
    grad[i] = (f2m - 8 * f1m + 8 * f1p - f2p) / (12 * eps);
  }
  return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries that
/// are zero in both from dominating.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-6) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

inline double max_relative_error(const Tensor<double>& a, const Tensor<double>& b,
                                 double floor = 1e-6) {
  if (a.shape() != b.shape()) throw ShapeError("max_relative_error: shape mismatch");
  return max_relative_error(a.data(), b.data(), floor);
}

}  // namespace jd3

#endif  // JD3_GRADCHECK_HPP_
