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

// Dense NCHW kernels used by the network: convolution, sub-pixel shuffles,
// channel LayerNorm, SimpleGate and the pooling/scaling pair behind simple
// channel attention. Every forward op has a hand-written backward.

#ifndef JD3_OPS_HPP_
#define JD3_OPS_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "jd3/parallel.hpp"
#include "jd3/tensor.hpp"

namespace jd3 {

struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t groups = 1;
  std::size_t padding = 0;

  bool depthwise() const { return groups > 1 && groups == in_channels && groups == out_channels; }
  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
  Shape weight_shape() const { return {out_channels, in_per_group(), kernel, kernel}; }
  std::size_t weight_count() const { return out_channels * in_per_group() * kernel * kernel; }

  std::size_t out_extent(std::size_t in) const {
    return (in + 2 * padding - kernel) / stride + 1;
  }

  void validate() const {
    if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 || groups == 0) {
      throw ShapeError("conv spec fields must be positive");
    }
    if (in_channels % groups != 0 || out_channels % groups != 0) {
      throw ShapeError("conv channels " + std::to_string(in_channels) + "->" +
                       std::to_string(out_channels) + " not divisible by groups " +
                       std::to_string(groups));
    }
  }

  bool operator==(const ConvSpec&) const = default;
};

/// Global multiply-accumulate / bias-add counters fed by conv2d. The network
/// cost model is checked against these.
struct OpCounter {
  std::atomic<std::uint64_t> macs{0};
  std::atomic<std::uint64_t> bias_adds{0};

  void reset() {
    macs = 0;
    bias_adds = 0;
  }
};

inline OpCounter& op_counter() {
  static OpCounter counter;
  return counter;
}

namespace detail {

// Output indices o with 0 <= o*stride - pad + k < extent, as [lo, hi).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t out_extent, std::size_t in_extent,
                                                       std::size_t stride, std::size_t pad,
                                                       std::size_t k) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto off = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(pad);
  // o*s + off >= 0  ->  o >= ceil(-off / s)
  std::ptrdiff_t lo = 0;
  if (off < 0) lo = (-off + s - 1) / s;
  // o*s + off <= in-1  ->  o <= floor((in-1-off)/s)
  const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(in_extent) - 1 - off;
  std::ptrdiff_t hi = top < 0 ? 0 : top / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// Dot product with eight independent partial sums so the loop vectorizes.
template <Real T>
T dot_lanes(const T* a, const T* b, std::size_t n) {
  T lane[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t j = 0; j < 8; ++j) lane[j] += a[i + j] * b[i + j];
  T acc = 0;
  for (; i < n; ++i) acc += a[i] * b[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7])) + acc;
}

template <Real T>
void check_conv_args(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                     const ConvSpec& spec) {
  spec.validate();
  const Shape& in = input.shape();
  if (in.c != spec.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(in.c) + " channels, spec expects " +
                     std::to_string(spec.in_channels));
  }
  if (weight.shape() != spec.weight_shape()) {
    throw ShapeError("conv2d: weight shape " + weight.shape().str() + " != expected " +
                     spec.weight_shape().str());
  }
  if (!bias.empty() && bias.size() != spec.out_channels) {
    throw ShapeError("conv2d: bias length mismatch");
  }
  if (in.h + 2 * spec.padding < spec.kernel || in.w + 2 * spec.padding < spec.kernel) {
    throw ShapeError("conv2d: padded input " + in.str() + " smaller than kernel");
  }
}

}  // namespace detail

/// Grouped 2-D cross-correlation with symmetric zero padding. An empty `bias`
/// span means no bias.
template <Real T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                 const ConvSpec& spec) {
  detail::check_conv_args(input, weight, bias, spec);
  const Shape& in = input.shape();
  const std::size_t oh = spec.out_extent(in.h);
  const std::size_t ow = spec.out_extent(in.w);
  Tensor<T> out(Shape{in.n, spec.out_channels, oh, ow});
  const std::size_t cig = spec.in_per_group();
  const std::size_t cog = spec.out_per_group();
  const std::size_t k = spec.kernel;
  const std::size_t s = spec.stride;
  const bool pointwise = k == 1 && s == 1 && spec.padding == 0;

  parallel_for(in.n * spec.out_channels, [&](std::size_t item) {
    const std::size_t b = item / spec.out_channels;
    const std::size_t oc = item % spec.out_channels;
    const std::size_t ic0 = (oc / cog) * cig;
    T* o = out.plane(b, oc);
    const T bv = bias.empty() ? T(0) : bias[oc];
    std::fill(o, o + oh * ow, bv);
    if (pointwise) {
      for (std::size_t icl = 0; icl < cig; ++icl) {
        const T* src = input.plane(b, ic0 + icl);
        const T wv = weight(oc, icl, 0, 0);
        for (std::size_t i = 0; i < oh * ow; ++i) o[i] += wv * src[i];
      }
      return;
    }
    for (std::size_t icl = 0; icl < cig; ++icl) {
      const T* src = input.plane(b, ic0 + icl);
      const T* wk = weight.plane(oc, icl);
      for (std::size_t ky = 0; ky < k; ++ky) {
        const auto [y0, y1] = detail::valid_range(oh, in.h, s, spec.padding, ky);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const auto [x0, x1] = detail::valid_range(ow, in.w, s, spec.padding, kx);
          const T wv = wk[ky * k + kx];
          for (std::size_t oy = y0; oy < y1; ++oy) {
            const std::size_t iy = oy * s + ky - spec.padding;
            const T* row = src + iy * in.w;
            T* orow = o + oy * ow;
            if (s == 1) {
              const T* shifted = row + (x0 + kx - spec.padding);
              for (std::size_t ox = x0; ox < x1; ++ox) orow[ox] += wv * shifted[ox - x0];
            } else {
              for (std::size_t ox = x0; ox < x1; ++ox) orow[ox] += wv * row[ox * s + kx - spec.padding];
            }
          }
        }
      }
    }
  });

  const std::uint64_t out_elems = out.size();
  op_counter().macs += out_elems * cig * k * k;
  if (!bias.empty()) op_counter().bias_adds += out_elems;
  ensure_finite(out, "conv2d");
  return out;
}

template <Real T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  std::vector<T> bias;
};

/// Gradients of sum(grad_out * conv2d(input, weight, bias)).
template <Real T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                             const Tensor<T>& weight, const ConvSpec& spec) {
  detail::check_conv_args(input, weight, std::span<const T>{}, spec);
  const Shape& in = input.shape();
  const std::size_t oh = spec.out_extent(in.h);
  const std::size_t ow = spec.out_extent(in.w);
  if (grad_out.shape() != Shape{in.n, spec.out_channels, oh, ow}) {
    throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape().str() +
                     " inconsistent with forward output");
  }
  const std::size_t cig = spec.in_per_group();
  const std::size_t cog = spec.out_per_group();
  const std::size_t k = spec.kernel;
  const std::size_t s = spec.stride;
  const std::size_t p = spec.padding;
  const bool pointwise = k == 1 && s == 1 && p == 0;

  ConvGrads<T> g{Tensor<T>(in), Tensor<T>(weight.shape()), std::vector<T>(spec.out_channels, T(0))};

  // Bias and weight gradients: one output channel per work item.
  parallel_for(spec.out_channels, [&](std::size_t oc) {
    const std::size_t ic0 = (oc / cog) * cig;
    T bsum = 0;
    for (std::size_t b = 0; b < in.n; ++b) {
      const T* go = grad_out.plane(b, oc);
      for (std::size_t i = 0; i < oh * ow; ++i) bsum += go[i];
    }
    g.bias[oc] = bsum;
    T* gw = g.weight.plane(oc, 0);
    if (pointwise) {
      for (std::size_t icl = 0; icl < cig; ++icl) {
        T acc = 0;
        for (std::size_t b = 0; b < in.n; ++b) {
          const T* src = input.plane(b, ic0 + icl);
          const T* go = grad_out.plane(b, oc);
          acc += detail::dot_lanes(go, src, oh * ow);
        }
        gw[icl] = acc;
      }
      return;
    }
    for (std::size_t icl = 0; icl < cig; ++icl) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        const auto [y0, y1] = detail::valid_range(oh, in.h, s, p, ky);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const auto [x0, x1] = detail::valid_range(ow, in.w, s, p, kx);
          T acc = 0;
          for (std::size_t b = 0; b < in.n; ++b) {
            const T* src = input.plane(b, ic0 + icl);
            const T* go = grad_out.plane(b, oc);
            for (std::size_t oy = y0; oy < y1; ++oy) {
              const T* row = src + (oy * s + ky - p) * in.w;
              const T* grow = go + oy * ow;
              for (std::size_t ox = x0; ox < x1; ++ox) acc += grow[ox] * row[ox * s + kx - p];
            }
          }
          gw[(icl * k + ky) * k + kx] = acc;
        }
      }
    }
  });

  // Input gradient: one (batch, input channel) plane per work item.
  parallel_for(in.n * spec.in_channels, [&](std::size_t item) {
    const std::size_t b = item / spec.in_channels;
    const std::size_t ic = item % spec.in_channels;
    const std::size_t grp = ic / cig;
    const std::size_t icl = ic % cig;
    T* gi = g.input.plane(b, ic);
    for (std::size_t ocl = 0; ocl < cog; ++ocl) {
      const std::size_t oc = grp * cog + ocl;
      const T* go = grad_out.plane(b, oc);
      const T* wk = weight.plane(oc, icl);
      if (pointwise) {
        const T wv = wk[0];
        for (std::size_t i = 0; i < oh * ow; ++i) gi[i] += wv * go[i];
        continue;
      }
      for (std::size_t ky = 0; ky < k; ++ky) {
        const auto [y0, y1] = detail::valid_range(oh, in.h, s, p, ky);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const auto [x0, x1] = detail::valid_range(ow, in.w, s, p, kx);
          const T wv = wk[ky * k + kx];
          for (std::size_t oy = y0; oy < y1; ++oy) {
            T* row = gi + (oy * s + ky - p) * in.w;
            const T* grow = go + oy * ow;
            for (std::size_t ox = x0; ox < x1; ++ox) row[ox * s + kx - p] += wv * grow[ox];
          }
        }
      }
    }
  });

  ensure_finite(g.input, "conv2d_backward");
  ensure_finite(g.weight, "conv2d_backward");
  return g;
}

/// Depth-to-space: out(n, c, h*r+i, w*r+j) = in(n, c*r*r + i*r + j, h, w).
template <Real T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r) {
  const Shape& in = input.shape();
  if (r == 0 || in.c % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(in.c) + " not divisible by r^2");
  }
  const std::size_t oc = in.c / (r * r);
  Tensor<T> out(Shape{in.n, oc, in.h * r, in.w * r});
  for (std::size_t b = 0; b < in.n; ++b)
    for (std::size_t c = 0; c < oc; ++c)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          const T* src = input.plane(b, c * r * r + i * r + j);
          for (std::size_t y = 0; y < in.h; ++y)
            for (std::size_t x = 0; x < in.w; ++x) out(b, c, y * r + i, x * r + j) = src[y * in.w + x];
        }
  return out;
}

/// Space-to-depth, the exact inverse of pixel_shuffle.
template <Real T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r) {
  const Shape& in = input.shape();
  if (r == 0 || in.h % r != 0 || in.w % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial extents " + in.str() + " not divisible by " +
                     std::to_string(r));
  }
  const std::size_t oh = in.h / r;
  const std::size_t ow = in.w / r;
  Tensor<T> out(Shape{in.n, in.c * r * r, oh, ow});
  for (std::size_t b = 0; b < in.n; ++b)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j) {
          T* dst = out.plane(b, c * r * r + i * r + j);
          for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x) dst[y * ow + x] = input(b, c, y * r + i, x * r + j);
        }
  return out;
}

inline constexpr double kLayerNormEps = 1e-6;

namespace detail {
template <Real T>
void check_affine(const Tensor<T>& input, std::span<const T> gamma, std::span<const T> beta) {
  if (gamma.size() != input.shape().c || beta.size() != input.shape().c) {
    throw ShapeError("layer_norm_channels: gamma/beta length must equal channel count " +
                     std::to_string(input.shape().c));
  }
}
}  // namespace detail

/// Normalizes each pixel across channels (biased variance), then applies a
/// per-channel affine transform.
template <Real T>
Tensor<T> layer_norm_channels(const Tensor<T>& input, std::span<const T> gamma,
                              std::span<const T> beta, T eps = T(kLayerNormEps)) {
  detail::check_affine(input, gamma, beta);
  const Shape& s = input.shape();
  const std::size_t hw = s.plane();
  Tensor<T> out(s);
  for (std::size_t b = 0; b < s.n; ++b) {
    const T* x = input.plane(b, 0);
    T* y = out.plane(b, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      T mean = 0;
      for (std::size_t c = 0; c < s.c; ++c) mean += x[c * hw + p];
      mean /= static_cast<T>(s.c);
      T var = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const T d = x[c * hw + p] - mean;
        var += d * d;
      }
      var /= static_cast<T>(s.c);
      const T inv = T(1) / std::sqrt(var + eps);
      for (std::size_t c = 0; c < s.c; ++c) {
        y[c * hw + p] = gamma[c] * (x[c * hw + p] - mean) * inv + beta[c];
      }
    }
  }
  ensure_finite(out, "layer_norm_channels");
  return out;
}

template <Real T>
struct AffineNormGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <Real T>
AffineNormGrads<T> layer_norm_channels_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                                std::span<const T> gamma, T eps = T(kLayerNormEps)) {
  const Shape& s = input.shape();
  if (grad_out.shape() != s) throw ShapeError("layer_norm_channels_backward: shape mismatch");
  if (gamma.size() != s.c) throw ShapeError("layer_norm_channels_backward: gamma length");
  const std::size_t hw = s.plane();
  AffineNormGrads<T> g{Tensor<T>(s), std::vector<T>(s.c, T(0)), std::vector<T>(s.c, T(0))};
  std::vector<T> xhat(s.c);
  std::vector<T> gh(s.c);
  const T inv_c = T(1) / static_cast<T>(s.c);
  for (std::size_t b = 0; b < s.n; ++b) {
    const T* x = input.plane(b, 0);
    const T* dy = grad_out.plane(b, 0);
    T* dx = g.input.plane(b, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      T mean = 0;
      for (std::size_t c = 0; c < s.c; ++c) mean += x[c * hw + p];
      mean *= inv_c;
      T var = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        const T d = x[c * hw + p] - mean;
        var += d * d;
      }
      var *= inv_c;
      const T inv = T(1) / std::sqrt(var + eps);
      T sum_g = 0;
      T sum_gx = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        xhat[c] = (x[c * hw + p] - mean) * inv;
        const T d = dy[c * hw + p];
        g.beta[c] += d;
        g.gamma[c] += d * xhat[c];
        gh[c] = d * gamma[c];
        sum_g += gh[c];
        sum_gx += gh[c] * xhat[c];
      }
      for (std::size_t c = 0; c < s.c; ++c) {
        dx[c * hw + p] = inv * (gh[c] - inv_c * sum_g - xhat[c] * inv_c * sum_gx);
      }
    }
  }
  ensure_finite(g.input, "layer_norm_channels_backward");
  return g;
}

/// Splits channels into halves (a, b) and returns a * b.
template <Real T>
Tensor<T> simple_gate(const Tensor<T>& input) {
  const Shape& s = input.shape();
  if (s.c % 2 != 0) throw ShapeError("simple_gate: odd channel count " + std::to_string(s.c));
  const std::size_t half = s.c / 2;
  const std::size_t hw = s.plane();
  Tensor<T> out(Shape{s.n, half, s.h, s.w});
  for (std::size_t b = 0; b < s.n; ++b) {
    const T* a = input.plane(b, 0);
    const T* g = input.plane(b, half);
    T* o = out.plane(b, 0);
    for (std::size_t i = 0; i < half * hw; ++i) o[i] = a[i] * g[i];
  }
  ensure_finite(out, "simple_gate");
  return out;
}

template <Real T>
Tensor<T> simple_gate_backward(const Tensor<T>& grad_out, const Tensor<T>& input) {
  const Shape& s = input.shape();
  if (s.c % 2 != 0 || grad_out.shape() != Shape{s.n, s.c / 2, s.h, s.w}) {
    throw ShapeError("simple_gate_backward: shape mismatch");
  }
  const std::size_t half = s.c / 2;
  const std::size_t hw = s.plane();
  Tensor<T> gi(s);
  for (std::size_t b = 0; b < s.n; ++b) {
    const T* a = input.plane(b, 0);
    const T* g = input.plane(b, half);
    const T* dy = grad_out.plane(b, 0);
    T* da = gi.plane(b, 0);
    T* dg = gi.plane(b, half);
    for (std::size_t i = 0; i < half * hw; ++i) {
      da[i] = dy[i] * g[i];
      dg[i] = dy[i] * a[i];
    }
  }
  ensure_finite(gi, "simple_gate_backward");
  return gi;
}

/// Spatial mean per (n, c), shape (n, c, 1, 1).
template <Real T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  const Shape& s = input.shape();
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  const std::size_t hw = s.plane();
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* x = input.plane(b, c);
      T acc = 0;
      for (std::size_t i = 0; i < hw; ++i) acc += x[i];
      out(b, c, 0, 0) = acc / static_cast<T>(hw);
    }
  return out;
}

template <Real T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
  const Shape& s = input_shape;
  if (grad_out.shape() != Shape{s.n, s.c, 1, 1}) throw ShapeError("global_avg_pool_backward");
  Tensor<T> gi(s);
  const std::size_t hw = s.plane();
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T v = grad_out(b, c, 0, 0) / static_cast<T>(hw);
      std::fill(gi.plane(b, c), gi.plane(b, c) + hw, v);
    }
  return gi;
}

/// x * scale with scale of shape (n, c, 1, 1) broadcast over space.
template <Real T>
Tensor<T> channel_scale(const Tensor<T>& input, const Tensor<T>& scale) {
  const Shape& s = input.shape();
  if (scale.shape() != Shape{s.n, s.c, 1, 1}) throw ShapeError("channel_scale: scale shape");
  Tensor<T> out(s);
  const std::size_t hw = s.plane();
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T a = scale(b, c, 0, 0);
      const T* x = input.plane(b, c);
      T* o = out.plane(b, c);
      for (std::size_t i = 0; i < hw; ++i) o[i] = x[i] * a;
    }
  ensure_finite(out, "channel_scale");
  return out;
}

/// Returns (grad_input, grad_scale).
template <Real T>
std::pair<Tensor<T>, Tensor<T>> channel_scale_backward(const Tensor<T>& grad_out,
                                                       const Tensor<T>& input,
                                                       const Tensor<T>& scale) {
  const Shape& s = input.shape();
  if (grad_out.shape() != s || scale.shape() != Shape{s.n, s.c, 1, 1}) {
    throw ShapeError("channel_scale_backward: shape mismatch");
  }
  Tensor<T> gi(s);
  Tensor<T> gs(scale.shape());
  const std::size_t hw = s.plane();
  for (std::size_t b = 0; b < s.n; ++b)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T a = scale(b, c, 0, 0);
      const T* x = input.plane(b, c);
      const T* dy = grad_out.plane(b, c);
      T* dx = gi.plane(b, c);
      T acc = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        dx[i] = dy[i] * a;
        acc += dy[i] * x[i];
      }
      gs(b, c, 0, 0) = acc;
    }
  return {std::move(gi), std::move(gs)};
}

/// x + alpha * y.
template <Real T>
Tensor<T> add_scaled(const Tensor<T>& x, const Tensor<T>& y, T alpha) {
  if (x.shape() != y.shape()) throw ShapeError("add_scaled: shape mismatch");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + alpha * y[i];
  ensure_finite(out, "add_scaled");
  return out;
}

template <Real T>
T dot(const Tensor<T>& x, const Tensor<T>& y) {
  if (x.shape() != y.shape()) throw ShapeError("dot: shape mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

/// Stacks single images (or batches) along the batch axis.
template <Real T>
Tensor<T> concat_batch(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw ShapeError("concat_batch: no inputs");
  Shape s = parts.front()->shape();
  std::size_t n = 0;
  for (const auto* p : parts) {
    const Shape& ps = p->shape();
    if (ps.c != s.c || ps.h != s.h || ps.w != s.w) throw ShapeError("concat_batch: shape mismatch");
    n += ps.n;
  }
  std::vector<T> data;
  data.reserve(n * s.c * s.h * s.w);
  for (const auto* p : parts) data.insert(data.end(), p->data().begin(), p->data().end());
  s.n = n;
  return Tensor<T>(s, std::move(data));
}

/// Concatenates along the channel axis (same n, h, w).
template <Real T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) throw ShapeError("concat_channels: shape mismatch");
  Tensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t hw = sa.plane();
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy(a.plane(n, 0), a.plane(n, 0) + sa.c * hw, out.plane(n, 0));
    std::copy(b.plane(n, 0), b.plane(n, 0) + sb.c * hw, out.plane(n, sa.c));
  }
  return out;
}

/// Batch item `i` as its own (1, c, h, w) tensor.
template <Real T>
Tensor<T> batch_item(const Tensor<T>& t, std::size_t i) {
  const Shape& s = t.shape();
  if (i >= s.n) throw ShapeError("batch_item: index out of range");
  const std::size_t len = s.c * s.plane();
  std::vector<T> data(t.data().begin() + static_cast<std::ptrdiff_t>(i * len),
                      t.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * len));
  return Tensor<T>(Shape{1, s.c, s.h, s.w}, std::move(data));
}

}  // namespace jd3

#endif  // JD3_OPS_HPP_
