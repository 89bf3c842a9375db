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

#ifndef JD3_NETWORK_HPP_
#define JD3_NETWORK_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/arch.hpp"
#include "jd3/ops.hpp"
#include "jd3/tensor.hpp"

namespace jd3 {

template <Real T>
struct ConvParams {
  ConvSpec spec;
  Tensor<T> weight;
  Tensor<T> bias;  // (c_out, 1, 1, 1)
};

template <Real T>
struct NormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
};

/// Simplified NAF block: LayerNorm -> 1x1 expand -> 3x3 depthwise -> gate
/// -> 1x1 project, then LayerNorm -> 1x1 expand -> gate -> 1x1 project, each
/// branch added back through a learnable scalar.
template <Real T>
struct BlockParams {
  NormParams<T> norm1;
  ConvParams<T> conv1;
  ConvParams<T> dconv;
  ConvParams<T> conv3;
  NormParams<T> norm2;
  ConvParams<T> conv4;
  ConvParams<T> conv5;
  std::optional<ConvParams<T>> sca;  // ablation only
  Tensor<T> gamma1;                  // (1, 1, 1, 1)
  Tensor<T> gamma2;
};

template <Real T>
struct JD3NetParams {
  ArchConfig config;
  bool with_sca = false;
  std::uint64_t seed = 0;
  ConvParams<T> stem;
  std::vector<BlockParams<T>> blocks;
  ConvParams<T> tail;
};

// Parameter traversal in checkpoint order. `fn(name, tensor)`.
template <typename Params, typename Fn>
void visit_parameters(Params& p, Fn&& fn) {
  auto conv = [&](const std::string& name, auto& c) {
    fn(name + ".weight", c.weight);
    fn(name + ".bias", c.bias);
  };
  auto norm = [&](const std::string& name, auto& n) {
    fn(name + ".gamma", n.gamma);
    fn(name + ".beta", n.beta);
  };
  conv("stem", p.stem);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "block." + std::to_string(i) + ".";
    norm(pre + "norm1", b.norm1);
    conv(pre + "conv1", b.conv1);
    conv(pre + "dconv", b.dconv);
    if (b.sca) conv(pre + "sca", *b.sca);
    conv(pre + "conv3", b.conv3);
    fn(pre + "gamma1", b.gamma1);
    norm(pre + "norm2", b.norm2);
    conv(pre + "conv4", b.conv4);
    conv(pre + "conv5", b.conv5);
    fn(pre + "gamma2", b.gamma2);
  }
  conv("tail", p.tail);
}

template <Real T>
std::uint64_t parameter_count(const JD3NetParams<T>& p) {
  std::uint64_t n = 0;
  visit_parameters(p, [&](const std::string&, const Tensor<T>& t) { n += t.size(); });
  return n;
}

namespace detail {

template <Real T>
ConvParams<T> init_conv(const ConvSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec.in_per_group() * spec.kernel * spec.kernel));
  ConvParams<T> c{spec, random_uniform<T>(spec.weight_shape(), rng, T(-bound), T(bound)),
                  vector_tensor<T>(spec.out_channels)};
  return c;
}

template <Real T>
NormParams<T> init_norm(std::size_t channels) {
  return {vector_tensor<T>(channels, T(1)), vector_tensor<T>(channels, T(0))};
}

template <Real T>
Tensor<T> apply(const ConvParams<T>& c, const Tensor<T>& x) {
  return conv2d(x, c.weight, c.bias.data(), c.spec);
}

template <Real T>
Tensor<T> apply(const NormParams<T>& n, const Tensor<T>& x) {
  return layer_norm_channels(x, n.gamma.data(), n.beta.data());
}

}  // namespace detail

/// Deterministic parameters for `seed`: fan-in scaled uniform conv weights,
/// zero biases, unit/zero LayerNorm affine, zero residual scales (every
/// block starts as the identity).
template <Real T>
JD3NetParams<T> build(const ArchConfig& config, std::uint64_t seed, bool with_sca = false) {
  config.validate();
  std::mt19937_64 rng(seed);
  JD3NetParams<T> p;
  p.config = config;
  p.with_sca = with_sca;
  p.seed = seed;
  p.stem = detail::init_conv<T>(stem_spec(config), rng);
  const auto bl = block_layer_list(config);
  p.blocks.reserve(config.blocks);
  for (std::size_t i = 0; i < config.blocks; ++i) {
    BlockParams<T> b;
    b.norm1 = detail::init_norm<T>(config.w);
    b.conv1 = detail::init_conv<T>(bl[0], rng);
    b.dconv = detail::init_conv<T>(bl[1], rng);
    if (with_sca) b.sca = detail::init_conv<T>(sca_spec(config), rng);
    b.conv3 = detail::init_conv<T>(bl[2], rng);
    b.norm2 = detail::init_norm<T>(config.w);
    b.conv4 = detail::init_conv<T>(bl[3], rng);
    b.conv5 = detail::init_conv<T>(bl[4], rng);
    b.gamma1 = vector_tensor<T>(1);
    b.gamma2 = vector_tensor<T>(1);
    p.blocks.push_back(std::move(b));
  }
  p.tail = detail::init_conv<T>(tail_spec(config), rng);
  return p;
}

/// Same structure as `p` with every tensor zeroed; used for gradients.
template <Real T>
JD3NetParams<T> zeros_like(const JD3NetParams<T>& p) {
  JD3NetParams<T> z = p;
  visit_parameters(z, [](const std::string&, Tensor<T>& t) { std::fill(t.data().begin(), t.data().end(), T(0)); });
  return z;
}

template <Real T>
struct BlockCache {
  Tensor<T> x, n1, c1, dc, g1, pooled, att, gs, c3, y, n2, c4, g2, c5;
};

template <Real T>
struct ForwardCache {
  Tensor<T> input;
  Tensor<T> stem_out;
  std::vector<BlockCache<T>> blocks;
  Tensor<T> trunk_out;
};

namespace detail {

template <Real T>
void check_input(const JD3NetParams<T>& p, const Tensor<T>& input) {
  const Shape& s = input.shape();
  if (s.c != p.config.c_in) {
    throw ShapeError("forward: input has " + std::to_string(s.c) + " channels, network expects " +
                     std::to_string(p.config.c_in));
  }
  if (s.h % p.config.d != 0 || s.w % p.config.d != 0) {
    throw ShapeError("forward: spatial extents " + s.str() + " not divisible by d=" +
                     std::to_string(p.config.d) + " (pad first)");
  }
}

template <Real T>
Tensor<T> block_forward(const BlockParams<T>& b, const Tensor<T>& x, BlockCache<T>* cache) {
  Tensor<T> n1 = apply(b.norm1, x);
  Tensor<T> c1 = apply(b.conv1, n1);
  Tensor<T> dc = apply(b.dconv, c1);
  Tensor<T> g1 = simple_gate(dc);
  Tensor<T> pooled, att, gs;
  const Tensor<T>* to_conv3 = &g1;
  if (b.sca) {
    pooled = global_avg_pool(g1);
    att = apply(*b.sca, pooled);
    gs = channel_scale(g1, att);
    to_conv3 = &gs;
  }
  Tensor<T> c3 = apply(b.conv3, *to_conv3);
  Tensor<T> y = add_scaled(x, c3, b.gamma1[0]);
  Tensor<T> n2 = apply(b.norm2, y);
  Tensor<T> c4 = apply(b.conv4, n2);
  Tensor<T> g2 = simple_gate(c4);
  Tensor<T> c5 = apply(b.conv5, g2);
  Tensor<T> z = add_scaled(y, c5, b.gamma2[0]);
  if (cache) {
    *cache = BlockCache<T>{x,  std::move(n1), std::move(c1), std::move(dc), std::move(g1),
                           std::move(pooled), std::move(att), std::move(gs), std::move(c3),
                           std::move(y), std::move(n2), std::move(c4), std::move(g2), std::move(c5)};
  }
  return z;
}

template <Real T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <Real T>
void store_conv_grads(ConvParams<T>& g, const ConvGrads<T>& cg) {
  accumulate(g.weight, cg.weight);
  for (std::size_t i = 0; i < cg.bias.size(); ++i) g.bias[i] += cg.bias[i];
}

template <Real T>
Tensor<T> conv_back(const ConvParams<T>& c, ConvParams<T>& g, const Tensor<T>& grad_out,
                    const Tensor<T>& input) {
  ConvGrads<T> cg = conv2d_backward(grad_out, input, c.weight, c.spec);
  store_conv_grads(g, cg);
  return std::move(cg.input);
}

template <Real T>
Tensor<T> norm_back(const NormParams<T>& n, NormParams<T>& g, const Tensor<T>& grad_out,
                    const Tensor<T>& input) {
  auto ng = layer_norm_channels_backward(grad_out, input, n.gamma.data());
  for (std::size_t i = 0; i < ng.gamma.size(); ++i) {
    g.gamma[i] += ng.gamma[i];
    g.beta[i] += ng.beta[i];
  }
  return std::move(ng.input);
}

template <Real T>
Tensor<T> block_backward(const BlockParams<T>& b, BlockParams<T>& g, const BlockCache<T>& c,
                         const Tensor<T>& dz) {
  // z = y + gamma2 * c5
  g.gamma2[0] += dot(dz, c.c5);
  Tensor<T> dc5 = add_scaled(Tensor<T>(dz.shape()), dz, b.gamma2[0]);
  Tensor<T> dg2 = conv_back(b.conv5, g.conv5, dc5, c.g2);
  Tensor<T> dc4 = simple_gate_backward(dg2, c.c4);
  Tensor<T> dn2 = conv_back(b.conv4, g.conv4, dc4, c.n2);
  Tensor<T> dy = norm_back(b.norm2, g.norm2, dn2, c.y);
  accumulate(dy, dz);

  // y = x + gamma1 * c3
  g.gamma1[0] += dot(dy, c.c3);
  Tensor<T> dc3 = add_scaled(Tensor<T>(dy.shape()), dy, b.gamma1[0]);
  Tensor<T> dg1;
  if (b.sca) {
    Tensor<T> dgs = conv_back(b.conv3, g.conv3, dc3, c.gs);
    auto [dg1_direct, datt] = channel_scale_backward(dgs, c.g1, c.att);
    Tensor<T> dpooled = conv_back(*b.sca, *g.sca, datt, c.pooled);
    dg1 = std::move(dg1_direct);
    accumulate(dg1, global_avg_pool_backward(dpooled, c.g1.shape()));
  } else {
    dg1 = conv_back(b.conv3, g.conv3, dc3, c.g1);
  }
  Tensor<T> ddc = simple_gate_backward(dg1, c.dc);
  Tensor<T> dc1 = conv_back(b.dconv, g.dconv, ddc, c.c1);
  Tensor<T> dn1 = conv_back(b.conv1, g.conv1, dc1, c.n1);
  Tensor<T> dx = norm_back(b.norm1, g.norm1, dn1, c.x);
  accumulate(dx, dy);
  return dx;
}

}  // namespace detail

/// Runs the network. Input extents must be multiples of d; output has c_out
/// channels at the input resolution. Pass `cache` to keep activations for
/// backward().
template <Real T>
Tensor<T> forward(const JD3NetParams<T>& p, const Tensor<T>& input, ForwardCache<T>* cache = nullptr) {
  detail::check_input(p, input);
  Tensor<T> x = detail::apply(p.stem, input);
  if (cache) {
    cache->input = input;
    cache->stem_out = x;
    cache->blocks.assign(p.blocks.size(), BlockCache<T>{});
  }
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    x = detail::block_forward(p.blocks[i], x, cache ? &cache->blocks[i] : nullptr);
  }
  if (cache) cache->trunk_out = x;
  Tensor<T> t = detail::apply(p.tail, x);
  return pixel_shuffle(t, p.config.d);
}

/// Gradients of sum(grad_output * forward(p, input)) with respect to every
/// parameter, in the same structure as `p`.
template <Real T>
JD3NetParams<T> backward(const JD3NetParams<T>& p, const ForwardCache<T>& cache, const Tensor<T>& grad_output,
                         Tensor<T>* grad_input = nullptr) {
  JD3NetParams<T> g = zeros_like(p);
  Tensor<T> dt = pixel_unshuffle(grad_output, p.config.d);
  Tensor<T> dx = detail::conv_back(p.tail, g.tail, dt, cache.trunk_out);
  for (std::size_t i = p.blocks.size(); i-- > 0;) {
    dx = detail::block_backward(p.blocks[i], g.blocks[i], cache.blocks[i], dx);
  }
  Tensor<T> din = detail::conv_back(p.stem, g.stem, dx, cache.input);
  if (grad_input) *grad_input = std::move(din);
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoints: <dir>/manifest.json plus one tensor file per parameter.
// ---------------------------------------------------------------------------

inline std::string checkpoint_blob_name(const std::string& param) { return param + ".tensor"; }

template <Real T>
void save_checkpoint(const std::string& dir, const JD3NetParams<T>& p, std::uint64_t step = 0) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest{{"format", "jd3net-checkpoint"},
                          {"version", 1},
                          {"config", p.config},
                          {"seed", p.seed},
                          {"with_sca", p.with_sca},
                          {"step", step},
                          {"precision", to_string(precision_of<T>())}};
  nlohmann::json names = nlohmann::json::array();
  visit_parameters(p, [&](const std::string& name, const Tensor<T>& t) {
    save_tensor((fs::path(dir) / checkpoint_blob_name(name)).string(), t);
    names.push_back(name);
  });
  manifest["parameters"] = names;
  std::ofstream os(fs::path(dir) / "manifest.json");
  os << manifest.dump(2) << "\n";
}

template <Real T>
JD3NetParams<T> load_checkpoint(const std::string& dir, std::uint64_t* step = nullptr) {
  namespace fs = std::filesystem;
  std::ifstream is(fs::path(dir) / "manifest.json");
  if (!is) throw FormatError("no manifest.json in " + dir);
  const nlohmann::json manifest = nlohmann::json::parse(is);
  if (manifest.value("format", "") != "jd3net-checkpoint") throw FormatError("not a checkpoint manifest");
  JD3NetParams<T> p = build<T>(manifest.at("config").get<ArchConfig>(), manifest.at("seed").get<std::uint64_t>(),
                               manifest.at("with_sca").get<bool>());
  visit_parameters(p, [&](const std::string& name, Tensor<T>& t) {
    Tensor<T> loaded = load_tensor<T>((fs::path(dir) / checkpoint_blob_name(name)).string());
    if (loaded.shape() != t.shape()) throw FormatError("checkpoint tensor " + name + " has wrong shape");
    t = std::move(loaded);
  });
  if (step) *step = manifest.value("step", std::uint64_t{0});
  return p;
}

template <Real U, Real T>
JD3NetParams<U> cast_params(const JD3NetParams<T>& p) {
  JD3NetParams<U> out = build<U>(p.config, p.seed, p.with_sca);
  std::vector<const Tensor<T>*> src;
  visit_parameters(p, [&](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
  std::size_t i = 0;
  visit_parameters(out, [&](const std::string&, Tensor<U>& t) { t = src[i++]->template cast<U>(); });
  return out;
}

}  // namespace jd3

#endif  // JD3_NETWORK_HPP_
