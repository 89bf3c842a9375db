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

// Analytical model of the downsampled isotropic network family:
//
//   d x d stride-d stem conv -> B simplified NAF blocks -> 1x1 tail conv
//   -> d x d pixel shuffle
//
// Cost (MACs, bias adds, FLOPs), parameter count, and the two entropy scores
// used by the architecture search.

#ifndef JD3_ARCH_HPP_
#define JD3_ARCH_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/ops.hpp"

namespace jd3 {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ArchConfig {
  std::size_t d = 1;          // downsampling ratio (stem stride)
  std::size_t w = 4;          // trunk width
  std::size_t blocks = 0;     // B
  std::size_t c_in = 1;       // raw mosaic, +4 when CFA planes are appended
  std::size_t c_out = 3;
  std::size_t expansion = 2;  // e, for both the spatial and FFN branches
  std::size_t k_dw = 3;       // depthwise kernel

  std::size_t expanded() const { return expansion * w; }

  void validate() const {
    if (d < 1) throw ConfigError("d must be >= 1");
    if (w < 4) throw ConfigError("w must be >= 4, got " + std::to_string(w));
    if (c_in < 1 || c_out < 1) throw ConfigError("channel counts must be positive");
    if (expansion < 1 || (expansion * w) % 2 != 0) throw ConfigError("e*w must be even");
    if (k_dw < 1 || k_dw % 2 == 0) throw ConfigError("depthwise kernel must be odd");
  }

  /// Searched configs additionally sit on the grid.
  bool on_grid(std::size_t grid) const { return w % grid == 0 && blocks % grid == 0; }

  std::string str() const {
    return "(d=" + std::to_string(d) + ", w=" + std::to_string(w) + ", B=" + std::to_string(blocks) + ")";
  }

  bool operator==(const ArchConfig&) const = default;
};

/// Position of a layer inside a block, in execution order.
enum class BlockLayer : std::size_t { conv1 = 0, dconv = 1, conv3 = 2, conv4 = 3, conv5 = 4 };
inline constexpr std::size_t kConvsPerBlock = 5;

/// The block's five convolutions, in execution order.
inline std::vector<ConvSpec> block_layer_list(const ArchConfig& cfg) {
  const std::size_t ew = cfg.expanded();
  return {
      ConvSpec{cfg.w, ew, 1, 1, 1, 0},                       // conv1
      ConvSpec{ew, ew, cfg.k_dw, 1, ew, cfg.k_dw / 2},       // dconv (depthwise)
      ConvSpec{ew / 2, cfg.w, 1, 1, 1, 0},                   // conv3
      ConvSpec{cfg.w, ew, 1, 1, 1, 0},                       // conv4
      ConvSpec{ew / 2, cfg.w, 1, 1, 1, 0},                   // conv5
  };
}

inline ConvSpec stem_spec(const ArchConfig& cfg) { return {cfg.c_in, cfg.w, cfg.d, cfg.d, 1, 0}; }
inline ConvSpec tail_spec(const ArchConfig& cfg) {
  return {cfg.w, cfg.c_out * cfg.d * cfg.d, 1, 1, 1, 0};
}
inline ConvSpec sca_spec(const ArchConfig& cfg) { return {cfg.expanded() / 2, cfg.expanded() / 2, 1, 1, 1, 0}; }

/// Every convolution of the network in execution order: stem, 5 per block, tail.
inline std::vector<ConvSpec> conv_layer_list(const ArchConfig& cfg) {
  cfg.validate();
  std::vector<ConvSpec> layers;
  layers.reserve(2 + kConvsPerBlock * cfg.blocks);
  layers.push_back(stem_spec(cfg));
  const auto block = block_layer_list(cfg);
  for (std::size_t b = 0; b < cfg.blocks; ++b) layers.insert(layers.end(), block.begin(), block.end());
  layers.push_back(tail_spec(cfg));
  return layers;
}

// ---------------------------------------------------------------------------
// Cost model
// ---------------------------------------------------------------------------

enum class FlopsConvention {
  /// 2 x MACs + one add per conv output element (bias). Default.
  macs_plus_bias,
  /// 2 x MACs only.
  macs_only,
};

inline std::string to_string(FlopsConvention c) {
  return c == FlopsConvention::macs_only ? "macs_only" : "macs_plus_bias";
}

inline FlopsConvention flops_convention_from_string(const std::string& s) {
  if (s == "macs_only") return FlopsConvention::macs_only;
  if (s == "macs_plus_bias") return FlopsConvention::macs_plus_bias;
  throw std::invalid_argument("unknown FLOPs convention '" + s + "'");
}

struct FlopsReport {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t trunk_pixels = 0;
  std::uint64_t stem_macs = 0;
  std::uint64_t per_block_macs = 0;
  std::uint64_t trunk_macs = 0;
  std::uint64_t tail_macs = 0;
  std::uint64_t total_macs = 0;
  std::uint64_t bias_adds = 0;
  std::uint64_t flops = 0;
  FlopsConvention convention = FlopsConvention::macs_plus_bias;

  double gflops() const { return static_cast<double>(flops) * 1e-9; }
};

inline std::uint64_t conv_macs(const ConvSpec& s, std::uint64_t out_pixels) {
  return out_pixels * s.out_channels * s.in_per_group() * s.kernel * s.kernel;
}

/// Cost of one forward pass on an h x w image (batch 1). Non-divisible
/// extents are treated as padded up to the next multiple of d.
inline FlopsReport flops(const ArchConfig& cfg, std::size_t h, std::size_t w_img,
                         FlopsConvention convention = FlopsConvention::macs_plus_bias) {
  cfg.validate();
  if (h < cfg.d || w_img < cfg.d) throw ConfigError("image smaller than the downsampling ratio");
  FlopsReport r;
  r.height = h;
  r.width = w_img;
  r.convention = convention;
  const std::uint64_t P = ((h + cfg.d - 1) / cfg.d) * ((w_img + cfg.d - 1) / cfg.d);
  r.trunk_pixels = P;
  r.stem_macs = conv_macs(stem_spec(cfg), P);
  std::uint64_t block_bias = 0;
  for (const auto& s : block_layer_list(cfg)) {
    r.per_block_macs += conv_macs(s, P);
    block_bias += P * s.out_channels;
  }
  r.trunk_macs = r.per_block_macs * cfg.blocks;
  r.tail_macs = conv_macs(tail_spec(cfg), P);
  r.total_macs = r.stem_macs + r.trunk_macs + r.tail_macs;
  r.bias_adds = P * cfg.w + block_bias * cfg.blocks + P * tail_spec(cfg).out_channels;
  r.flops = 2 * r.total_macs + (convention == FlopsConvention::macs_plus_bias ? r.bias_adds : 0);
  return r;
}

/// Exact learnable-parameter count of a built network: conv weights and
/// biases, both LayerNorms' gamma/beta, the two residual scales per block, and
/// the channel-attention 1x1 conv when enabled.
inline std::uint64_t params(const ArchConfig& cfg, bool with_sca = false) {
  std::uint64_t total = 0;
  for (const auto& s : conv_layer_list(cfg)) total += s.weight_count() + s.out_channels;
  const std::uint64_t per_block_extra = 4 * cfg.w + 2 +
      (with_sca ? sca_spec(cfg).weight_count() + sca_spec(cfg).out_channels : 0);
  return total + per_block_extra * cfg.blocks;
}

// ---------------------------------------------------------------------------
// Entropy scores
// ---------------------------------------------------------------------------

enum class EntropyKind { modified, deepmad };

struct EntropyReport {
  EntropyKind kind = EntropyKind::modified;
  std::vector<double> layer_terms;  // log(c_i * k_i^2 / g_i), one per conv
  double sum_term = 0;
  double density_term = 0;
  double H = 0;
  std::size_t height = 0;  // deepmad only
  std::size_t width = 0;
};

inline double layer_entropy_term(const ConvSpec& s) {
  return std::log(static_cast<double>(s.in_channels * s.kernel * s.kernel) /
                  static_cast<double>(s.groups));
}

/// Sum of layer terms over conv_layer_list, accumulated in layer order. This
/// produces the same bits as summing EntropyReport::layer_terms front to back.
inline double entropy_sum_term(const ArchConfig& cfg) {
  cfg.validate();
  double block[kConvsPerBlock];
  const auto bl = block_layer_list(cfg);
  for (std::size_t i = 0; i < kConvsPerBlock; ++i) block[i] = layer_entropy_term(bl[i]);
  double sum = layer_entropy_term(stem_spec(cfg));
  for (std::size_t b = 0; b < cfg.blocks; ++b)
    for (double t : block) sum += t;
  sum += layer_entropy_term(tail_spec(cfg));
  return sum;
}

/// Resolution-invariant density term log(w / d^2).
inline double modified_density_term(const ArchConfig& cfg) {
  return std::log(static_cast<double>(cfg.w) / static_cast<double>(cfg.d * cfg.d));
}

/// Resolution-invariant score log(w/d^2) * sum_i log(c_i k_i^2 / g_i).
inline double entropy_modified_score(const ArchConfig& cfg) {
  return modified_density_term(cfg) * entropy_sum_term(cfg);
}

namespace detail {
inline EntropyReport make_entropy_report(const ArchConfig& cfg, EntropyKind kind, double density) {
  EntropyReport r;
  r.kind = kind;
  const auto layers = conv_layer_list(cfg);
  r.layer_terms.reserve(layers.size());
  for (const auto& s : layers) r.layer_terms.push_back(layer_entropy_term(s));
  for (double t : r.layer_terms) r.sum_term += t;
  r.density_term = density;
  r.H = r.density_term * r.sum_term;
  return r;
}
}  // namespace detail

inline EntropyReport entropy_modified(const ArchConfig& cfg) {
  return detail::make_entropy_report(cfg, EntropyKind::modified, modified_density_term(cfg));
}

/// Resolution-dependent score log(r^2 w) * sum, r^2 being the trunk pixel
/// count ceil(h/d) * ceil(w_img/d).
inline EntropyReport entropy_deepmad(const ArchConfig& cfg, std::size_t h, std::size_t w_img) {
  cfg.validate();
  if (h < cfg.d || w_img < cfg.d) throw ConfigError("image smaller than the downsampling ratio");
  const double r2 = static_cast<double>(((h + cfg.d - 1) / cfg.d) * ((w_img + cfg.d - 1) / cfg.d));
  auto r = detail::make_entropy_report(cfg, EntropyKind::deepmad,
                                       std::log(r2 * static_cast<double>(cfg.w)));
  r.height = h;
  r.width = w_img;
  return r;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ArchConfig& c) {
  j = nlohmann::json{{"d", c.d},         {"w", c.w},         {"B", c.blocks},
                     {"c_in", c.c_in},   {"c_out", c.c_out}, {"expansion", c.expansion},
                     {"k_dw", c.k_dw}};
}

inline void from_json(const nlohmann::json& j, ArchConfig& c) {
  c = ArchConfig{};
  j.at("d").get_to(c.d);
  j.at("w").get_to(c.w);
  j.at("B").get_to(c.blocks);
  if (j.contains("c_in")) j.at("c_in").get_to(c.c_in);
  if (j.contains("c_out")) j.at("c_out").get_to(c.c_out);
  if (j.contains("expansion")) j.at("expansion").get_to(c.expansion);
  if (j.contains("k_dw")) j.at("k_dw").get_to(c.k_dw);
}

inline void to_json(nlohmann::json& j, const FlopsReport& r) {
  j = nlohmann::json{{"height", r.height},
                     {"width", r.width},
                     {"trunk_pixels", r.trunk_pixels},
                     {"stem_macs", r.stem_macs},
                     {"per_block_macs", r.per_block_macs},
                     {"trunk_macs", r.trunk_macs},
                     {"tail_macs", r.tail_macs},
                     {"total_macs", r.total_macs},
                     {"bias_adds", r.bias_adds},
                     {"flops", r.flops},
                     {"gflops", r.gflops()},
                     {"convention", to_string(r.convention)}};
}

inline void from_json(const nlohmann::json& j, FlopsReport& r) {
  j.at("height").get_to(r.height);
  j.at("width").get_to(r.width);
  j.at("trunk_pixels").get_to(r.trunk_pixels);
  j.at("stem_macs").get_to(r.stem_macs);
  j.at("per_block_macs").get_to(r.per_block_macs);
  j.at("trunk_macs").get_to(r.trunk_macs);
  j.at("tail_macs").get_to(r.tail_macs);
  j.at("total_macs").get_to(r.total_macs);
  j.at("bias_adds").get_to(r.bias_adds);
  j.at("flops").get_to(r.flops);
  r.convention = flops_convention_from_string(j.at("convention").get<std::string>());
}

inline void to_json(nlohmann::json& j, const EntropyReport& r) {
  j = nlohmann::json{{"kind", r.kind == EntropyKind::modified ? "modified" : "deepmad"},
                     {"layer_terms", r.layer_terms},
                     {"sum_term", r.sum_term},
                     {"density_term", r.density_term},
                     {"H", r.H}};
  if (r.kind == EntropyKind::deepmad) {
    j["height"] = r.height;
    j["width"] = r.width;
  }
}

inline void from_json(const nlohmann::json& j, EntropyReport& r) {
  r.kind = j.at("kind").get<std::string>() == "deepmad" ? EntropyKind::deepmad : EntropyKind::modified;
  j.at("layer_terms").get_to(r.layer_terms);
  j.at("sum_term").get_to(r.sum_term);
  j.at("density_term").get_to(r.density_term);
  j.at("H").get_to(r.H);
  if (j.contains("height")) j.at("height").get_to(r.height);
  if (j.contains("width")) j.at("width").get_to(r.width);
}

}  // namespace jd3

#endif  // JD3_ARCH_HPP_
