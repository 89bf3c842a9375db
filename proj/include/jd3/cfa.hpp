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

// Colour filter arrays: pattern definitions, mosaicing, one-hot CFA planes
// for input appending, Poisson-Gaussian sensor noise, reflection padding and
// a normalized-convolution bilinear demosaicer.

#ifndef JD3_CFA_HPP_
#define JD3_CFA_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/ops.hpp"
#include "jd3/tensor.hpp"

namespace jd3 {

enum class CfaLabel : std::uint8_t { R = 0, G = 1, B = 2, Event = 3 };
inline constexpr std::size_t kCfaPlanes = 4;

inline char label_char(CfaLabel l) {
  constexpr std::array<char, 4> chars{'R', 'G', 'B', 'E'};
  return chars[static_cast<std::size_t>(l)];
}

inline CfaLabel label_from_string(const std::string& s) {
  if (s == "R") return CfaLabel::R;
  if (s == "G") return CfaLabel::G;
  if (s == "B") return CfaLabel::B;
  if (s == "E" || s == "Event") return CfaLabel::Event;
  throw FormatError("unknown CFA label '" + s + "'");
}

/// Tile origin offset: pixel (y, x) uses cell ((y + row) % ph, (x + col) % pw).
struct Phase {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Phase&) const = default;
};

class CfaPattern {
 public:
  CfaPattern(std::string name, std::size_t ph, std::size_t pw, std::vector<CfaLabel> cells,
             bool degenerate = false)
      : name_(std::move(name)), ph_(ph), pw_(pw), cells_(std::move(cells)), degenerate_(degenerate) {
    if (ph_ == 0 || pw_ == 0 || cells_.size() != ph_ * pw_) {
      throw FormatError("CFA pattern '" + name_ + "': cell grid does not match period");
    }
    if (!degenerate_) {
      for (CfaLabel l : {CfaLabel::R, CfaLabel::G, CfaLabel::B}) {
        if (count(l) == 0) {
          throw FormatError("CFA pattern '" + name_ + "' has no " + std::string(1, label_char(l)) +
                            " cell; mark it degenerate to allow this");
        }
      }
    }
  }

  const std::string& name() const { return name_; }
  std::size_t period_h() const { return ph_; }
  std::size_t period_w() const { return pw_; }
  bool degenerate() const { return degenerate_; }
  const std::vector<CfaLabel>& cells() const { return cells_; }

  CfaLabel cell(std::size_t r, std::size_t c) const { return cells_[r * pw_ + c]; }
  CfaLabel at(std::size_t y, std::size_t x, Phase phase = {}) const {
    return cell((y + phase.row) % ph_, (x + phase.col) % pw_);
  }

  std::size_t count(CfaLabel l) const { return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), l)); }
  bool has_events() const { return count(CfaLabel::Event) > 0; }

  /// Pattern whose 2x2-Bayer cells are each expanded to a factor x factor block.
  static CfaPattern expanded_bayer(std::string name, std::size_t factor) {
    const std::array<CfaLabel, 4> bayer{CfaLabel::R, CfaLabel::G, CfaLabel::G, CfaLabel::B};
    const std::size_t p = 2 * factor;
    std::vector<CfaLabel> cells(p * p);
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c) cells[r * p + c] = bayer[(r / factor) * 2 + c / factor];
    return CfaPattern(std::move(name), p, p, std::move(cells));
  }

  bool operator==(const CfaPattern& o) const {
    return ph_ == o.ph_ && pw_ == o.pw_ && cells_ == o.cells_ && degenerate_ == o.degenerate_;
  }

 private:
  std::string name_;
  std::size_t ph_;
  std::size_t pw_;
  std::vector<CfaLabel> cells_;
  bool degenerate_;
};

inline CfaPattern bayer_pattern() { return CfaPattern::expanded_bayer("bayer", 1); }
inline CfaPattern quad_bayer_pattern() { return CfaPattern::expanded_bayer("quad", 2); }
inline CfaPattern nona_bayer_pattern() { return CfaPattern::expanded_bayer("nona", 3); }

/// Default HybridEVS event cells: the diagonal of the top-right green quad.
inline const std::vector<std::pair<std::size_t, std::size_t>>& default_hybridevs_events() {
  static const std::vector<std::pair<std::size_t, std::size_t>> cells{{0, 2}, {1, 3}};
  return cells;
}

/// Quad-Bayer tile with the given cells replaced by zero-information event pixels.
inline CfaPattern hybridevs_pattern(
    const std::vector<std::pair<std::size_t, std::size_t>>& events = default_hybridevs_events()) {
  CfaPattern quad = quad_bayer_pattern();
  std::vector<CfaLabel> cells = quad.cells();
  for (auto [r, c] : events) {
    if (r >= 4 || c >= 4) throw FormatError("HybridEVS event cell outside the 4x4 tile");
    cells[r * 4 + c] = CfaLabel::Event;
  }
  return CfaPattern("hybridevs", 4, 4, std::move(cells));
}

inline CfaPattern pattern_from_json(const nlohmann::json& j) {
  const auto period = j.at("period");
  const std::size_t ph = period.at(0);
  const std::size_t pw = period.at(1);
  std::vector<CfaLabel> cells;
  const auto& rows = j.at("rows");
  if (rows.size() != ph) throw FormatError("CFA pattern rows do not match period");
  for (const auto& row : rows) {
    if (row.is_string()) {
      const std::string s = row.get<std::string>();
      if (s.size() != pw) throw FormatError("CFA pattern row width does not match period");
      for (char ch : s) cells.push_back(label_from_string(std::string(1, ch)));
    } else {
      if (row.size() != pw) throw FormatError("CFA pattern row width does not match period");
      for (const auto& v : row) cells.push_back(label_from_string(v.get<std::string>()));
    }
  }
  return CfaPattern(j.value("name", std::string("custom")), ph, pw, std::move(cells), j.value("degenerate", false));
}

inline nlohmann::json pattern_to_json(const CfaPattern& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < p.period_h(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < p.period_w(); ++c) row.push_back(std::string(1, label_char(p.cell(r, c))));
    rows.push_back(row);
  }
  return {{"name", p.name()}, {"period", {p.period_h(), p.period_w()}}, {"rows", rows}, {"degenerate", p.degenerate()}};
}

/// Built-in name (bayer, quad, nona, hybridevs) or path to a pattern JSON file.
inline CfaPattern pattern_by_name(const std::string& name) {
  if (name == "bayer" || name == "single") return bayer_pattern();
  if (name == "quad") return quad_bayer_pattern();
  if (name == "nona") return nona_bayer_pattern();
  if (name == "hybridevs") return hybridevs_pattern();
  std::ifstream is(name);
  if (!is) throw FormatError("unknown CFA pattern '" + name + "'");
  return pattern_from_json(nlohmann::json::parse(is));
}

struct NoiseInfo {
  bool applied = false;
  double gain = 0;
  double read_sigma = 0;
  std::uint64_t seed = 0;
};

/// Named Poisson-Gaussian strengths, weakest to strongest.
struct NoisePreset {
  std::string name;
  double gain;
  double read_sigma;
};

inline const std::vector<NoisePreset>& noise_presets() {
  static const std::vector<NoisePreset> presets{
      {"none", 0.0, 0.0},
      {"iso400", 0.0025, 0.0025},
      {"iso800", 0.005, 0.005},
      {"iso1600", 0.01, 0.01},
      {"iso3200", 0.02, 0.02},
  };
  return presets;
}

inline NoisePreset noise_preset(const std::string& name) {
  for (const auto& p : noise_presets())
    if (p.name == name) return p;
  throw std::invalid_argument("unknown noise preset '" + name + "'");
}

template <Real T>
struct MosaicImage {
  Tensor<T> raw;  // (n, 1, h, w)
  CfaPattern pattern;
  Phase phase;
  NoiseInfo noise;
};

/// Samples each pixel's CFA channel from an RGB image in [0, 1]; event
/// pixels record 0.
template <Real T>
MosaicImage<T> mosaic(const Tensor<T>& rgb, const CfaPattern& pattern, Phase phase = {}) {
  const Shape& s = rgb.shape();
  if (s.c != 3) throw ShapeError("mosaic: expected 3 channels, got " + std::to_string(s.c));
  for (T v : rgb.data()) {
    if (!(v >= T(0) && v <= T(1))) throw std::invalid_argument("mosaic: rgb values must lie in [0, 1]");
  }
  Tensor<T> raw(Shape{s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        const CfaLabel l = pattern.at(y, x, phase);
        raw(n, 0, y, x) = l == CfaLabel::Event ? T(0) : rgb(n, static_cast<std::size_t>(l), y, x);
      }
  return MosaicImage<T>{std::move(raw), pattern, phase, {}};
}

/// One-hot {R, G, B, Event} planes, shape (1, 4, h, w).
template <Real T>
Tensor<T> cfa_channels(const CfaPattern& pattern, Phase phase, std::size_t h, std::size_t w) {
  Tensor<T> out(Shape{1, kCfaPlanes, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out(0, static_cast<std::size_t>(pattern.at(y, x, phase)), y, x) = T(1);
  return out;
}

/// Raw mosaic with the one-hot CFA planes appended: (n, 5, h, w).
template <Real T>
Tensor<T> append_cfa(const MosaicImage<T>& m) {
  const Shape& s = m.raw.shape();
  const Tensor<T> planes = cfa_channels<T>(m.pattern, m.phase, s.h, s.w);
  std::vector<const Tensor<T>*> rep(s.n, &planes);
  return concat_channels(m.raw, concat_batch<T>(rep));
}

/// v -> clamp(Poisson(v / gain) * gain + N(0, read_sigma), 0, 1) per pixel;
/// event pixels stay 0. gain = 0 disables the shot-noise term.
template <Real T>
MosaicImage<T> add_noise(const MosaicImage<T>& m, double gain, double read_sigma, std::uint64_t seed) {
  if (gain < 0 || read_sigma < 0) throw std::invalid_argument("add_noise: gain and read_sigma must be >= 0");
  MosaicImage<T> out = m;
  out.noise = NoiseInfo{true, gain, read_sigma, seed};
  if (gain == 0 && read_sigma == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Shape& s = m.raw.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        if (m.pattern.at(y, x, m.phase) == CfaLabel::Event) continue;
        double v = m.raw(n, 0, y, x);
        if (gain > 0 && v > 0) {
          std::poisson_distribution<std::int64_t> shot(v / gain);
          v = static_cast<double>(shot(rng)) * gain;
        }
        if (read_sigma > 0) v += read_sigma * normal(rng);
        out.raw(n, 0, y, x) = static_cast<T>(std::clamp(v, 0.0, 1.0));
      }
  return out;
}

namespace detail {

// Zero-padded separable filtering with symmetric taps.
inline std::vector<double> separable_filter(const std::vector<double>& src, std::size_t h, std::size_t w,
                                            const std::vector<double>& taps) {
  const auto r = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  std::vector<double> tmp(h * w, 0.0), out(h * w, 0.0);
  for (std::ptrdiff_t y = 0; y < H; ++y)
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0;
      for (std::ptrdiff_t k = -r; k <= r; ++k) {
        const std::ptrdiff_t xx = x + k;
        if (xx >= 0 && xx < W) acc += taps[static_cast<std::size_t>(k + r)] * src[static_cast<std::size_t>(y * W + xx)];
      }
      tmp[static_cast<std::size_t>(y * W + x)] = acc;
    }
  for (std::ptrdiff_t y = 0; y < H; ++y)
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      double acc = 0;
      for (std::ptrdiff_t k = -r; k <= r; ++k) {
        const std::ptrdiff_t yy = y + k;
        if (yy >= 0 && yy < H) acc += taps[static_cast<std::size_t>(k + r)] * tmp[static_cast<std::size_t>(yy * W + x)];
      }
      out[static_cast<std::size_t>(y * W + x)] = acc;
    }
  return out;
}

}  // namespace detail

/// Normalized-convolution bilinear demosaicing. Each channel's samples are
/// spread with a separable tent of radius equal to the pattern period (the
/// classic [1 2 1] kernel for Bayer) and divided by the spread sample mask.
/// Sampled positions are returned unchanged; event pixels count as unsampled.
template <Real T>
Tensor<T> bilinear_demosaic(const MosaicImage<T>& m) {
  const CfaPattern& pat = m.pattern;
  for (CfaLabel l : {CfaLabel::R, CfaLabel::G, CfaLabel::B}) {
    if (pat.count(l) == 0) {
      throw std::invalid_argument("bilinear_demosaic: pattern has no " + std::string(1, label_char(l)) + " samples");
    }
  }
  const Shape& s = m.raw.shape();
  const std::size_t radius = std::max(pat.period_h(), pat.period_w());
  std::vector<double> taps(2 * radius - 1);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    taps[i] = static_cast<double>(radius) - std::abs(static_cast<double>(i) - static_cast<double>(radius - 1));
  }
  Tensor<T> out(Shape{s.n, 3, s.h, s.w});
  const std::size_t hw = s.plane();
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* raw = m.raw.plane(n, 0);
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<double> mask(hw, 0.0), vals(hw, 0.0);
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) {
          if (static_cast<std::size_t>(pat.at(y, x, m.phase)) == c) {
            mask[y * s.w + x] = 1.0;
            vals[y * s.w + x] = raw[y * s.w + x];
          }
        }
      const auto num = detail::separable_filter(vals, s.h, s.w, taps);
      const auto den = detail::separable_filter(mask, s.h, s.w, taps);
      T* o = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        if (mask[i] > 0) {
          o[i] = raw[i];
        } else if (den[i] > 0) {
          o[i] = static_cast<T>(num[i] / den[i]);
        } else {
          o[i] = T(0);
        }
      }
    }
  }
  return out;
}

struct CropRecord {
  std::size_t pad_bottom = 0;
  std::size_t pad_right = 0;
  bool empty() const { return pad_bottom == 0 && pad_right == 0; }
  bool operator==(const CropRecord&) const = default;
};

namespace detail {
// Mirror index without edge repetition: ... 2 1 [0 1 2 ... n-1] n-2 ...
inline std::size_t reflect_index(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  i %= period;
  return i < n ? i : period - i;
}
}  // namespace detail

/// Reflection-pads bottom/right so both spatial extents are multiples of d.
template <Real T>
std::pair<Tensor<T>, CropRecord> pad_to_multiple(const Tensor<T>& t, std::size_t d) {
  if (d == 0) throw std::invalid_argument("pad_to_multiple: d must be >= 1");
  const Shape& s = t.shape();
  CropRecord rec{(d - s.h % d) % d, (d - s.w % d) % d};
  if (rec.empty()) return {t, rec};
  Tensor<T> out(Shape{s.n, s.c, s.h + rec.pad_bottom, s.w + rec.pad_right});
  const Shape& o = out.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < o.h; ++y)
        for (std::size_t x = 0; x < o.w; ++x)
          out(n, c, y, x) = t(n, c, detail::reflect_index(y, s.h), detail::reflect_index(x, s.w));
  return {std::move(out), rec};
}

/// Inverse of pad_to_multiple.
template <Real T>
Tensor<T> crop(const Tensor<T>& t, const CropRecord& rec) {
  if (rec.empty()) return t;
  const Shape& s = t.shape();
  if (rec.pad_bottom >= s.h || rec.pad_right >= s.w) throw ShapeError("crop: record larger than tensor");
  Tensor<T> out(Shape{s.n, s.c, s.h - rec.pad_bottom, s.w - rec.pad_right});
  const Shape& o = out.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < o.h; ++y)
        for (std::size_t x = 0; x < o.w; ++x) out(n, c, y, x) = t(n, c, y, x);
  return out;
}

}  // namespace jd3

#endif  // JD3_CFA_HPP_
