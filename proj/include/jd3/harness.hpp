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

// Desk-scale experiments: procedural demosaicing data, FLOP-matched
// two-arm training comparisons, and tabular reports (CSV / JSON / plot
// triples) for search sweeps and comparison runs.

#ifndef JD3_HARNESS_HPP_
#define JD3_HARNESS_HPP_

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/cfa.hpp"
#include "jd3/metrics.hpp"
#include "jd3/search.hpp"
#include "jd3/train.hpp"

namespace jd3 {

/// splitmix64 finalizer; derives independent stream seeds from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// Procedural ground truth
// ---------------------------------------------------------------------------

/// Random RGB scene in [0, 1]: a smooth colour gradient carrying all the
/// chroma, with grey-level hard-edged shapes (2x2 supersampled), an optional
/// grating and low-amplitude sinusoidal texture in luminance only. Detail is
/// achromatic, the usual prior demosaicers exploit. Shape (1, 3, h, w).
template <Real T>
Tensor<T> procedural_scene(std::mt19937_64& rng, std::size_t h, std::size_t w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double H = static_cast<double>(h), W = static_cast<double>(w);
  std::vector<double> img(3 * h * w);
  auto at = [&](std::size_t c, std::size_t y, std::size_t x) -> double& { return img[(c * h + y) * w + x]; };

  for (std::size_t c = 0; c < 3; ++c) {
    const double base = 0.15 + 0.7 * u(rng);
    const double gx = (u(rng) - 0.5) * 0.6, gy = (u(rng) - 0.5) * 0.6;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) at(c, y, x) = base + gx * (x / W - 0.5) + gy * (y / H - 0.5);
  }

  const int shapes = 2 + static_cast<int>(u(rng) * 4);
  for (int s = 0; s < shapes; ++s) {
    const int kind = static_cast<int>(u(rng) * 3);
    double grey = 0;
    for (int k = 0; k < 3; ++k) grey += u(rng) / 3;
    const double cx = u(rng) * W, cy = u(rng) * H;
    const double r = (0.1 + 0.35 * u(rng)) * std::min(H, W);
    const double ang = u(rng) * std::numbers::pi;
    const double nx = std::cos(ang), ny = std::sin(ang);
    const double hw_ = r * (0.4 + 0.6 * u(rng));
    auto inside = [&](double py, double px) {
      const double dx = px - cx, dy = py - cy;
      switch (kind) {
        case 0: return dx * nx + dy * ny > 0;                   // half-plane
        case 1: return dx * dx + dy * dy < r * r;               // disk
        default: {                                              // rotated rectangle
          const double a = dx * nx + dy * ny, b = -dx * ny + dy * nx;
          return std::abs(a) < r && std::abs(b) < hw_;
        }
      }
    };
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        int hits = 0;
        for (double oy : {0.25, 0.75})
          for (double ox : {0.25, 0.75}) hits += inside(y + oy, x + ox) ? 1 : 0;
        if (hits == 0) continue;
        const double a = hits / 4.0;
        for (std::size_t c = 0; c < 3; ++c) at(c, y, x) = (1 - a) * at(c, y, x) + a * grey;
      }
  }

  if (u(rng) < 0.5) {
    const double f = 0.05 + 0.25 * u(rng);
    const double ang = u(rng) * std::numbers::pi;
    double amp = 0.05 + 0.15 * u(rng);
    double tint = 0;
    for (int k = 0; k < 3; ++k) tint += u(rng) / 3;
    amp *= tint;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double v = amp * std::sin(2 * std::numbers::pi * f * (x * std::cos(ang) + y * std::sin(ang)));
        for (std::size_t c = 0; c < 3; ++c) at(c, y, x) += v;
      }
  }

  for (int k = 0; k < 6; ++k) {
    const double fx = (u(rng) - 0.5) * 0.5, fy = (u(rng) - 0.5) * 0.5, ph = u(rng) * 2 * std::numbers::pi;
    const double amp = 0.01 + 0.02 * u(rng);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double v = amp * std::sin(2 * std::numbers::pi * (fx * x + fy * y) + ph);
        for (std::size_t c = 0; c < 3; ++c) at(c, y, x) += v;
      }
  }

  Tensor<T> out(Shape{1, 3, h, w});
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = static_cast<T>(std::clamp(img[i], 0.0, 1.0));
  return out;
}

/// Fixed test card: colour bars, luminance and colour ramps, a zone plate and
/// a fine checkerboard, shape (1, 3, h, w).
template <Real T>
Tensor<T> test_card(std::size_t h = 128, std::size_t w = 128) {
  if (h < 16 || w < 16) throw ShapeError("test_card: need at least 16x16");
  Tensor<T> out(Shape{1, 3, h, w});
  const std::array<std::array<double, 3>, 8> bars{{{0.75, 0.75, 0.75}, {0.75, 0.75, 0.0}, {0.0, 0.75, 0.75},
                                                   {0.0, 0.75, 0.0}, {0.75, 0.0, 0.75}, {0.75, 0.0, 0.0},
                                                   {0.0, 0.0, 0.75}, {0.1, 0.1, 0.1}}};
  const std::size_t band = h / 4;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(w - 1);
      std::array<double, 3> v{};
      if (y < band) {
        v = bars[std::min<std::size_t>(x * 8 / w, 7)];
      } else if (y < 2 * band) {
        const double t = static_cast<double>(y - band) / static_cast<double>(band);
        v = {fx, t < 0.5 ? fx : 1 - fx, 1 - fx};
      } else if (y < 3 * band) {
        const double dx = static_cast<double>(x) - w / 2.0, dy = static_cast<double>(y) - 2.5 * band;
        const double z = 0.5 + 0.5 * std::cos(std::numbers::pi * (dx * dx + dy * dy) / (2.0 * w));
        v = {z, z, 0.3 + 0.4 * z};
      } else {
        const bool on = ((x / 2) + (y / 2)) % 2 == 0;
        const double c = x < w / 2 ? (on ? 0.9 : 0.1) : (x > y ? 0.8 : 0.2);
        v = {c, 0.5 * c + 0.25, 1 - c};
      }
      for (std::size_t c = 0; c < 3; ++c) out(0, c, y, x) = static_cast<T>(v[c]);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Toy datasets
// ---------------------------------------------------------------------------

struct ToyDataOptions {
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t patch = 48;
  std::string pattern = "bayer";
  std::string noise = "none";
  bool append_cfa = false;
};

/// (input, target) pairs: target a procedural scene, input its mosaic (plus
/// noise and one-hot CFA planes when requested). Sample i depends only on
/// (seed, i).
template <Real T>
Dataset<T> make_toy_dataset(const ToyDataOptions& o) {
  if (o.patch < 16) throw ConfigError("toy dataset patch must be >= 16, got " + std::to_string(o.patch));
  const CfaPattern pattern = pattern_by_name(o.pattern);
  const NoisePreset noise = noise_preset(o.noise);
  Dataset<T> data;
  data.reserve(o.count);
  for (std::size_t i = 0; i < o.count; ++i) {
    std::mt19937_64 rng(mix_seed(o.seed, i));
    Tensor<T> target = procedural_scene<T>(rng, o.patch, o.patch);
    MosaicImage<T> m = mosaic(target, pattern);
    if (noise.gain > 0 || noise.read_sigma > 0) m = add_noise(m, noise.gain, noise.read_sigma, rng());
    data.push_back(Sample<T>{o.append_cfa ? append_cfa(m) : m.raw, std::move(target)});
  }
  return data;
}

/// Bilinear reconstruction of one sample; the raw mosaic is input channel 0.
template <Real T>
Tensor<T> bilinear_of_sample(const Sample<T>& s, const CfaPattern& pattern) {
  const Shape& in = s.input.shape();
  Tensor<T> raw(Shape{in.n, 1, in.h, in.w});
  for (std::size_t n = 0; n < in.n; ++n) std::copy(s.input.plane(n, 0), s.input.plane(n, 0) + in.plane(), raw.plane(n, 0));
  return bilinear_demosaic(MosaicImage<T>{std::move(raw), pattern, {}, {}});
}

struct QualitySummary {
  double psnr = 0;
  double ssim = 0;
};

template <Real T>
QualitySummary bilinear_baseline(const Dataset<T>& data, const CfaPattern& pattern) {
  QualitySummary q;
  if (data.empty()) return q;
  for (const auto& s : data) {
    const Tensor<T> rec = bilinear_of_sample(s, pattern);
    q.psnr += psnr(rec, s.target);
    q.ssim += ssim(rec, s.target);
  }
  q.psnr /= static_cast<double>(data.size());
  q.ssim /= static_cast<double>(data.size());
  return q;
}

template <Real T>
QualitySummary network_quality(const JD3NetParams<T>& p, const Dataset<T>& data) {
  QualitySummary q;
  if (data.empty()) return q;
  for (const auto& s : data) {
    const Tensor<T> y = forward(p, s.input);
    q.psnr += psnr(y, s.target);
    q.ssim += ssim(y, s.target);
  }
  q.psnr /= static_cast<double>(data.size());
  q.ssim /= static_cast<double>(data.size());
  return q;
}

// ---------------------------------------------------------------------------
// Two-arm comparison
// ---------------------------------------------------------------------------

struct ArmSpec {
  std::string label;
  ArchConfig config;
};

struct ExperimentOptions {
  std::string name = "toy";
  std::string pattern = "bayer";
  std::string noise = "none";
  std::size_t patch = 48;
  bool append_cfa = true;
  std::uint64_t seed = 0;
  std::size_t train_count = 64;
  std::size_t val_count = 16;
  double flop_tolerance = 0.05;
  bool with_sca = false;
  TrainOptions train{LossKind::psnr, 3e-3, 3000, 8, 0};
};

/// A validated comparison: both arms get c_in from the CFA-appending flag,
/// and their FLOPs at the (padded) patch resolution agree within the
/// tolerance. Construction throws ConfigError otherwise.
class ExperimentSpec {
 public:
  ExperimentSpec(ArmSpec a, ArmSpec b, ExperimentOptions opts = {}) : opts_(std::move(opts)), arms_{std::move(a), std::move(b)} {
    const std::size_t c_in = opts_.append_cfa ? 1 + kCfaPlanes : 1;
    for (auto& arm : arms_) {
      arm.config.c_in = c_in;
      arm.config.c_out = 3;
      arm.config.validate();
    }
    if (opts_.patch < 16) throw ConfigError("patch must be >= 16");
    if (opts_.train_count == 0 || opts_.val_count == 0) throw ConfigError("train and val splits must be non-empty");
    if (opts_.train.batch == 0) throw ConfigError("batch must be positive");
    if (!(opts_.flop_tolerance >= 0)) throw ConfigError("flop tolerance must be >= 0");
    pattern_by_name(opts_.pattern);
    noise_preset(opts_.noise);
    const double fa = static_cast<double>(arm_flops(0)), fb = static_cast<double>(arm_flops(1));
    if (std::abs(fa - fb) / std::max(fa, fb) > opts_.flop_tolerance) {
      std::ostringstream os;
      os << "arms are not FLOP-matched: " << fa << " vs " << fb << " at " << padded_patch() << "x"
         << padded_patch() << " (tolerance " << opts_.flop_tolerance << ")";
      throw ConfigError(os.str());
    }
  }

  const ExperimentOptions& options() const { return opts_; }
  const std::array<ArmSpec, 2>& arms() const { return arms_; }
  const ArmSpec& arm(std::size_t i) const { return arms_.at(i); }

  /// Patch rounded up to a multiple of both downsampling ratios.
  std::size_t padded_patch() const {
    const std::size_t l = std::lcm(arms_[0].config.d, arms_[1].config.d);
    return (opts_.patch + l - 1) / l * l;
  }

  std::uint64_t arm_flops(std::size_t i) const {
    return flops(arms_.at(i).config, padded_patch(), padded_patch()).flops;
  }

  ToyDataOptions data_options(bool validation) const {
    ToyDataOptions d;
    d.seed = validation ? mix_seed(opts_.seed, 0x7661) : opts_.seed;
    d.count = validation ? opts_.val_count : opts_.train_count;
    d.patch = padded_patch();
    d.pattern = opts_.pattern;
    d.noise = opts_.noise;
    d.append_cfa = opts_.append_cfa;
    return d;
  }

  std::uint64_t init_seed() const { return mix_seed(opts_.seed, 0x696e); }

 private:
  ExperimentOptions opts_;
  std::array<ArmSpec, 2> arms_;
};

/// Width/depth pair used by default: d = 1 against d = 2 at ~9.3 MFLOPs per
/// 48x48 patch with CFA planes appended.
inline ExperimentSpec default_experiment(ExperimentOptions opts = {}) {
  ArchConfig a;
  a.d = 1;
  a.w = 16;
  a.blocks = 1;
  ArchConfig b;
  b.d = 2;
  b.w = 16;
  b.blocks = 4;
  return ExperimentSpec({"d1", a}, {"d2", b}, std::move(opts));
}

struct ArmRecord {
  std::string label;
  ArchConfig config;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
  bool diverged = false;
  std::size_t diverged_step = 0;
  std::string error;
  double initial_val_psnr = 0;
  double train_psnr = 0;
  double val_psnr = 0;
  double val_ssim = 0;
  std::vector<double> loss_curve;
  double wall_seconds = 0;  // not serialized
};

struct RunRecord {
  std::optional<ExperimentSpec> spec;
  std::array<ArmRecord, 2> arms;
  double baseline_val_psnr = 0;
  double baseline_val_ssim = 0;
  /// val PSNR of the arm with the larger d minus the other arm's (b - a when equal).
  double gap_db = 0;
  std::uint64_t seed = 0;
};

namespace detail {
inline double downsampling_gap(const ArmRecord& a, const ArmRecord& b) {
  if (a.config.d > b.config.d) return a.val_psnr - b.val_psnr;
  return b.val_psnr - a.val_psnr;
}
}  // namespace detail

/// Trains both arms on the same data, batch order and init seed, then scores
/// each on the held-out split next to the bilinear baseline. A diverging arm
/// is recorded and the other arm still runs.
template <Real T>
RunRecord run_comparison(const ExperimentSpec& spec) {
  const Dataset<T> train = make_toy_dataset<T>(spec.data_options(false));
  const Dataset<T> val = make_toy_dataset<T>(spec.data_options(true));
  const CfaPattern pattern = pattern_by_name(spec.options().pattern);

  RunRecord rec;
  rec.spec = spec;
  rec.seed = spec.options().seed;
  const QualitySummary base = bilinear_baseline(val, pattern);
  rec.baseline_val_psnr = base.psnr;
  rec.baseline_val_ssim = base.ssim;

  for (std::size_t i = 0; i < 2; ++i) {
    const ArmSpec& arm = spec.arm(i);
    ArmRecord& out = rec.arms[i];
    out.label = arm.label;
    out.config = arm.config;
    out.flops = spec.arm_flops(i);
    out.params = params(arm.config, spec.options().with_sca);
    const auto t0 = std::chrono::steady_clock::now();
    JD3NetParams<T> p = build<T>(arm.config, spec.init_seed(), spec.options().with_sca);
    out.initial_val_psnr = network_quality(p, val).psnr;
    try {
      TrainResult<T> r = train_adam(std::move(p), train, spec.options().train);
      out.loss_curve = std::move(r.loss_curve);
      out.train_psnr = mean_psnr(r.params, train);
      const QualitySummary q = network_quality(r.params, val);
      out.val_psnr = q.psnr;
      out.val_ssim = q.ssim;
    } catch (const TrainingDiverged& e) {
      out.diverged = true;
      out.diverged_step = e.step();
      out.error = e.what();
    }
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  rec.gap_db = detail::downsampling_gap(rec.arms[0], rec.arms[1]);
  return rec;
}

// ---------------------------------------------------------------------------
// Single-config toy training
// ---------------------------------------------------------------------------

struct ToyTrainSpec {
  ArchConfig config;
  bool with_sca = false;
  std::string pattern = "bayer";
  std::string noise = "none";
  std::size_t patch = 48;
  bool append_cfa = true;
  std::uint64_t seed = 0;
  std::size_t train_count = 8;
  std::size_t val_count = 0;
  TrainOptions train{LossKind::psnr, 1e-3, 2000, 8, 0};

  /// Sets c_in from the appending flag and checks the rest.
  void normalize() {
    config.c_in = append_cfa ? 1 + kCfaPlanes : 1;
    config.c_out = 3;
    config.validate();
    if (patch < 16) throw ConfigError("patch must be >= 16");
    if (train_count == 0) throw ConfigError("train_count must be positive");
    if (train.batch == 0) throw ConfigError("batch must be positive");
    pattern_by_name(pattern);
    noise_preset(noise);
  }

  std::size_t padded_patch() const { return (patch + config.d - 1) / config.d * config.d; }

  ToyDataOptions data_options(bool validation) const {
    return ToyDataOptions{validation ? mix_seed(seed, 0x7661) : seed, validation ? val_count : train_count,
                          padded_patch(), pattern, noise, append_cfa};
  }
};

struct ToyTrainRecord {
  ToyTrainSpec spec;
  std::uint64_t flops = 0;
  std::uint64_t params = 0;
  bool diverged = false;
  std::size_t diverged_step = 0;
  std::string error;
  double initial_train_psnr = 0;
  double train_psnr = 0;
  double baseline_train_psnr = 0;
  double val_psnr = 0;
  double val_ssim = 0;
  double baseline_val_psnr = 0;
  std::vector<double> loss_curve;
};

/// Trains one network on a procedural dataset. The trained parameters are
/// returned alongside the record (unchanged initial parameters on divergence).
template <Real T>
std::pair<ToyTrainRecord, JD3NetParams<T>> run_toy_training(ToyTrainSpec spec) {
  spec.normalize();
  const Dataset<T> train = make_toy_dataset<T>(spec.data_options(false));
  const Dataset<T> val = make_toy_dataset<T>(spec.data_options(true));
  const CfaPattern pattern = pattern_by_name(spec.pattern);
  ToyTrainRecord rec;
  rec.spec = spec;
  rec.flops = flops(spec.config, spec.padded_patch(), spec.padded_patch()).flops;
  rec.params = params(spec.config, spec.with_sca);
  rec.baseline_train_psnr = bilinear_baseline(train, pattern).psnr;
  rec.baseline_val_psnr = bilinear_baseline(val, pattern).psnr;
  JD3NetParams<T> p = build<T>(spec.config, mix_seed(spec.seed, 0x696e), spec.with_sca);
  rec.initial_train_psnr = mean_psnr(p, train);
  try {
    TrainResult<T> r = train_adam(p, train, spec.train);
    p = std::move(r.params);
    rec.loss_curve = std::move(r.loss_curve);
    rec.train_psnr = mean_psnr(p, train);
    const QualitySummary q = network_quality(p, val);
    rec.val_psnr = q.psnr;
    rec.val_ssim = q.ssim;
  } catch (const TrainingDiverged& e) {
    rec.diverged = true;
    rec.diverged_step = e.step();
    rec.error = e.what();
  }
  return {std::move(rec), std::move(p)};
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Rectangular table with typed cells (numbers, strings, booleans, null).
struct ReportTable {
  std::string title;
  std::vector<std::string> columns;
  std::vector<std::vector<nlohmann::json>> rows;
};

struct PlotPoint {
  double x = 0;
  double y = 0;
  std::string series;
};

inline std::string format_cell(const nlohmann::json& v, int precision) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v.get<double>();
    return os.str();
  }
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return s;
}

inline std::string to_csv(const ReportTable& t, int precision = 4) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i], precision);
    os << "\n";
  }
  return os.str();
}

inline void to_json(nlohmann::json& j, const ReportTable& t) {
  j = nlohmann::json{{"title", t.title}, {"columns", t.columns}, {"rows", t.rows}};
}

inline void from_json(const nlohmann::json& j, ReportTable& t) {
  t.title = j.value("title", std::string());
  j.at("columns").get_to(t.columns);
  t.rows.clear();
  for (const auto& r : j.at("rows")) {
    if (r.size() != t.columns.size()) throw FormatError("report row width does not match the header");
    t.rows.emplace_back(r.begin(), r.end());
  }
}

inline std::string plot_csv(const std::vector<PlotPoint>& pts, int precision = 6) {
  std::ostringstream os;
  os << "x,y,series\n" << std::fixed << std::setprecision(precision);
  for (const auto& p : pts) os << p.x << "," << p.y << "," << format_cell(p.series, precision) << "\n";
  return os.str();
}

inline const std::vector<std::string>& search_columns() {
  static const std::vector<std::string> cols{"family", "budget_gflops", "rho", "d_max", "feasible", "d",
                                             "w",      "B",             "gflops", "entropy"};
  return cols;
}

inline std::vector<nlohmann::json> search_row(const std::string& family, const SweepRow& r) {
  using J = nlohmann::json;
  if (!r.feasible) return {family, r.budget_gflops, r.rho, r.d_max, false, J(), J(), J(), J(), J()};
  return {family,       r.budget_gflops, r.rho, r.d_max, true, r.config.d, r.config.w, r.config.blocks,
          static_cast<double>(r.flops) * 1e-9, r.entropy};
}

inline ReportTable report_from_sweep(const std::vector<SweepRow>& rows, const std::string& family = "sweep") {
  if (rows.empty()) throw std::invalid_argument("report: no sweep rows");
  ReportTable t{"search sweep", search_columns(), {}};
  for (const auto& r : rows) t.rows.push_back(search_row(family, r));
  return t;
}

/// The four searched families at 256x256: 25 and 128 GFLOPs, each with d <= 4
/// and with d pinned to 1, over rho in {0.5, 0.7, 1.0, 1.2, 1.5}.
inline ReportTable search_table(SearchConstraints base = {}) {
  const std::vector<double> rhos{0.5, 0.7, 1.0, 1.2, 1.5};
  struct Family {
    const char* name;
    double budget;
    std::size_t d_max;
  };
  const std::array<Family, 4> fams{{{"JD3Net-S", 25, 4}, {"JD3Net-S-x1", 25, 1}, {"JD3Net", 128, 4}, {"JD3Net-x1", 128, 1}}};
  ReportTable t{"search results at 256x256", search_columns(), {}};
  for (const auto& f : fams) {
    SearchConstraints c = base;
    c.d_min = 1;
    c.d_max = f.d_max;
    for (const auto& r : sweep({f.budget}, rhos, c)) t.rows.push_back(search_row(f.name, r));
  }
  return t;
}

/// Entropy against rho, one series per family.
inline std::vector<PlotPoint> search_plot(const ReportTable& t) {
  std::vector<PlotPoint> pts;
  for (const auto& r : t.rows) {
    if (!r.at(4).get<bool>()) continue;
    pts.push_back({r.at(2).get<double>(), r.at(9).get<double>(), r.at(0).get<std::string>()});
  }
  return pts;
}

inline const std::vector<std::string>& comparison_columns() {
  static const std::vector<std::string> cols{"experiment", "arm",        "d",         "w",
                                             "B",          "mflops",     "params",    "diverged",
                                             "train_psnr", "val_psnr",   "val_ssim",  "baseline_val_psnr",
                                             "gain_over_baseline_db",    "downsampling_gap_db"};
  return cols;
}

inline ReportTable report_from_records(const std::vector<RunRecord>& recs) {
  if (recs.empty()) throw std::invalid_argument("report: no run records");
  ReportTable t{"FLOP-matched comparison", comparison_columns(), {}};
  for (const auto& rec : recs) {
    const std::string name = rec.spec ? rec.spec->options().name : "";
    for (const auto& a : rec.arms) {
      t.rows.push_back({name, a.label, a.config.d, a.config.w, a.config.blocks, static_cast<double>(a.flops) * 1e-6,
                        a.params, a.diverged, a.train_psnr, a.val_psnr, a.val_ssim, rec.baseline_val_psnr,
                        a.val_psnr - rec.baseline_val_psnr, rec.gap_db});
    }
  }
  return t;
}

/// Loss curves: (step, loss, "<experiment>/<arm>").
inline std::vector<PlotPoint> loss_plot(const std::vector<RunRecord>& recs) {
  std::vector<PlotPoint> pts;
  for (const auto& rec : recs) {
    const std::string name = rec.spec ? rec.spec->options().name : "";
    for (const auto& a : rec.arms)
      for (std::size_t s = 0; s < a.loss_curve.size(); ++s)
        pts.push_back({static_cast<double>(s), a.loss_curve[s], name + "/" + a.label});
  }
  return pts;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const TrainOptions& o) {
  j = nlohmann::json{{"loss", to_string(o.loss)}, {"lr", o.lr},       {"steps", o.steps},
                     {"batch", o.batch},          {"seed", o.seed},   {"beta1", o.beta1},
                     {"beta2", o.beta2},          {"eps", o.eps},     {"schedule", to_string(o.schedule)}};
}

inline void from_json(const nlohmann::json& j, TrainOptions& o) {
  o = TrainOptions{};
  if (j.contains("loss")) o.loss = loss_from_string(j.at("loss").get<std::string>());
  if (j.contains("lr")) j.at("lr").get_to(o.lr);
  if (j.contains("steps")) j.at("steps").get_to(o.steps);
  if (j.contains("batch")) j.at("batch").get_to(o.batch);
  if (j.contains("seed")) j.at("seed").get_to(o.seed);
  if (j.contains("beta1")) j.at("beta1").get_to(o.beta1);
  if (j.contains("beta2")) j.at("beta2").get_to(o.beta2);
  if (j.contains("eps")) j.at("eps").get_to(o.eps);
  if (j.contains("schedule")) o.schedule = lr_schedule_from_string(j.at("schedule").get<std::string>());
}

inline void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  const auto& o = s.options();
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : s.arms()) arms.push_back({{"label", a.label}, {"config", a.config}});
  j = nlohmann::json{{"name", o.name},
                     {"pattern", o.pattern},
                     {"noise", o.noise},
                     {"patch", o.patch},
                     {"append_cfa", o.append_cfa},
                     {"seed", o.seed},
                     {"train_count", o.train_count},
                     {"val_count", o.val_count},
                     {"flop_tolerance", o.flop_tolerance},
                     {"with_sca", o.with_sca},
                     {"train", o.train},
                     {"arms", arms}};
}

/// Missing option keys take their defaults; missing arms take the default pair.
inline ExperimentSpec experiment_from_json(const nlohmann::json& j) {
  ExperimentOptions o;
  if (j.contains("name")) j.at("name").get_to(o.name);
  if (j.contains("pattern")) j.at("pattern").get_to(o.pattern);
  if (j.contains("noise")) j.at("noise").get_to(o.noise);
  if (j.contains("patch")) j.at("patch").get_to(o.patch);
  if (j.contains("append_cfa")) j.at("append_cfa").get_to(o.append_cfa);
  if (j.contains("seed")) j.at("seed").get_to(o.seed);
  if (j.contains("train_count")) j.at("train_count").get_to(o.train_count);
  if (j.contains("val_count")) j.at("val_count").get_to(o.val_count);
  if (j.contains("flop_tolerance")) j.at("flop_tolerance").get_to(o.flop_tolerance);
  if (j.contains("with_sca")) j.at("with_sca").get_to(o.with_sca);
  if (j.contains("train")) {
    const TrainOptions defaults = o.train;
    nlohmann::json merged = defaults;
    merged.update(j.at("train"));
    o.train = merged.get<TrainOptions>();
  }
  if (!j.contains("arms")) return default_experiment(o);
  const auto& arms = j.at("arms");
  if (!arms.is_array() || arms.size() != 2) throw ConfigError("experiment needs exactly two arms");
  return ExperimentSpec({arms[0].value("label", std::string("a")), arms[0].at("config").get<ArchConfig>()},
                        {arms[1].value("label", std::string("b")), arms[1].at("config").get<ArchConfig>()}, o);
}

inline void to_json(nlohmann::json& j, const ArmRecord& a) {
  j = nlohmann::json{{"label", a.label},
                     {"config", a.config},
                     {"flops", a.flops},
                     {"params", a.params},
                     {"diverged", a.diverged},
                     {"initial_val_psnr", a.initial_val_psnr},
                     {"train_psnr", a.train_psnr},
                     {"val_psnr", a.val_psnr},
                     {"val_ssim", a.val_ssim},
                     {"loss_curve", a.loss_curve}};
  if (a.diverged) {
    j["diverged_step"] = a.diverged_step;
    j["error"] = a.error;
  }
}

inline void from_json(const nlohmann::json& j, ArmRecord& a) {
  a = ArmRecord{};
  j.at("label").get_to(a.label);
  j.at("config").get_to(a.config);
  j.at("flops").get_to(a.flops);
  j.at("params").get_to(a.params);
  j.at("diverged").get_to(a.diverged);
  j.at("initial_val_psnr").get_to(a.initial_val_psnr);
  j.at("train_psnr").get_to(a.train_psnr);
  j.at("val_psnr").get_to(a.val_psnr);
  j.at("val_ssim").get_to(a.val_ssim);
  j.at("loss_curve").get_to(a.loss_curve);
  if (a.diverged) {
    a.diverged_step = j.value("diverged_step", std::size_t{0});
    a.error = j.value("error", std::string());
  }
}

inline void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"format", "jd3net-run-record"},
                     {"arms", r.arms},
                     {"baseline_val_psnr", r.baseline_val_psnr},
                     {"baseline_val_ssim", r.baseline_val_ssim},
                     {"downsampling_gap_db", r.gap_db},
                     {"seed", r.seed}};
  if (r.spec) j["spec"] = *r.spec;
}

inline void from_json(const nlohmann::json& j, RunRecord& r) {
  r = RunRecord{};
  if (j.contains("spec")) r.spec = experiment_from_json(j.at("spec"));
  r.arms[0] = j.at("arms").at(0).get<ArmRecord>();
  r.arms[1] = j.at("arms").at(1).get<ArmRecord>();
  j.at("baseline_val_psnr").get_to(r.baseline_val_psnr);
  j.at("baseline_val_ssim").get_to(r.baseline_val_ssim);
  j.at("downsampling_gap_db").get_to(r.gap_db);
  j.at("seed").get_to(r.seed);
}

inline void to_json(nlohmann::json& j, const ToyTrainSpec& s) {
  j = nlohmann::json{{"config", s.config},       {"with_sca", s.with_sca},       {"pattern", s.pattern},
                     {"noise", s.noise},         {"patch", s.patch},             {"append_cfa", s.append_cfa},
                     {"seed", s.seed},           {"train_count", s.train_count}, {"val_count", s.val_count},
                     {"train", s.train}};
}

/// Missing keys take their defaults.
inline void from_json(const nlohmann::json& j, ToyTrainSpec& s) {
  s = ToyTrainSpec{};
  if (j.contains("config")) j.at("config").get_to(s.config);
  if (j.contains("with_sca")) j.at("with_sca").get_to(s.with_sca);
  if (j.contains("pattern")) j.at("pattern").get_to(s.pattern);
  if (j.contains("noise")) j.at("noise").get_to(s.noise);
  if (j.contains("patch")) j.at("patch").get_to(s.patch);
  if (j.contains("append_cfa")) j.at("append_cfa").get_to(s.append_cfa);
  if (j.contains("seed")) j.at("seed").get_to(s.seed);
  if (j.contains("train_count")) j.at("train_count").get_to(s.train_count);
  if (j.contains("val_count")) j.at("val_count").get_to(s.val_count);
  if (j.contains("train")) {
    nlohmann::json merged = s.train;
    merged.update(j.at("train"));
    s.train = merged.get<TrainOptions>();
  }
}

inline void to_json(nlohmann::json& j, const ToyTrainRecord& r) {
  j = nlohmann::json{{"format", "jd3net-toy-record"},
                     {"spec", r.spec},
                     {"flops", r.flops},
                     {"params", r.params},
                     {"diverged", r.diverged},
                     {"initial_train_psnr", r.initial_train_psnr},
                     {"train_psnr", r.train_psnr},
                     {"baseline_train_psnr", r.baseline_train_psnr},
                     {"val_psnr", r.val_psnr},
                     {"val_ssim", r.val_ssim},
                     {"baseline_val_psnr", r.baseline_val_psnr},
                     {"loss_curve", r.loss_curve}};
  if (r.diverged) {
    j["diverged_step"] = r.diverged_step;
    j["error"] = r.error;
  }
}

}  // namespace jd3

#endif  // JD3_HARNESS_HPP_
