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

// jd3net: command-line front end for search, cost model, CFA simulation,
// gradient checks, toy training and reporting.
//
// Exit codes: 0 success, 1 domain error (one JSON line on stderr),
// 2 usage error. Artifacts go under --out only.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jd3/cfa.hpp"
#include "jd3/gradcheck_suite.hpp"
#include "jd3/harness.hpp"
#include "jd3/image_io.hpp"
#include "jd3/metrics.hpp"
#include "jd3/network.hpp"
#include "jd3/parallel.hpp"
#include "jd3/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------------------------------------------ errors

/// Domain failure with a short machine-readable kind.
class DomainError : public std::runtime_error {
 public:
  DomainError(std::string kind, const std::string& msg) : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// ------------------------------------------------------- JSON config

// --config file: {"seed": 1, "search": {"budget-gflops": 128}}. Objects
// address subcommands; arrays feed multi-value options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& is) const override {
    json j;
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config: top level must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [k, v] : obj.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(k);
        collect(v, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = k;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(v));
      }
      out.push_back(std::move(item));
    }
  }
};

// ------------------------------------------------------------ output

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string precision = "standard";
  std::string out = ".";
};

bool has_extension(const std::string& p) {
  static const std::vector<std::string> exts{".json", ".csv", ".png", ".pfm", ".tensor"};
  const std::string e = fs::path(p).extension().string();
  return std::find(exts.begin(), exts.end(), e) != exts.end();
}

/// --out is either a directory or, when it carries a known extension, the
/// primary artifact; side artifacts then share its directory and stem.
class OutputPaths {
 public:
  OutputPaths(const std::string& out, const std::string& default_name) {
    if (has_extension(out)) {
      primary_ = fs::path(out);
      dir_ = primary_.parent_path().empty() ? fs::path(".") : primary_.parent_path();
      stem_ = primary_.stem().string();
    } else {
      dir_ = fs::path(out);
      primary_ = dir_ / default_name;
      stem_ = fs::path(default_name).stem().string();
    }
  }

  std::string primary() const { return primary_.string(); }
  std::string side(const std::string& suffix) const { return (dir_ / (stem_ + suffix)).string(); }
  void prepare() const { fs::create_directories(dir_); }

 private:
  fs::path primary_;
  fs::path dir_;
  std::string stem_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("io", "cannot write " + path);
  os << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

bool high_precision(const Globals& g) { return g.precision == "high"; }

// ------------------------------------------------- shared option sets

struct ConstraintFlags {
  std::size_t d_min = 1, d_max = 4, grid = 4;
  std::size_t w_min = 8, w_max = 512, b_min = 4, b_max = 512;
  std::size_t c_in = 1, top_n = 10;
  std::size_t ref_h = 256, ref_w = 256;
  std::string convention = "macs_plus_bias";

  void add(CLI::App* app) {
    app->add_option("--d-min", d_min, "smallest downsampling ratio d")->capture_default_str();
    app->add_option("--d-max", d_max, "largest downsampling ratio d")->capture_default_str();
    app->add_option("--grid", grid, "w and B step (channels / blocks)")->capture_default_str();
    app->add_option("--w-min", w_min, "smallest trunk width (channels)")->capture_default_str();
    app->add_option("--w-max", w_max, "largest trunk width (channels)")->capture_default_str();
    app->add_option("--b-min", b_min, "fewest blocks")->capture_default_str();
    app->add_option("--b-max", b_max, "most blocks")->capture_default_str();
    app->add_option("--c-in", c_in, "network input channels")->capture_default_str();
    app->add_option("--ref-height-px", ref_h, "reference input height for the budget (pixels)")->capture_default_str();
    app->add_option("--ref-width-px", ref_w, "reference input width for the budget (pixels)")->capture_default_str();
    app->add_option("--convention", convention, "FLOPs convention: macs_plus_bias | macs_only")
        ->check(CLI::IsMember({"macs_plus_bias", "macs_only"}))
        ->capture_default_str();
    app->add_option("--top-n", top_n, "frontier length (configs)")->capture_default_str();
  }

  jd3::SearchConstraints constraints(double budget, double rho) const {
    jd3::SearchConstraints c;
    c.budget_gflops = budget;
    c.rho = rho;
    c.d_min = d_min;
    c.d_max = d_max;
    c.grid = grid;
    c.w_min = w_min;
    c.w_max = w_max;
    c.b_min = b_min;
    c.b_max = b_max;
    c.c_in = c_in;
    c.ref_h = ref_h;
    c.ref_w = ref_w;
    c.top_n = top_n;
    c.convention = jd3::flops_convention_from_string(convention);
    return c;
  }
};

struct ArchFlags {
  std::size_t d = 4, w = 128, blocks = 152, c_in = 1, c_out = 3;
  bool sca = false;

  void add(CLI::App* app, bool with_io = true) {
    app->add_option("--d", d, "downsampling ratio")->capture_default_str();
    app->add_option("--w", w, "trunk width (channels)")->capture_default_str();
    app->add_option("--blocks", blocks, "number of blocks B")->capture_default_str();
    if (with_io) {
      app->add_option("--c-in", c_in, "input channels")->capture_default_str();
      app->add_option("--c-out", c_out, "output channels")->capture_default_str();
    }
    app->add_flag("--sca", sca, "include simple channel attention (ablation)");
  }

  jd3::ArchConfig config() const {
    jd3::ArchConfig c;
    c.d = d;
    c.w = w;
    c.blocks = blocks;
    c.c_in = c_in;
    c.c_out = c_out;
    c.validate();
    return c;
  }
};

// -------------------------------------------------------- subcommands

struct SearchCmd {
  double budget = 25, rho = 1.0;
  ConstraintFlags cf;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("search", "highest-entropy configuration under a FLOPs budget");
    s->add_option("--budget-gflops", budget, "budget in GFLOPs at the reference resolution")->capture_default_str();
    s->add_option("--rho", rho, "maximum depth-to-width ratio B/w")->capture_default_str();
    cf.add(s);
    cmd = s;
  }

  void run(const Globals& g) const {
    const auto c = cf.constraints(budget, rho);
    const auto r = jd3::solve(c);
    if (!r.feasible) {
      throw DomainError("infeasible", "no configuration fits " + std::to_string(budget) + " GFLOPs at rho " +
                                          std::to_string(rho));
    }
    const OutputPaths out(g.out, "search.json");
    out.prepare();
    const json j = r;
    write_json(out.primary(), j);
    std::cout << json{{"d", r.best.d}, {"w", r.best.w}, {"B", r.best.blocks}, {"gflops", r.best_flops.gflops()},
                      {"entropy", r.best_entropy.H}}
                     .dump()
              << "\n";
  }

  CLI::App* cmd = nullptr;
};

struct SweepCmd {
  std::vector<double> budgets{25, 128};
  std::vector<double> rhos{0.5, 0.7, 1.0, 1.2, 1.5};
  ConstraintFlags cf;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("sweep", "search over a grid of budgets and ratios");
    s->add_option("--budgets-gflops,--budgets", budgets, "budgets in GFLOPs (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    s->add_option("--rhos", rhos, "depth-to-width ratios (comma separated)")->delimiter(',')->capture_default_str();
    cf.add(s);
    cmd = s;
  }

  void run(const Globals& g) const {
    const auto rows = jd3::sweep(budgets, rhos, cf.constraints(budgets.front(), rhos.front()));
    const OutputPaths out(g.out, "sweep.json");
    out.prepare();
    write_json(out.primary(), json{{"rows", rows}});
    const auto table = jd3::report_from_sweep(rows, cf.d_max == cf.d_min ? "d=" + std::to_string(cf.d_min) : "sweep");
    write_text(out.side(".csv"), jd3::to_csv(table));
    std::cout << jd3::to_csv(table);
  }

  CLI::App* cmd = nullptr;
};

struct FlopsCmd {
  ArchFlags af;
  std::size_t h = 256, w = 256;
  std::string convention = "macs_plus_bias";

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("flops", "FLOPs, MACs and parameter count of a configuration");
    af.add(s);
    s->add_option("--height-px", h, "input height (pixels)")->capture_default_str();
    s->add_option("--width-px", w, "input width (pixels)")->capture_default_str();
    s->add_option("--convention", convention, "macs_plus_bias | macs_only")
        ->check(CLI::IsMember({"macs_plus_bias", "macs_only"}))
        ->capture_default_str();
    cmd = s;
  }

  void run(const Globals& g) const {
    const auto c = af.config();
    const auto f = jd3::flops(c, h, w, jd3::flops_convention_from_string(convention));
    const json j{{"config", c}, {"with_sca", af.sca}, {"flops", f}, {"gflops", f.gflops()},
                 {"params", jd3::params(c, af.sca)}};
    const OutputPaths out(g.out, "flops.json");
    out.prepare();
    write_json(out.primary(), j);
    std::cout << json{{"gflops", f.gflops()}, {"macs", f.total_macs}, {"params", jd3::params(c, af.sca)}}.dump()
              << "\n";
  }

  CLI::App* cmd = nullptr;
};

struct EntropyCmd {
  ArchFlags af;
  std::string kind = "modified";
  std::size_t h = 256, w = 256;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("entropy", "entropy score of a configuration");
    af.add(s);
    s->add_option("--kind", kind, "modified (resolution-free) | deepmad")
        ->check(CLI::IsMember({"modified", "deepmad"}))
        ->capture_default_str();
    s->add_option("--height-px", h, "input height for deepmad (pixels)")->capture_default_str();
    s->add_option("--width-px", w, "input width for deepmad (pixels)")->capture_default_str();
    cmd = s;
  }

  void run(const Globals& g) const {
    const auto c = af.config();
    const auto e = kind == "modified" ? jd3::entropy_modified(c) : jd3::entropy_deepmad(c, h, w);
    const OutputPaths out(g.out, "entropy.json");
    out.prepare();
    write_json(out.primary(), json{{"config", c}, {"entropy", e}});
    std::cout << json{{"H", e.H}, {"sum_term", e.sum_term}, {"density_term", e.density_term}}.dump() << "\n";
  }

  CLI::App* cmd = nullptr;
};

struct PatternFlags {
  std::string pattern = "bayer";
  std::size_t phase_row = 0, phase_col = 0;

  void add(CLI::App* s) {
    s->add_option("--pattern", pattern, "bayer | quad | nona | hybridevs | path to pattern JSON")
        ->capture_default_str();
    s->add_option("--phase-row", phase_row, "tile origin row offset (pixels)")->capture_default_str();
    s->add_option("--phase-col", phase_col, "tile origin column offset (pixels)")->capture_default_str();
  }

  jd3::Phase phase() const { return {phase_row, phase_col}; }
};

struct MosaicCmd {
  std::string in;
  PatternFlags pf;
  std::string noise = "none";
  bool append = false;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("mosaic", "sample an RGB image through a CFA");
    s->add_option("--in", in, "RGB image in [0, 1] (png, pfm, tensor)")->required();
    pf.add(s);
    s->add_option("--noise", noise, "none | iso400 | iso800 | iso1600 | iso3200 (uses --seed)")
        ->capture_default_str();
    s->add_flag("--append-cfa", append, "also write the raw stacked with one-hot CFA planes");
    cmd = s;
  }

  template <jd3::Real T>
  void run_typed(const Globals& g) const {
    const auto rgb = jd3::load_image<T>(in);
    if (rgb.shape().c != 3) throw jd3::ShapeError("mosaic: input must have 3 channels, got " + rgb.shape().str());
    const auto pattern = jd3::pattern_by_name(pf.pattern);
    auto m = jd3::mosaic(rgb, pattern, pf.phase());
    const auto preset = jd3::noise_preset(noise);
    if (preset.gain > 0 || preset.read_sigma > 0) m = jd3::add_noise(m, preset.gain, preset.read_sigma, g.seed);
    const OutputPaths out(g.out, "mosaic.tensor");
    out.prepare();
    jd3::save_image(out.primary(), m.raw);
    json meta{{"pattern", jd3::pattern_to_json(pattern)},
              {"phase", {m.phase.row, m.phase.col}},
              {"noise", {{"preset", noise}, {"gain", m.noise.gain}, {"read_sigma", m.noise.read_sigma},
                         {"seed", m.noise.seed}, {"applied", m.noise.applied}}},
              {"shape", {m.raw.shape().n, m.raw.shape().c, m.raw.shape().h, m.raw.shape().w}},
              {"raw", fs::path(out.primary()).filename().string()}};
    if (append) {
      jd3::save_tensor(out.side(".input.tensor"), jd3::append_cfa(m));
      meta["input"] = fs::path(out.side(".input.tensor")).filename().string();
    }
    write_json(out.side(".meta.json"), meta);
    std::cout << meta.dump() << "\n";
  }

  void run(const Globals& g) const { high_precision(g) ? run_typed<double>(g) : run_typed<float>(g); }

  CLI::App* cmd = nullptr;
};

struct DemosaicCmd {
  std::string in;
  PatternFlags pf;
  std::string method = "bilinear";
  std::string checkpoint;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("demosaic", "reconstruct RGB from a raw mosaic");
    s->add_option("--in", in, "raw mosaic, 1 channel or raw+CFA planes (png, pfm, tensor)")->required();
    pf.add(s);
    s->add_option("--method", method, "bilinear | network")
        ->check(CLI::IsMember({"bilinear", "network"}))
        ->capture_default_str();
    s->add_option("--checkpoint", checkpoint, "checkpoint directory (network method)");
    cmd = s;
  }

  template <jd3::Real T>
  void run_typed(const Globals& g) const {
    auto x = jd3::load_image<T>(in);
    if (x.shape().c != 1 && x.shape().c != 1 + jd3::kCfaPlanes) {
      throw jd3::ShapeError("demosaic: input must have 1 or 5 channels, got " + x.shape().str());
    }
    const auto pattern = jd3::pattern_by_name(pf.pattern);
    jd3::Tensor<T> raw(jd3::Shape{x.shape().n, 1, x.shape().h, x.shape().w});
    for (std::size_t n = 0; n < x.shape().n; ++n)
      std::copy(x.plane(n, 0), x.plane(n, 0) + x.shape().plane(), raw.plane(n, 0));
    jd3::Tensor<T> rgb;
    if (method == "bilinear") {
      rgb = jd3::bilinear_demosaic(jd3::MosaicImage<T>{raw, pattern, pf.phase(), {}});
    } else {
      if (checkpoint.empty()) throw DomainError("usage", "--method network needs --checkpoint");
      const auto p = jd3::load_checkpoint<T>(checkpoint);
      auto [padded, rec] = jd3::pad_to_multiple(raw, p.config.d);
      jd3::MosaicImage<T> m{padded, pattern, pf.phase(), {}};
      jd3::Tensor<T> input = p.config.c_in == 1 ? padded : jd3::append_cfa(m);
      rgb = jd3::crop(jd3::forward(p, input), rec);
    }
    const OutputPaths out(g.out, "demosaic.png");
    out.prepare();
    for (auto& v : rgb.data()) v = std::clamp(v, T(0), T(1));
    jd3::save_image(out.primary(), rgb);
    std::cout << json{{"out", fs::path(out.primary()).filename().string()},
                      {"shape", {rgb.shape().n, rgb.shape().c, rgb.shape().h, rgb.shape().w}}}
                     .dump()
              << "\n";
  }

  void run(const Globals& g) const { high_precision(g) ? run_typed<double>(g) : run_typed<float>(g); }

  CLI::App* cmd = nullptr;
};

struct GradcheckCmd {
  bool all = false;
  std::vector<std::string> ops;
  jd3::GradCheckOptions o;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("gradcheck", "finite-difference checks of every backward pass (64-bit)");
    auto* a = s->add_flag("--all", all, "run every op (the default when --op is absent)");
    s->add_option("--op", ops, "ops to check: conv2d depthwise_conv layer_norm simple_gate avg_pool "
                               "channel_scale pixel_shuffle psnr_loss network")
        ->excludes(a)
        ->check(CLI::IsMember(jd3::gradcheck_ops()));
    s->add_option("--trials", o.trials, "random shapes per op")->capture_default_str();
    s->add_option("--shuffle-trials", o.shuffle_trials, "random pixel-shuffle inverse checks")->capture_default_str();
    s->add_option("--tolerance", o.tolerance, "max relative error")->capture_default_str();
    s->add_option("--step", o.eps, "finite-difference step")->capture_default_str();
    cmd = s;
  }

  int run(const Globals& g) {
    o.seed = g.seed;
    o.ops = ops;
    const auto rep = jd3::run_gradcheck_suite(o);
    const OutputPaths out(g.out, "gradcheck.json");
    out.prepare();
    write_json(out.primary(), rep);
    std::cout << json{{"checks_run", rep.total()}, {"failures", rep.failures()}, {"worst_rel_error", rep.worst()}}.dump()
              << "\n";
    if (rep.failures() > 0) {
      throw DomainError("gradcheck_failed", std::to_string(rep.failures()) + " of " + std::to_string(rep.total()) +
                                                " checks failed");
    }
    return 0;
  }

  CLI::App* cmd = nullptr;
};

struct ToyFlags {
  std::string pattern = "bayer", noise = "none", loss = "psnr_loss", schedule = "constant";
  std::size_t patch = 48, train_count = 0, val_count = 0, steps = 0, batch = 8;
  double lr = 1e-3;
  bool no_append = false;

  void add(CLI::App* s, std::size_t default_train, std::size_t default_val, std::size_t default_steps) {
    train_count = default_train;
    val_count = default_val;
    steps = default_steps;
    s->add_option("--pattern", pattern, "CFA pattern")->capture_default_str();
    s->add_option("--noise", noise, "noise preset")->capture_default_str();
    s->add_option("--patch-px", patch, "patch side (pixels, >= 16)")->capture_default_str();
    s->add_option("--train-count", train_count, "training patches")->capture_default_str();
    s->add_option("--val-count", val_count, "held-out patches")->capture_default_str();
    s->add_option("--steps", steps, "Adam steps")->capture_default_str();
    s->add_option("--batch", batch, "patches per step")->capture_default_str();
    s->add_option("--lr", lr, "Adam learning rate (per step)")->capture_default_str();
    s->add_option("--schedule", schedule, "constant | cosine")
        ->check(CLI::IsMember({"constant", "cosine"}))
        ->capture_default_str();
    s->add_option("--loss", loss, "mse | psnr_loss")->check(CLI::IsMember({"mse", "psnr_loss"}))->capture_default_str();
    s->add_flag("--no-append-cfa", no_append, "feed the raw mosaic only (c_in = 1)");
  }

  jd3::TrainOptions train(std::uint64_t seed) const {
    jd3::TrainOptions t;
    t.loss = jd3::loss_from_string(loss);
    t.lr = lr;
    t.steps = steps;
    t.batch = batch;
    t.seed = seed;
    t.schedule = jd3::lr_schedule_from_string(schedule);
    return t;
  }
};

struct TrainToyCmd {
  std::string spec_path;
  ArchFlags af{2, 16, 2};
  ToyFlags tf;
  bool save_ckpt = false;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("train-toy", "train one network on procedural demosaicing patches");
    s->add_option("--spec", spec_path, "toy training spec JSON (overrides the flags below)")
        ->check(CLI::ExistingFile);
    af.add(s, false);
    tf.add(s, 8, 0, 2000);
    s->add_flag("--save-checkpoint", save_ckpt, "also write <stem>.ckpt/ next to the record");
    cmd = s;
  }

  template <jd3::Real T>
  void run_typed(const Globals& g, const jd3::ToyTrainSpec& spec) const {
    auto [rec, p] = jd3::run_toy_training<T>(spec);
    const OutputPaths out(g.out, "record.json");
    out.prepare();
    write_json(out.primary(), rec);
    if (save_ckpt) jd3::save_checkpoint(out.side(".ckpt"), p, spec.train.steps);
    std::cout << json{{"train_psnr", rec.train_psnr}, {"val_psnr", rec.val_psnr},
                      {"baseline_train_psnr", rec.baseline_train_psnr}, {"diverged", rec.diverged}}
                     .dump()
              << "\n";
  }

  void run(const Globals& g) const {
    jd3::ToyTrainSpec spec;
    if (!spec_path.empty()) {
      std::ifstream is(spec_path);
      spec = json::parse(is).get<jd3::ToyTrainSpec>();
    } else {
      spec.config = af.config();
      spec.with_sca = af.sca;
      spec.pattern = tf.pattern;
      spec.noise = tf.noise;
      spec.patch = tf.patch;
      spec.append_cfa = !tf.no_append;
      spec.seed = g.seed;
      spec.train_count = tf.train_count;
      spec.val_count = tf.val_count;
      spec.train = tf.train(g.seed);
    }
    high_precision(g) ? run_typed<double>(g, spec) : run_typed<float>(g, spec);
  }

  CLI::App* cmd = nullptr;
};

struct CompareCmd {
  std::string spec_path;
  ToyFlags tf;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("compare", "train two FLOP-matched arms and score them against bilinear");
    s->add_option("--spec", spec_path, "experiment spec JSON (default: d=1 vs d=2 pair with the flags below)")
        ->check(CLI::ExistingFile);
    const jd3::ExperimentOptions d;
    tf.lr = d.train.lr;
    tf.loss = jd3::to_string(d.train.loss);
    tf.schedule = jd3::to_string(d.train.schedule);
    tf.add(s, d.train_count, d.val_count, d.train.steps);
    cmd = s;
  }

  template <jd3::Real T>
  void run_typed(const Globals& g, const jd3::ExperimentSpec& spec) const {
    const auto rec = jd3::run_comparison<T>(spec);
    const OutputPaths out(g.out, "compare.json");
    out.prepare();
    write_json(out.primary(), rec);
    const std::vector<jd3::RunRecord> recs{rec};
    write_text(out.side(".csv"), jd3::to_csv(jd3::report_from_records(recs)));
    std::cout << jd3::to_csv(jd3::report_from_records(recs));
  }

  void run(const Globals& g) const {
    std::optional<jd3::ExperimentSpec> spec;
    if (!spec_path.empty()) {
      std::ifstream is(spec_path);
      spec = jd3::experiment_from_json(json::parse(is));
    } else {
      jd3::ExperimentOptions o;
      o.pattern = tf.pattern;
      o.noise = tf.noise;
      o.patch = tf.patch;
      o.append_cfa = !tf.no_append;
      o.seed = g.seed;
      o.train_count = tf.train_count;
      o.val_count = tf.val_count;
      o.train = tf.train(g.seed);
      spec = jd3::default_experiment(o);
    }
    high_precision(g) ? run_typed<double>(g, *spec) : run_typed<float>(g, *spec);
  }

  CLI::App* cmd = nullptr;
};

struct EvalCmd {
  std::string pred, gt;
  double peak = 1.0;
  bool csv = false;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("eval", "PSNR (dB) and SSIM of a prediction against ground truth");
    s->add_option("--pred", pred, "predicted image (png, pfm, tensor)")->required();
    s->add_option("--gt", gt, "ground-truth image (png, pfm, tensor)")->required();
    s->add_option("--peak", peak, "signal peak (1 for float images)")->capture_default_str();
    s->add_flag("--csv", csv, "also write <stem>.csv");
    cmd = s;
  }

  void run(const Globals& g) const {
    const auto a = jd3::load_image<double>(pred);
    const auto b = jd3::load_image<double>(gt);
    const auto r = jd3::evaluate(a, b, peak);
    const OutputPaths out(g.out, "eval.json");
    out.prepare();
    const json j = r;
    write_json(out.primary(), j);
    if (csv) {
      jd3::ReportTable t{"eval", {"pred", "gt", "psnr_db", "ssim", "mse"}, {}};
      t.rows.push_back({fs::path(pred).filename().string(), fs::path(gt).filename().string(), r.psnr, r.ssim, r.mse});
      write_text(out.side(".csv"), jd3::to_csv(t, 6));
    }
    std::cout << j.dump() << "\n";
  }

  CLI::App* cmd = nullptr;
};

struct ReportCmd {
  std::string sweep_path;
  std::vector<std::string> record_paths;
  bool search_table = false;
  int precision = 4;

  void add(CLI::App& root) {
    auto* s = root.add_subcommand("report", "CSV, JSON and plot triples from sweeps or comparison records");
    auto* grp = s->add_option_group("source", "exactly one input");
    grp->add_option("--sweep", sweep_path, "sweep.json from the sweep subcommand")->check(CLI::ExistingFile);
    grp->add_option("--records", record_paths, "compare.json files")->check(CLI::ExistingFile);
    grp->add_flag("--search-table", search_table, "regenerate the four-family search table at 256x256");
    grp->require_option(1);
    s->add_option("--digits", precision, "fractional digits in CSV cells")->capture_default_str();
    cmd = s;
  }

  void run(const Globals& g) const {
    jd3::ReportTable table;
    std::vector<jd3::PlotPoint> plot;
    if (search_table) {
      table = jd3::search_table();
      plot = jd3::search_plot(table);
    } else if (!sweep_path.empty()) {
      std::ifstream is(sweep_path);
      const json j = json::parse(is);
      const auto rows = j.at("rows").get<std::vector<jd3::SweepRow>>();
      table = jd3::report_from_sweep(rows);
      plot = jd3::search_plot(table);
    } else {
      std::vector<jd3::RunRecord> recs;
      for (const auto& p : record_paths) {
        std::ifstream is(p);
        recs.push_back(json::parse(is).get<jd3::RunRecord>());
      }
      table = jd3::report_from_records(recs);
      plot = jd3::loss_plot(recs);
    }
    const OutputPaths out(g.out, "report.csv");
    out.prepare();
    write_text(out.primary(), jd3::to_csv(table, precision));
    write_json(out.side(".json"), table);
    write_text(out.side(".plot.csv"), jd3::plot_csv(plot));
    std::cout << jd3::to_csv(table, precision);
  }

  CLI::App* cmd = nullptr;
};

void print_domain_error(const std::string& kind, const std::string& msg) {
  std::cerr << json{{"error", kind}, {"message", msg}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jd3net: downsampled isotropic demosaicing networks, search and toy experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with flag values; nested objects address subcommands");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  app.add_option("--seed", g.seed, "seed for data, init, noise and batch order")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (outputs are byte-stable at 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--precision", g.precision, "standard (32-bit) | high (64-bit)")
      ->check(CLI::IsMember({"standard", "high"}))
      ->capture_default_str();
  app.add_option("--out", g.out, "output directory, or primary output file when it has an extension")
      ->capture_default_str();

  SearchCmd search;
  SweepCmd sweep;
  FlopsCmd flops;
  EntropyCmd entropy;
  MosaicCmd mosaic;
  DemosaicCmd demosaic;
  GradcheckCmd gradcheck;
  TrainToyCmd train_toy;
  CompareCmd compare;
  EvalCmd eval;
  ReportCmd report;
  search.add(app);
  sweep.add(app);
  flops.add(app);
  entropy.add(app);
  mosaic.add(app);
  demosaic.add(app);
  gradcheck.add(app);
  train_toy.add(app);
  compare.add(app);
  eval.add(app);
  report.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  jd3::set_num_threads(g.threads);
  try {
    if (*search.cmd) search.run(g);
    if (*sweep.cmd) sweep.run(g);
    if (*flops.cmd) flops.run(g);
    if (*entropy.cmd) entropy.run(g);
    if (*mosaic.cmd) mosaic.run(g);
    if (*demosaic.cmd) demosaic.run(g);
    if (*gradcheck.cmd) gradcheck.run(g);
    if (*train_toy.cmd) train_toy.run(g);
    if (*compare.cmd) compare.run(g);
    if (*eval.cmd) eval.run(g);
    if (*report.cmd) report.run(g);
  } catch (const DomainError& e) {
    print_domain_error(e.kind(), e.what());
    return e.kind() == "usage" ? 2 : 1;
  } catch (const jd3::ShapeError& e) {
    print_domain_error("shape", e.what());
    return 1;
  } catch (const jd3::ConfigError& e) {
    print_domain_error("config", e.what());
    return 1;
  } catch (const jd3::FormatError& e) {
    print_domain_error("format", e.what());
    return 1;
  } catch (const jd3::NumericError& e) {
    print_domain_error("numeric", e.what());
    return 1;
  } catch (const json::exception& e) {
    print_domain_error("format", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    print_domain_error("invalid", e.what());
    return 1;
  }
  return 0;
}
