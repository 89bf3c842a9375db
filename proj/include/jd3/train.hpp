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

#ifndef JD3_TRAIN_HPP_
#define JD3_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jd3/metrics.hpp"
#include "jd3/network.hpp"

namespace jd3 {

template <Real T>
struct Sample {
  Tensor<T> input;   // (1, c_in, h, w)
  Tensor<T> target;  // (1, 3, h, w)
};

template <Real T>
using Dataset = std::vector<Sample<T>>;

/// Thrown when the loss turns NaN/Inf; carries the offending step.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : NumericError("training diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

enum class LrSchedule { constant, cosine };

inline std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

inline LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw std::invalid_argument("unknown lr schedule '" + s + "'");
}

struct TrainOptions {
  LossKind loss = LossKind::mse;
  double lr = 1e-3;
  std::size_t steps = 1000;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LrSchedule schedule = LrSchedule::constant;

  /// Learning rate used for update `step` (0-based); cosine decays to 0.
  double lr_at(std::size_t step) const {
    if (schedule == LrSchedule::constant || steps == 0) return lr;
    return 0.5 * lr * (1 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(steps)));
  }
};

/// Adam with bias correction. State is laid out in visit_parameters order.
template <Real T>
class Adam {
 public:
  Adam(const JD3NetParams<T>& params, const TrainOptions& opt) : opt_(opt) {
    visit_parameters(params, [&](const std::string&, const Tensor<T>& t) {
      m_.emplace_back(t.size(), 0.0);
      v_.emplace_back(t.size(), 0.0);
    });
  }

  void step(JD3NetParams<T>& params, const JD3NetParams<T>& grads) { step(params, grads, opt_.lr); }

  void step(JD3NetParams<T>& params, const JD3NetParams<T>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    std::vector<const Tensor<T>*> gs;
    visit_parameters(grads, [&](const std::string&, const Tensor<T>& g) { gs.push_back(&g); });
    std::size_t k = 0;
    visit_parameters(params, [&](const std::string&, Tensor<T>& p) {
      const Tensor<T>& g = *gs[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        m[i] = opt_.beta1 * m[i] + (1 - opt_.beta1) * gi;
        v[i] = opt_.beta2 * v[i] + (1 - opt_.beta2) * gi * gi;
        const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt_.eps);
        p[i] = static_cast<T>(p[i] - update);
      }
      ++k;
    });
  }

 private:
  TrainOptions opt_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

/// Deterministic minibatch order: reshuffle each pass over the data with a
/// generator seeded from `seed`, and take consecutive chunks.
class BatchSampler {
 public:
  BatchSampler(std::size_t count, std::size_t batch, std::uint64_t seed)
      : order_(count), batch_(std::min(batch, count)), rng_(seed) {
    if (count == 0) throw std::invalid_argument("BatchSampler: empty dataset");
    if (batch == 0) throw std::invalid_argument("BatchSampler: batch must be positive");
    reshuffle();
  }

  std::vector<std::size_t> next() {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    while (out.size() < batch_) {
      if (pos_ == order_.size()) reshuffle();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

template <Real T>
std::pair<Tensor<T>, Tensor<T>> make_batch(const Dataset<T>& data, const std::vector<std::size_t>& idx) {
  std::vector<const Tensor<T>*> ins, tgs;
  for (std::size_t i : idx) {
    ins.push_back(&data[i].input);
    tgs.push_back(&data[i].target);
  }
  return {concat_batch<T>(ins), concat_batch<T>(tgs)};
}

template <Real T>
struct TrainResult {
  JD3NetParams<T> params;
  std::vector<double> loss_curve;  // one value per step, before the update
};

template <Real T>
void check_dataset(const Dataset<T>& data) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  const Shape si = data.front().input.shape();
  const Shape st = data.front().target.shape();
  for (const auto& s : data) {
    if (s.input.shape() != si || s.target.shape() != st) {
      throw ShapeError("train: dataset pairs are not shape-consistent");
    }
  }
}

template <Real T>
TrainResult<T> train_adam(JD3NetParams<T> params, const Dataset<T>& data, const TrainOptions& opt) {
  check_dataset(data);
  Adam<T> adam(params, opt);
  BatchSampler sampler(data.size(), opt.batch, opt.seed);
  TrainResult<T> r;
  r.loss_curve.reserve(opt.steps);
  for (std::size_t step = 0; step < opt.steps; ++step) {
    auto [x, y] = make_batch(data, sampler.next());
    ForwardCache<T> cache;
    Tensor<T> pred;
    try {
      pred = forward(params, x, &cache);
    } catch (const NumericError& e) {
      throw TrainingDiverged(step, e.what());
    }
    Tensor<T> grad;
    const double loss = compute_loss(opt.loss, pred, y, &grad);
    if (!std::isfinite(loss)) throw TrainingDiverged(step, "non-finite loss");
    r.loss_curve.push_back(loss);
    if (opt.lr == 0) continue;
    JD3NetParams<T> g = backward(params, cache, grad);
    adam.step(params, g, opt.lr_at(step));
  }
  r.params = std::move(params);
  return r;
}

/// Runs the network over every sample and returns the mean PSNR (peak 1).
template <Real T>
double mean_psnr(const JD3NetParams<T>& params, const Dataset<T>& data) {
  if (data.empty()) return 0;
  double acc = 0;
  for (const auto& s : data) acc += psnr(forward(params, s.input), s.target);
  return acc / static_cast<double>(data.size());
}

}  // namespace jd3

#endif  // JD3_TRAIN_HPP_
