// Copyright 2026 The riskdiff Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RISKDIFF__TRAIN__BASELINE_HPP_
#define RISKDIFF__TRAIN__BASELINE_HPP_

#include "riskdiff/autodiff/adam.hpp"
#include "riskdiff/autodiff/nn.hpp"
#include "riskdiff/autodiff/ops.hpp"
#include "riskdiff/data/scene.hpp"
#include "riskdiff/model/features.hpp"
#include "riskdiff/train/metrics.hpp"
#include "riskdiff/util/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace riskdiff::train
{

struct BaselineConfig
{
  std::size_t hidden = 32;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  // predict a residual on top of constant-velocity extrapolation
  bool kinematic_prior = true;
};

/// Single-layer GRU encoder-decoder trained with MSE on positions. It only
/// scores how hard a scene is.
class BaselinePredictor
{
public:
  using T = float;

  BaselinePredictor(const model::FeatureScales & scales, const BaselineConfig & cfg)
  : cfg_(cfg), scales_(scales)
  {
    if (cfg.hidden == 0 || cfg.batch_size == 0) {
      throw std::invalid_argument("baseline: hidden and batch_size must be positive");
    }
    auto rng = substream(cfg.seed, "baseline.init");
    const std::size_t h = cfg.hidden;
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    enc_in_ = ad::make_linear(params_, "baseline.enc.input", 2, 3 * h, rng);
    enc_wh_ = params_.add_uniform("baseline.enc.wh", ad::Shape{h, 3 * h}, bound, rng);
    enc_bh_ = params_.add_zeros("baseline.enc.bh", ad::Shape{3 * h});
    dec_in_ = ad::make_linear(params_, "baseline.dec.input", h, 3 * h, rng);
    dec_step_ = params_.add_uniform("baseline.dec.step", ad::Shape{3 * h}, 1.0, rng);
    dec_wh_ = params_.add_uniform("baseline.dec.wh", ad::Shape{h, 3 * h}, bound, rng);
    dec_bh_ = params_.add_zeros("baseline.dec.bh", ad::Shape{3 * h});
    out_ = ad::make_linear(params_, "baseline.out", h, 2, rng);
    scale_ = ad::Tensor<T>({2}, {static_cast<T>(scales.future_dx), static_cast<T>(scales.future_dy)});
  }

  bool trained() const { return trained_; }
  const std::vector<double> & epoch_losses() const { return losses_; }

  /// Fits on the given scenes; returns the final-epoch mean loss.
  double fit(std::span<const data::Scene> scenes)
  {
    if (scenes.empty()) {
      throw std::invalid_argument("baseline: no training scenes");
    }
    ad::AdamConfig ac;
    ac.lr = cfg_.lr;
    ad::AdamState<T> adam(params_, ac);
    ad::Tape<T> tape;
    std::vector<std::size_t> idx(scenes.size());
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      auto rng = substream(cfg_.seed, "baseline.shuffle", {epoch});
      rng.shuffle(idx);
      double total = 0.0;
      for (std::size_t lo = 0; lo < idx.size(); lo += cfg_.batch_size) {
        const std::size_t hi = std::min(idx.size(), lo + cfg_.batch_size);
        std::vector<data::Scene> batch;
        for (std::size_t i = lo; i < hi; ++i) {
          batch.push_back(scenes[idx[i]]);
        }
        ad::TapeScope<T> scope(tape);
        const auto pred = forward(batch);
        const auto loss = ad::mean(ad::square(ad::sub(pred, targets(batch))));
        params_.zero_grad();
        tape.backward(loss);
        tape.clear();
        adam.step(params_);
        total += static_cast<double>(loss.item()) * static_cast<double>(hi - lo);
      }
      losses_.push_back(total / static_cast<double>(scenes.size()));
    }
    trained_ = true;
    return losses_.back();
  }

  /// One 50-step absolute trajectory per scene.
  std::vector<Trajectory> predict(std::span<const data::Scene> scenes) const
  {
    if (!trained_) {
      throw std::logic_error("baseline: predict called before fit");
    }
    ad::NoGradScope<T> ng;
    std::vector<Trajectory> out;
    for (std::size_t lo = 0; lo < scenes.size(); lo += 256) {
      const auto part = scenes.subspan(lo, std::min<std::size_t>(256, scenes.size() - lo));
      const auto pred = forward(part);
      const auto v = pred.values();
      for (std::size_t i = 0; i < part.size(); ++i) {
        Trajectory t(data::kFutureLen);
        for (std::size_t k = 0; k < data::kFutureLen; ++k) {
          const std::size_t o = (i * data::kFutureLen + k) * 2;
          t[k] = {part[i].anchor().x + v[o], part[i].anchor().y + v[o + 1]};
        }
        out.push_back(std::move(t));
      }
    }
    return out;
  }

  /// Per-scene FDE of the baseline prediction.
  std::vector<double> fde(std::span<const data::Scene> scenes) const
  {
    const auto preds = predict(scenes);
    std::vector<double> out(scenes.size());
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      out[i] = train::fde(preds[i], scenes[i].future);
    }
    return out;
  }

private:
  /// Positions relative to the anchor, [B, 50, 2] in metres.
  ad::Tensor<T> forward(std::span<const data::Scene> scenes) const
  {
    const std::size_t b = scenes.size();
    const std::size_t h = cfg_.hidden;
    std::vector<T> x(b * data::kHistoryLen * 2);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < data::kHistoryLen; ++k) {
        const std::size_t o = (i * data::kHistoryLen + k) * 2;
        x[o] = static_cast<T>(scenes[i].delta_history[k].x / scales_.history_inc_x);
        x[o + 1] = static_cast<T>(scenes[i].delta_history[k].y / scales_.history_inc_y);
      }
    }
    const auto gx = enc_in_(ad::Tensor<T>({b, data::kHistoryLen, 2}, std::move(x)));
    auto state = ad::Tensor<T>::zeros({b, h});
    for (std::size_t k = 0; k < data::kHistoryLen; ++k) {
      state = ad::gru_cell(ad::reshape(ad::slice(gx, 1, k, k + 1), ad::Shape{b, 3 * h}), state,
                           enc_wh_, enc_bh_);
    }
    const auto dx = dec_in_(state);
    std::vector<ad::Tensor<T>> steps;
    for (std::size_t k = 0; k < data::kFutureLen; ++k) {
      const T pos = static_cast<T>(k + 1) / static_cast<T>(data::kFutureLen);
      state = ad::gru_cell(ad::add_bias(dx, ad::scale(dec_step_, pos)), state, dec_wh_, dec_bh_);
      steps.push_back(ad::reshape(out_(state), ad::Shape{b, 1, 2}));
    }
    auto disp = ad::mul_bias(ad::concat(steps, 1), scale_);
    if (cfg_.kinematic_prior) {
      std::vector<T> cv(b * data::kFutureLen * 2);
      for (std::size_t i = 0; i < b; ++i) {
        const auto & last = scenes[i].delta_history.back();
        for (std::size_t k = 0; k < data::kFutureLen; ++k) {
          cv[(i * data::kFutureLen + k) * 2] = static_cast<T>(last.x);
          cv[(i * data::kFutureLen + k) * 2 + 1] = static_cast<T>(last.y);
        }
      }
      disp = ad::add(disp, ad::Tensor<T>({b, data::kFutureLen, 2}, std::move(cv)));
    }
    return ad::cumsum(disp, 1);
  }

  static ad::Tensor<T> targets(std::span<const data::Scene> scenes)
  {
    std::vector<T> y(scenes.size() * data::kFutureLen * 2);
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      for (std::size_t k = 0; k < data::kFutureLen; ++k) {
        const std::size_t o = (i * data::kFutureLen + k) * 2;
        y[o] = static_cast<T>(scenes[i].future[k].x - scenes[i].anchor().x);
        y[o + 1] = static_cast<T>(scenes[i].future[k].y - scenes[i].anchor().y);
      }
    }
    return ad::Tensor<T>({scenes.size(), data::kFutureLen, 2}, std::move(y));
  }

  BaselineConfig cfg_;
  model::FeatureScales scales_;
  ad::ParamSet<T> params_;
  ad::Linear<T> enc_in_, dec_in_, out_;
  ad::Tensor<T> enc_wh_, enc_bh_, dec_step_, dec_wh_, dec_bh_, scale_;
  bool trained_ = false;
  std::vector<double> losses_;
};

}  // namespace riskdiff::train

#endif  // RISKDIFF__TRAIN__BASELINE_HPP_
