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

#ifndef RISKDIFF__AUTODIFF__ADAM_HPP_
#define RISKDIFF__AUTODIFF__ADAM_HPP_

#include "riskdiff/autodiff/nn.hpp"
#include "riskdiff/autodiff/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace riskdiff::ad
{

struct AdamConfig
{
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a flat parameter block. `step` is the
/// 1-based index of this update.
template <class T>
void adam_update(
  std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v,
  std::int64_t step, const AdamConfig & cfg)
{
  if (params.size() != m.size() || params.size() != v.size() ||
    (!grads.empty() && grads.size() != params.size()))
  {
    throw TensorError(
      "adam: shape mismatch (params " + std::to_string(params.size()) + ", grads " +
      std::to_string(grads.size()) + ", moments " + std::to_string(m.size()) + ")");
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads.empty() ? 0.0 : static_cast<double>(grads[i]);
    if (!std::isfinite(g)) {
      throw TensorError("adam: non-finite gradient");
    }
    const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double mhat = mi / c1;
    const double vhat = vi / c2;
    params[i] = static_cast<T>(
      static_cast<double>(params[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

/// Optimizer state for a ParamSet: first/second moments per parameter and the
/// update counter.
template <class T>
class AdamState
{
public:
  AdamState() = default;

  AdamState(const ParamSet<T> & params, AdamConfig cfg)
  : cfg_(cfg)
  {
    for (const auto & e : params.entries()) {
      first_.emplace_back(e.second.size(), T(0));
      second_.emplace_back(e.second.size(), T(0));
    }
  }

  void step(ParamSet<T> & params)
  {
    if (params.size() != first_.size()) {
      throw TensorError("adam: parameter set does not match optimizer state");
    }
    ++step_count_;
    std::size_t i = 0;
    for (const auto & e : params.entries()) {
      Tensor<T> p = e.second;
      if (first_[i].size() != p.size()) {
        throw TensorError("adam: moment shape mismatch for '" + e.first + "'");
      }
      std::span<const T> g = p.has_grad() ? p.grad() : std::span<const T>{};
      adam_update<T>(p.mutable_values(), g, first_[i], second_[i], step_count_, cfg_);
      ++i;
    }
  }

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t s) { step_count_ = s; }
  const AdamConfig & config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

  std::vector<std::vector<T>> & first_moments() { return first_; }
  std::vector<std::vector<T>> & second_moments() { return second_; }
  const std::vector<std::vector<T>> & first_moments() const { return first_; }
  const std::vector<std::vector<T>> & second_moments() const { return second_; }

private:
  AdamConfig cfg_{};
  std::int64_t step_count_ = 0;
  std::vector<std::vector<T>> first_;
  std::vector<std::vector<T>> second_;
};

}  // namespace riskdiff::ad

#endif  // RISKDIFF__AUTODIFF__ADAM_HPP_
