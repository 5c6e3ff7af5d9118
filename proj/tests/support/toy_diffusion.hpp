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

#ifndef RISKDIFF__TESTS__SUPPORT__TOY_DIFFUSION_HPP_
#define RISKDIFF__TESTS__SUPPORT__TOY_DIFFUSION_HPP_

#include "riskdiff/autodiff/adam.hpp"
#include "riskdiff/model/diffusion.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

namespace riskdiff::testing
{

/// Unconditional two-point task: x0 = +mu or -mu with equal probability.
struct ToyDiffusionResult
{
  double final_loss = 0.0;     // on a fresh 4096-row batch
  std::array<double, 2> centroid_error{};  // |c - (+mu)|, |c - (-mu)| after 2-means
  double within_fraction = 0.0;  // samples within 0.3 of the nearer target
  double seconds = 0.0;
};

inline ToyDiffusionResult run_toy_diffusion(
  std::uint64_t seed, std::size_t train_steps = 2000, std::size_t n_samples = 400)
{
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const std::array<double, 2> mu{1.5, -1.0};
  const auto schedule = model::make_schedule(50);

  auto init = substream(seed, "toy.init");
  ad::ParamSet<float> params;
  model::DenoiserConfig cfg;
  cfg.d_latent = 2;
  cfg.d_model = 32;
  cfg.heads = 4;
  cfg.d_ff = 64;
  cfg.blocks = 2;
  cfg.dropout = 0.0;
  model::Denoiser<float> net(params, cfg, init);
  // unconditional: a single all-zero condition token shared by every row
  const auto memory = net.prepare_memory(ad::Tensor<float>::zeros({1, 1, cfg.d_model}));

  auto predictor = [&](const ad::Tensor<float> & x, const std::vector<std::size_t> & steps) {
    const std::vector<std::size_t> owner(x.dim(0), 0);
    return net.predict_noise(x, steps, memory, ad::Tensor<float>{}, owner, nullptr, false);
  };
  auto draw_x0 = [&](Rng & rng, std::size_t n) {
    std::vector<float> v(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = rng.bernoulli(0.5) ? 1.0 : -1.0;
      v[2 * i] = static_cast<float>(s * mu[0]);
      v[2 * i + 1] = static_cast<float>(s * mu[1]);
    }
    return ad::Tensor<float>({n, 2}, v);
  };

  ad::AdamConfig acfg;
  acfg.lr = 2e-3;
  ad::AdamState<float> adam(params, acfg);
  ad::Tape<float> tape;
  for (std::size_t step = 0; step < train_steps; ++step) {
    auto rng = substream(seed, "toy.batch", {step});
    ad::TapeScope<float> scope(tape);
    const auto x0 = draw_x0(rng, 128);
    auto loss = model::diffusion_loss<float>(x0, schedule, rng, predictor);
    params.zero_grad();
    tape.backward(loss);
    tape.clear();
    adam.step(params);
  }

  ToyDiffusionResult out;
  {
    ad::NoGradScope<float> ng;
    auto rng = substream(seed, "toy.eval");
    const auto x0 = draw_x0(rng, 4096);
    out.final_loss = model::diffusion_loss<float>(x0, schedule, rng, predictor).item();
  }

  std::vector<std::vector<std::uint64_t>> ids;
  for (std::size_t i = 0; i < n_samples; ++i) {
    ids.push_back({i});
  }
  const auto xs = model::sample_chains<float>(2, ids, seed, schedule, predictor);

  // 2-means seeded at the targets
  std::array<std::array<double, 2>, 2> c{{{mu[0], mu[1]}, {-mu[0], -mu[1]}}};
  for (int iter = 0; iter < 20; ++iter) {
    std::array<std::array<double, 2>, 2> acc{};
    std::array<double, 2> cnt{};
    for (const auto & x : xs) {
      const double d0 = std::hypot(x[0] - c[0][0], x[1] - c[0][1]);
      const double d1 = std::hypot(x[0] - c[1][0], x[1] - c[1][1]);
      const int k = d0 <= d1 ? 0 : 1;
      acc[k][0] += x[0];
      acc[k][1] += x[1];
      cnt[k] += 1;
    }
    for (int k = 0; k < 2; ++k) {
      if (cnt[k] > 0) {
        c[k] = {acc[k][0] / cnt[k], acc[k][1] / cnt[k]};
      }
    }
  }
  out.centroid_error = {std::hypot(c[0][0] - mu[0], c[0][1] - mu[1]),
                        std::hypot(c[1][0] + mu[0], c[1][1] + mu[1])};
  std::size_t within = 0;
  for (const auto & x : xs) {
    const double d = std::min(std::hypot(x[0] - mu[0], x[1] - mu[1]),
                              std::hypot(x[0] + mu[0], x[1] + mu[1]));
    within += d < 0.3;
  }
  out.within_fraction = static_cast<double>(within) / static_cast<double>(xs.size());
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

}  // namespace riskdiff::testing

#endif  // RISKDIFF__TESTS__SUPPORT__TOY_DIFFUSION_HPP_
