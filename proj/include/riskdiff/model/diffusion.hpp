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

#ifndef RISKDIFF__MODEL__DIFFUSION_HPP_
#define RISKDIFF__MODEL__DIFFUSION_HPP_

#include "riskdiff/autodiff/nn.hpp"
#include "riskdiff/autodiff/ops.hpp"
#include "riskdiff/util/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::model
{

// ---------------------------------------------------------------------------
// Schedule

/// Tables indexed by step t = 1..T (index 0 holds the t = 0 boundary:
/// beta = 0, alpha_bar = 1).
struct NoiseSchedule
{
  std::size_t steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> beta_tilde;

  void check_step(std::size_t t, const char * op) const
  {
    if (t < 1 || t > steps) {
      throw std::out_of_range(
        std::string(op) + ": step " + std::to_string(t) + " outside [1, " +
        std::to_string(steps) + "]");
    }
  }
};

/// Linear beta from beta_start to beta_end over T steps.
inline NoiseSchedule make_schedule(std::size_t T, double beta_start, double beta_end)
{
  if (T < 1) {
    throw std::invalid_argument("make_schedule: need at least one step");
  }
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_end < beta_start) {
    throw std::invalid_argument("make_schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  s.beta_tilde.assign(T + 1, 0.0);
  for (std::size_t t = 1; t <= T; ++t) {
    const double f = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
    s.beta[t] = beta_start + f * (beta_end - beta_start);
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.beta_tilde[t] = (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t];
  }
  return s;
}

/// Default schedule: the 1e-4 -> 0.02 linear schedule defined for 1000
/// steps, rescaled by 1000 / max(T, 50) so that a short chain still ends
/// near pure noise (alpha_bar[50] ~ 8e-6).
inline NoiseSchedule make_schedule(std::size_t T)
{
  if (T < 1) {
    throw std::invalid_argument("make_schedule: need at least one step");
  }
  const double scale = 1000.0 / static_cast<double>(std::max<std::size_t>(T, 50));
  return make_schedule(T, 1e-4 * scale, 0.02 * scale);
}

// ---------------------------------------------------------------------------
// Closed-form chain arithmetic (double precision, one latent at a time)

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps
inline std::vector<double> forward_noising(
  std::span<const double> x0, std::size_t t, std::span<const double> eps, const NoiseSchedule & s)
{
  s.check_step(t, "forward_noising");
  if (x0.size() != eps.size()) {
    throw std::invalid_argument("forward_noising: x0 and eps differ in length");
  }
  const double a = std::sqrt(s.alpha_bar[t]);
  const double b = std::sqrt(1.0 - s.alpha_bar[t]);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    out[i] = a * x0[i] + b * eps[i];
  }
  return out;
}

/// One forward transition q(x_t | x_{t-1}).
inline std::vector<double> forward_step(
  std::span<const double> x_prev, std::size_t t, std::span<const double> eps,
  const NoiseSchedule & s)
{
  s.check_step(t, "forward_step");
  const double a = std::sqrt(s.alpha[t]);
  const double b = std::sqrt(s.beta[t]);
  std::vector<double> out(x_prev.size());
  for (std::size_t i = 0; i < x_prev.size(); ++i) {
    out[i] = a * x_prev[i] + b * eps[i];
  }
  return out;
}

/// x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_t)
///           + sqrt(beta_tilde_t) noise, with no noise at t = 1.
inline std::vector<double> reverse_step(
  std::span<const double> x_t, std::size_t t, std::span<const double> eps_hat,
  const NoiseSchedule & s, std::span<const double> noise)
{
  s.check_step(t, "reverse_step");
  if (x_t.size() != eps_hat.size() || (t > 1 && noise.size() != x_t.size())) {
    throw std::invalid_argument("reverse_step: length mismatch");
  }
  const double c = s.beta[t] / std::sqrt(1.0 - s.alpha_bar[t]);
  const double inv = 1.0 / std::sqrt(s.alpha[t]);
  const double sigma = t > 1 ? std::sqrt(s.beta_tilde[t]) : 0.0;
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    out[i] = inv * (x_t[i] - c * eps_hat[i]) + (t > 1 ? sigma * noise[i] : 0.0);
  }
  return out;
}

/// x0 estimate implied by x_t and a noise prediction.
inline double predict_x0(double x_t, double eps_hat, std::size_t t, const NoiseSchedule & s)
{
  return (x_t - std::sqrt(1.0 - s.alpha_bar[t]) * eps_hat) / std::sqrt(s.alpha_bar[t]);
}

// ---------------------------------------------------------------------------
// Denoiser

struct DenoiserConfig
{
  std::size_t d_latent = 64;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::size_t d_ff = 256;
  double dropout = 0.1;
};

/// Sinusoidal embedding of integer steps, [N, width].
template <class T>
ad::Tensor<T> timestep_embedding(const std::vector<std::size_t> & steps, std::size_t width)
{
  const std::size_t half = width / 2;
  std::vector<T> v(steps.size() * width, T(0));
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (std::size_t k = 0; k < half; ++k) {
      const double freq = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(half));
      const double a = static_cast<double>(steps[i]) * freq;
      v[i * width + k] = static_cast<T>(std::sin(a));
      v[i * width + half + k] = static_cast<T>(std::cos(a));
    }
  }
  return ad::Tensor<T>({steps.size(), width}, std::move(v));
}

/// Attention rows captured during a forward pass, one entry per attention
/// layer, each [N, heads, Lq, Lk] flattened.
template <class T>
struct AttentionTrace
{
  std::vector<std::vector<T>> rows;
  std::vector<std::size_t> key_counts;
};

/// Noise predictor: a stack of pre-norm transformer blocks over one latent
/// token. Each block runs self-attention, cross-attention to the condition
/// memory, and a ReLU feed-forward layer, each with a residual connection.
template <class T>
class Denoiser
{
public:
  Denoiser() = default;

  Denoiser(ad::ParamSet<T> & params, const DenoiserConfig & cfg, Rng & rng,
           const std::string & prefix = "dit")
  : cfg_(cfg)
  {
    if (cfg.d_model % cfg.heads != 0) {
      throw std::invalid_argument("denoiser: d_model must be divisible by heads");
    }
    const std::size_t d = cfg.d_model;
    in_ = ad::make_linear(params, prefix + ".in", cfg.d_latent, d, rng);
    time1_ = ad::make_linear(params, prefix + ".time1", d, d, rng);
    time2_ = ad::make_linear(params, prefix + ".time2", d, d, rng);
    for (std::size_t b = 0; b < cfg.blocks; ++b) {
      const std::string p = prefix + ".block" + std::to_string(b);
      Block blk;
      blk.self_q = ad::make_linear(params, p + ".self_q", d, d, rng);
      blk.self_k = ad::make_linear(params, p + ".self_k", d, d, rng);
      blk.self_v = ad::make_linear(params, p + ".self_v", d, d, rng);
      blk.self_o = ad::make_linear(params, p + ".self_o", d, d, rng);
      blk.cross_q = ad::make_linear(params, p + ".cross_q", d, d, rng);
      blk.cross_k = ad::make_linear(params, p + ".cross_k", d, d, rng);
      blk.cross_v = ad::make_linear(params, p + ".cross_v", d, d, rng);
      blk.cross_o = ad::make_linear(params, p + ".cross_o", d, d, rng);
      blk.ff1 = ad::make_linear(params, p + ".ff1", d, cfg.d_ff, rng);
      blk.ff2 = ad::make_linear(params, p + ".ff2", cfg.d_ff, d, rng);
      blocks_.push_back(blk);
    }
    out_ = ad::make_linear(params, prefix + ".out", d, cfg.d_latent, rng);
  }

  const DenoiserConfig & config() const { return cfg_; }

  /// Per-scene cross-attention keys and values, computed once and shared by
  /// every chain of that scene. memory: [B, M, d_model].
  struct Memory
  {
    std::vector<ad::Tensor<T>> keys;
    std::vector<ad::Tensor<T>> values;
  };

  Memory prepare_memory(const ad::Tensor<T> & memory) const
  {
    if (memory.rank() != 3 || memory.dim(2) != cfg_.d_model) {
      throw std::invalid_argument(
        "denoiser: memory must be [B, M, d_model], got " + ad::shape_str(memory.shape()));
    }
    Memory m;
    const auto normed = ad::layer_norm(memory);
    for (const auto & blk : blocks_) {
      m.keys.push_back(blk.cross_k(normed));
      m.values.push_back(blk.cross_v(normed));
    }
    return m;
  }

  /// eps_hat for rows x_t [N, d_latent] at steps (one per row). Row i
  /// belongs to scene owner[i] of the prepared memory and of cond_add
  /// ([B, d_model], added to the token; may be undefined).
  ad::Tensor<T> predict_noise(
    const ad::Tensor<T> & x_t, const std::vector<std::size_t> & steps, const Memory & memory,
    const ad::Tensor<T> & cond_add, const std::vector<std::size_t> & owner, Rng * dropout_rng,
    bool train, AttentionTrace<T> * trace = nullptr) const
  {
    const std::size_t n = x_t.dim(0);
    if (x_t.rank() != 2 || x_t.dim(1) != cfg_.d_latent || steps.size() != n ||
        owner.size() != n) {
      throw std::invalid_argument(
        "predict_noise: expected x_t [N, " + std::to_string(cfg_.d_latent) +
        "] with one step and owner per row, got " + ad::shape_str(x_t.shape()));
    }
    const std::size_t d = cfg_.d_model;
    auto temb = time2_(ad::relu(time1_(timestep_embedding<T>(steps, d))));
    auto h = ad::add(in_(x_t), temb);
    if (cond_add.defined()) {
      h = ad::add(h, ad::index_select(cond_add, owner));
    }
    h = ad::reshape(h, ad::Shape{n, 1, d});
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto & blk = blocks_[b];
      auto x = ad::layer_norm(h);
      h = ad::add(h, blk.self_o(attend(blk.self_q(x), blk.self_k(x), blk.self_v(x), trace)));
      x = ad::layer_norm(h);
      const auto k = ad::index_select(memory.keys[b], owner);
      const auto v = ad::index_select(memory.values[b], owner);
      h = ad::add(h, blk.cross_o(attend(blk.cross_q(x), k, v, trace)));
      x = ad::layer_norm(h);
      auto f = ad::relu(blk.ff1(x));
      if (train && dropout_rng != nullptr && cfg_.dropout > 0.0) {
        f = ad::dropout(f, cfg_.dropout, *dropout_rng, true);
      }
      h = ad::add(h, blk.ff2(f));
    }
    const auto f = out_(ad::reshape(ad::layer_norm(h), ad::Shape{n, d}));
    if (alpha_bar_.empty()) {
      return f;
    }
    // eps = sqrt(1 - abar) x_t - sqrt(abar (1 - abar)) f
    const std::size_t dl = cfg_.d_latent;
    std::vector<T> skip(n * dl), gain(n * dl);
    for (std::size_t i = 0; i < n; ++i) {
      if (steps[i] < 1 || steps[i] >= alpha_bar_.size()) {
        throw std::out_of_range("predict_noise: step " + std::to_string(steps[i]) +
                                " outside the preconditioning schedule");
      }
      const double ab = alpha_bar_[steps[i]];
      std::fill_n(skip.begin() + i * dl, dl, static_cast<T>(std::sqrt(1.0 - ab)));
      std::fill_n(gain.begin() + i * dl, dl, static_cast<T>(std::sqrt(ab * (1.0 - ab))));
    }
    return ad::sub(ad::mul(x_t, ad::Tensor<T>({n, dl}, std::move(skip))),
                   ad::mul(f, ad::Tensor<T>({n, dl}, std::move(gain))));
  }

  /// Makes the network output an estimate of the conditional mean of x0:
  /// for unit-variance x0 the noise posterior mean is
  /// sqrt(1 - abar) x_t - sqrt(abar (1 - abar)) E[x0 | cond], so the
  /// trainable part only has to learn E[x0 | cond]. Off by default.
  void set_preconditioning(const NoiseSchedule & s) { alpha_bar_ = s.alpha_bar; }
  bool preconditioned() const { return !alpha_bar_.empty(); }

private:
  struct Block
  {
    ad::Linear<T> self_q, self_k, self_v, self_o;
    ad::Linear<T> cross_q, cross_k, cross_v, cross_o;
    ad::Linear<T> ff1, ff2;
  };

  ad::Tensor<T> attend(
    const ad::Tensor<T> & q, const ad::Tensor<T> & k, const ad::Tensor<T> & v,
    AttentionTrace<T> * trace) const
  {
    if (trace == nullptr) {
      return ad::multi_head_attention(q, k, v, cfg_.heads);
    }
    std::vector<T> w;
    auto out = ad::multi_head_attention(q, k, v, cfg_.heads, &w);
    trace->rows.push_back(std::move(w));
    trace->key_counts.push_back(k.dim(1));
    return out;
  }

  DenoiserConfig cfg_;
  ad::Linear<T> in_, time1_, time2_, out_;
  std::vector<Block> blocks_;
  std::vector<double> alpha_bar_;  // indexed by step, empty when not preconditioned
};

// ---------------------------------------------------------------------------
// Training objective

/// Per-row step and noise draws for one training pass.
template <class T>
struct NoisedBatch
{
  std::vector<std::size_t> steps;
  ad::Tensor<T> eps;  // constant
  ad::Tensor<T> x_t;  // differentiable w.r.t. x0
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps with t ~ U{1..T} and
/// eps ~ N(0, I) drawn per row from rng.
template <class T>
NoisedBatch<T> noise_batch(const ad::Tensor<T> & x0, const NoiseSchedule & s, Rng & rng)
{
  if (x0.rank() != 2 || x0.dim(0) == 0) {
    throw std::invalid_argument("diffusion: empty or non-matrix latent batch");
  }
  const std::size_t n = x0.dim(0);
  const std::size_t d = x0.dim(1);
  NoisedBatch<T> out;
  out.steps.resize(n);
  std::vector<T> eps(n * d), ca(n * d), cb(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    out.steps[i] = static_cast<std::size_t>(rng.uniform_int(1, static_cast<long>(s.steps)));
    for (std::size_t j = 0; j < d; ++j) {
      eps[i * d + j] = static_cast<T>(rng.normal());
    }
    const T a = static_cast<T>(std::sqrt(s.alpha_bar[out.steps[i]]));
    const T b = static_cast<T>(std::sqrt(1.0 - s.alpha_bar[out.steps[i]]));
    std::fill_n(ca.begin() + i * d, d, a);
    std::fill_n(cb.begin() + i * d, d, b);
  }
  out.eps = ad::Tensor<T>({n, d}, std::move(eps));
  const ad::Tensor<T> ta({n, d}, std::move(ca));
  const ad::Tensor<T> tb({n, d}, std::move(cb));
  out.x_t = ad::add(ad::mul(x0, ta), ad::mul(out.eps, tb));
  return out;
}

/// Mean over rows of ||eps - eps_hat||^2.
template <class T>
ad::Tensor<T> noise_mse(const ad::Tensor<T> & eps, const ad::Tensor<T> & eps_hat)
{
  return ad::scale(ad::sum(ad::square(ad::sub(eps, eps_hat))), T(1) / static_cast<T>(eps.dim(0)));
}

/// Noise-prediction loss with an arbitrary predictor (x_t, steps) -> eps_hat.
template <class T>
ad::Tensor<T> diffusion_loss(
  const ad::Tensor<T> & x0, const NoiseSchedule & s, Rng & rng,
  const std::function<ad::Tensor<T>(const ad::Tensor<T> &, const std::vector<std::size_t> &)> &
    predictor)
{
  auto nb = noise_batch(x0, s, rng);
  return noise_mse(nb.eps, predictor(nb.x_t, nb.steps));
}

// ---------------------------------------------------------------------------
// Sampling

/// Runs one reverse chain per (row) from x_T ~ N(0, I). Row i draws all of
/// its noise from substream(seed, "diffusion", {chain_ids[i]...}), so a
/// chain's result does not depend on which other chains share the batch.
/// predictor(x_t [N, d], steps) -> eps_hat.
template <class T>
std::vector<std::vector<double>> sample_chains(
  std::size_t d_latent, const std::vector<std::vector<std::uint64_t>> & chain_ids,
  std::uint64_t seed, const NoiseSchedule & s,
  const std::function<ad::Tensor<T>(const ad::Tensor<T> &, const std::vector<std::size_t> &)> &
    predictor)
{
  const std::size_t n = chain_ids.size();
  std::vector<Rng> streams;
  streams.reserve(n);
  std::vector<std::vector<double>> x(n, std::vector<double>(d_latent));
  for (std::size_t i = 0; i < n; ++i) {
    streams.push_back(substream(seed, "diffusion", chain_ids[i]));
    for (auto & v : x[i]) {
      v = streams[i].normal();
    }
  }
  ad::NoGradScope<T> no_grad;
  std::vector<double> noise(d_latent);
  for (std::size_t t = s.steps; t >= 1; --t) {
    std::vector<T> flat(n * d_latent);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d_latent; ++j) {
        flat[i * d_latent + j] = static_cast<T>(x[i][j]);
      }
    }
    const auto eps_hat = predictor(ad::Tensor<T>({n, d_latent}, std::move(flat)),
                                   std::vector<std::size_t>(n, t));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> e(d_latent);
      for (std::size_t j = 0; j < d_latent; ++j) {
        e[j] = static_cast<double>(eps_hat.at(i * d_latent + j));
      }
      if (t > 1) {
        for (auto & v : noise) {
          v = streams[i].normal();
        }
      }
      x[i] = reverse_step(x[i], t, e, s, noise);
    }
  }
  return x;
}

}  // namespace riskdiff::model

#endif  // RISKDIFF__MODEL__DIFFUSION_HPP_
