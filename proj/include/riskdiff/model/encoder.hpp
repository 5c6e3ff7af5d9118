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

#ifndef RISKDIFF__MODEL__ENCODER_HPP_
#define RISKDIFF__MODEL__ENCODER_HPP_

#include "riskdiff/autodiff/nn.hpp"
#include "riskdiff/autodiff/ops.hpp"
#include "riskdiff/model/features.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::model
{

/// Per-source tokens and the fused condition token, each [B, d_model].
template <class T>
struct SceneTokens
{
  ad::Tensor<T> e_traj;
  ad::Tensor<T> e_risk;
  ad::Tensor<T> e_env;
  ad::Tensor<T> e_v;
  ad::Tensor<T> e_a;

  std::size_t batch() const { return e_a.dim(0); }

  /// The four source tokens as [B, 4, d_model] (cross-attention memory).
  ad::Tensor<T> memory() const
  {
    const std::size_t b = e_traj.dim(0);
    const std::size_t d = e_traj.dim(1);
    std::vector<ad::Tensor<T>> parts;
    for (const auto * t : {&e_traj, &e_risk, &e_env, &e_v}) {
      parts.push_back(ad::reshape(*t, ad::Shape{b, 1, d}));
    }
    return ad::concat(parts, 1);
  }

  /// Row i of the result is row index[i] of this batch.
  SceneTokens select(const std::vector<std::size_t> & index) const
  {
    return {ad::index_select(e_traj, index), ad::index_select(e_risk, index),
            ad::index_select(e_env, index), ad::index_select(e_v, index),
            ad::index_select(e_a, index)};
  }
};

/// Batched encoder inputs, one row per scene.
template <class T>
struct EncoderInputs
{
  ad::Tensor<T> traj;  // [B, kTrajFeatures]
  ad::Tensor<T> risk;  // [B, kRiskFeatures]
  ad::Tensor<T> env;   // [B, kEnvFeatures]
  ad::Tensor<T> vel;   // [B, kVelFeatures]
};

template <class T>
EncoderInputs<T> encoder_inputs(std::span<const data::Scene> scenes, const FeatureScales & sc)
{
  const std::size_t b = scenes.size();
  std::vector<T> traj(b * kTrajFeatures), rk(b * kRiskFeatures), env(b * kEnvFeatures),
    vel(b * kVelFeatures);
  for (std::size_t i = 0; i < b; ++i) {
    scenes[i].validate();
    trajectory_features(scenes[i], sc, traj.data() + i * kTrajFeatures);
    risk_features(scenes[i], rk.data() + i * kRiskFeatures);
    env_features(scenes[i].flow, env.data() + i * kEnvFeatures);
    velocity_features(scenes[i], vel.data() + i * kVelFeatures);
  }
  return {ad::Tensor<T>({b, kTrajFeatures}, std::move(traj)),
          ad::Tensor<T>({b, kRiskFeatures}, std::move(rk)),
          ad::Tensor<T>({b, kEnvFeatures}, std::move(env)),
          ad::Tensor<T>({b, kVelFeatures}, std::move(vel))};
}

/// Three-layer encoder. Layer 1 is one linear map per source (traj, risk,
/// env, velocity stats); the tokens are fused as
///   ReLU(W3 ReLU(W2 ReLU(LayerNorm(concat))))
/// with bias-free W2 (4d -> d) and W3 (d -> d), so e_a >= 0.
template <class T>
class SceneEncoder
{
public:
  SceneEncoder() = default;

  SceneEncoder(ad::ParamSet<T> & params, std::size_t d_model, Rng & rng) : d_(d_model)
  {
    phi_traj_ = ad::make_linear(params, "encoder.phi_traj", kTrajFeatures, d_, rng);
    phi_risk_ = ad::make_linear(params, "encoder.phi_risk", kRiskFeatures, d_, rng);
    phi_env_ = ad::make_linear(params, "encoder.phi_env", kEnvFeatures, d_, rng);
    phi_v_ = ad::make_linear(params, "encoder.phi_v", kVelFeatures, d_, rng);
    fuse1_ = ad::make_linear(params, "encoder.fuse1", 4 * d_, d_, rng, false);
    fuse2_ = ad::make_linear(params, "encoder.fuse2", d_, d_, rng, false);
  }

  std::size_t d_model() const { return d_; }

  ad::Tensor<T> embed_trajectory(const ad::Tensor<T> & x) const
  {
    check_width("embed_trajectory", x, kTrajFeatures);
    return phi_traj_(x);
  }

  ad::Tensor<T> embed_risk(const ad::Tensor<T> & w) const
  {
    check_width("embed_risk", w, kRiskFeatures);
    for (T v : w.values()) {
      if (v < T(0)) {
        throw std::invalid_argument("embed_risk: negative risk weight");
      }
    }
    return phi_risk_(w);
  }

  ad::Tensor<T> embed_env(const ad::Tensor<T> & f) const
  {
    check_width("embed_env", f, kEnvFeatures);
    for (T v : f.values()) {
      if (v < T(0)) {
        throw std::invalid_argument("embed_env: negative traffic-flow feature");
      }
    }
    return phi_env_(f);
  }

  ad::Tensor<T> embed_velocity(const ad::Tensor<T> & v) const
  {
    check_width("embed_velocity", v, kVelFeatures);
    return phi_v_(v);
  }

  ad::Tensor<T> fuse_tokens(
    const ad::Tensor<T> & e_traj, const ad::Tensor<T> & e_risk, const ad::Tensor<T> & e_env,
    const ad::Tensor<T> & e_v) const
  {
    if (!e_traj.defined() || !e_risk.defined() || !e_env.defined() || !e_v.defined()) {
      throw std::invalid_argument("fuse_tokens: all four tokens are required");
    }
    auto h = ad::relu(ad::layer_norm(ad::concat<T>({e_traj, e_risk, e_env, e_v}, -1)));
    h = ad::relu(fuse1_(h));
    return ad::relu(fuse2_(h));
  }

  SceneTokens<T> encode(const EncoderInputs<T> & in) const
  {
    SceneTokens<T> t;
    t.e_traj = embed_trajectory(in.traj);
    t.e_risk = embed_risk(in.risk);
    t.e_env = embed_env(in.env);
    t.e_v = embed_velocity(in.vel);
    t.e_a = fuse_tokens(t.e_traj, t.e_risk, t.e_env, t.e_v);
    return t;
  }

private:
  static void check_width(const char * op, const ad::Tensor<T> & x, std::size_t width)
  {
    if (x.rank() != 2 || x.dim(1) != width) {
      throw std::invalid_argument(
        std::string(op) + ": expected [B, " + std::to_string(width) + "], got " +
        ad::shape_str(x.shape()));
    }
  }

  std::size_t d_ = 0;
  ad::Linear<T> phi_traj_, phi_risk_, phi_env_, phi_v_, fuse1_, fuse2_;
};

/// Trajectory input for a bare 75-point history (increments derived from
/// the positions).
template <class T>
ad::Tensor<T> history_input(std::span<const data::Vec2> history, const FeatureScales & sc)
{
  if (history.size() != data::kHistoryLen) {
    throw std::invalid_argument(
      "history_input: expected " + std::to_string(data::kHistoryLen) + " points, got " +
      std::to_string(history.size()));
  }
  data::Scene s;
  s.history.assign(history.begin(), history.end());
  s.delta_history.assign(history.size(), data::Vec2{});
  for (std::size_t k = 1; k < history.size(); ++k) {
    s.delta_history[k] = {history[k].x - history[k - 1].x, history[k].y - history[k - 1].y};
  }
  std::vector<T> v(kTrajFeatures);
  trajectory_features(s, sc, v.data());
  return ad::Tensor<T>({1, kTrajFeatures}, std::move(v));
}

}  // namespace riskdiff::model

#endif  // RISKDIFF__MODEL__ENCODER_HPP_
