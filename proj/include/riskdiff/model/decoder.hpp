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

#ifndef RISKDIFF__MODEL__DECODER_HPP_
#define RISKDIFF__MODEL__DECODER_HPP_

#include "riskdiff/autodiff/nn.hpp"
#include "riskdiff/autodiff/ops.hpp"
#include "riskdiff/data/scene.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::model
{

struct ModePrediction
{
  std::vector<std::array<double, 3>> displacements;  // (dx m, dy m, dtheta rad) per step
  double confidence = 0.0;
};

struct PredictedTrajectory
{
  std::vector<data::Vec2> positions;
  std::vector<double> headings;
  std::vector<data::Vec2> velocities;
};

/// v_k = (dx_k, dy_k) / dt
inline std::vector<data::Vec2> velocity_from_displacements(const ModePrediction & m, double dt)
{
  if (!(dt > 0.0)) {
    throw std::invalid_argument("velocity_from_displacements: dt must be positive");
  }
  std::vector<data::Vec2> v(m.displacements.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = {m.displacements[k][0] / dt, m.displacements[k][1] / dt};
  }
  return v;
}

/// Prefix sums of the displacements starting at the last observed state.
inline PredictedTrajectory compose_trajectory(
  const data::Vec2 & pos, double heading, const ModePrediction & m, double dt = data::kDefaultDt)
{
  PredictedTrajectory out;
  out.positions.reserve(m.displacements.size());
  out.headings.reserve(m.displacements.size());
  data::Vec2 p = pos;
  double h = heading;
  for (const auto & d : m.displacements) {
    p.x += d[0];
    p.y += d[1];
    h += d[2];
    out.positions.push_back(p);
    out.headings.push_back(h);
  }
  out.velocities = velocity_from_displacements(m, dt);
  return out;
}

/// Confidence-ranked export: scene_id, mode, step, x, y, theta, confidence.
inline void write_prediction_csv_header(std::ostream & os)
{
  os << "scene_id,mode,step,x,y,theta,confidence\n";
}

inline void write_prediction_csv_rows(
  std::ostream & os, std::int64_t scene_id, std::size_t mode, const PredictedTrajectory & t,
  double confidence)
{
  for (std::size_t k = 0; k < t.positions.size(); ++k) {
    os << scene_id << ',' << mode << ',' << (k + 1) << ',' << t.positions[k].x << ','
       << t.positions[k].y << ',' << t.headings[k] << ',' << confidence << '\n';
  }
}

struct DecoderConfig
{
  std::size_t d_latent = 64;
  std::size_t d_cond = 64;
  std::size_t hidden = 64;
  std::size_t mlp_layers = 2;  // linear layers in the per-step head
  std::size_t steps = data::kFutureLen;
  double latent_clip = 4.0;  // soft clamp c * tanh(z / c) on incoming latents
};

template <class T>
struct DecoderOutput
{
  ad::Tensor<T> displacements;  // [N, steps, 3], normalized units
  ad::Tensor<T> logits;         // [N, 1]
};

/// GRU rollout conditioned on (latent, e_a). h0 = tanh(W ctx); the per-step
/// input is W_x ctx plus a learned step-position term; each hidden state
/// goes through the MLP head. A separate MLP scores the mode.
template <class T>
class TrajectoryDecoder
{
public:
  TrajectoryDecoder() = default;

  TrajectoryDecoder(ad::ParamSet<T> & params, const DecoderConfig & cfg, Rng & rng,
                    const std::string & prefix = "decoder")
  : cfg_(cfg)
  {
    if (cfg.mlp_layers < 1) {
      throw std::invalid_argument("decoder: need at least one head layer");
    }
    const std::size_t ctx = cfg.d_latent + cfg.d_cond;
    const std::size_t h = cfg.hidden;
    init_ = ad::make_linear(params, prefix + ".init", ctx, h, rng);
    input_ = ad::make_linear(params, prefix + ".input", ctx, 3 * h, rng);
    step_ = params.add_uniform(prefix + ".step", ad::Shape{3 * h}, 1.0, rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    wh_ = params.add_uniform(prefix + ".gru.wh", ad::Shape{h, 3 * h}, bound, rng);
    bh_ = params.add_zeros(prefix + ".gru.bh", ad::Shape{3 * h});
    std::vector<std::size_t> widths(cfg.mlp_layers, h);
    widths.push_back(3);
    head_ = ad::make_mlp(params, prefix + ".head", widths, rng);
    score_ = ad::make_mlp(params, prefix + ".score", {ctx, h, 1}, rng);
  }

  const DecoderConfig & config() const { return cfg_; }

  /// latents: [N, d_latent], cond: [N, d_cond]
  DecoderOutput<T> decode(const ad::Tensor<T> & latents, const ad::Tensor<T> & cond) const
  {
    if (latents.rank() != 2 || latents.dim(1) != cfg_.d_latent || cond.rank() != 2 ||
        cond.dim(1) != cfg_.d_cond || cond.dim(0) != latents.dim(0)) {
      throw std::invalid_argument(
        "decode: expected latents [N, " + std::to_string(cfg_.d_latent) + "] and cond [N, " +
        std::to_string(cfg_.d_cond) + "], got " + ad::shape_str(latents.shape()) + " and " +
        ad::shape_str(cond.shape()));
    }
    const std::size_t n = latents.dim(0);
    const std::size_t hid = cfg_.hidden;
    const T c = static_cast<T>(cfg_.latent_clip);
    const auto z = ad::scale(ad::tanh(ad::scale(latents, T(1) / c)), c);
    const auto ctx = ad::concat<T>({z, cond}, -1);
    auto h = ad::tanh(init_(ctx));
    const auto gx = input_(ctx);
    std::vector<ad::Tensor<T>> states;
    states.reserve(cfg_.steps);
    for (std::size_t k = 0; k < cfg_.steps; ++k) {
      const T pos = static_cast<T>(k + 1) / static_cast<T>(cfg_.steps);
      h = ad::gru_cell(ad::add_bias(gx, ad::scale(step_, pos)), h, wh_, bh_);
      states.push_back(ad::reshape(h, ad::Shape{n, 1, hid}));
    }
    DecoderOutput<T> out;
    out.displacements = head_(ad::concat(states, 1));
    out.logits = score_(ctx);
    return out;
  }

private:
  DecoderConfig cfg_;
  ad::Linear<T> init_, input_;
  ad::Tensor<T> step_, wh_, bh_;
  ad::Mlp<T> head_, score_;
};

}  // namespace riskdiff::model

#endif  // RISKDIFF__MODEL__DECODER_HPP_
