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

#ifndef RISKDIFF__MODEL__MODEL_HPP_
#define RISKDIFF__MODEL__MODEL_HPP_

#include "riskdiff/autodiff/nn.hpp"
#include "riskdiff/autodiff/ops.hpp"
#include "riskdiff/data/scene.hpp"
#include "riskdiff/model/decoder.hpp"
#include "riskdiff/model/diffusion.hpp"
#include "riskdiff/model/encoder.hpp"
#include "riskdiff/model/features.hpp"
#include "riskdiff/train/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::model
{

struct ModelConfig
{
  std::size_t d_model = 64;
  std::size_t d_latent = 64;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::size_t d_ff = 256;
  double dropout = 0.1;
  std::size_t diffusion_steps = 50;
  std::size_t decoder_layers = 2;
  std::size_t gru_hidden = 64;
  std::size_t modes = 10;
  bool use_dit = true;
  bool multimodal = true;
  double huber_delta = 1.0;
  double lambda_conf = 0.1;
  // Decoder training latents are x0 estimates from steps 1..decode_max_step
  // (0: every step).
  std::size_t decode_max_step = 0;

  std::size_t train_modes() const { return multimodal ? modes : 1; }

  void validate() const
  {
    if (d_model == 0 || d_latent == 0 || heads == 0 || d_model % heads != 0) {
      throw std::invalid_argument("model config: d_model must be a positive multiple of heads");
    }
    if (modes == 0 || diffusion_steps == 0 || decoder_layers == 0 || gru_hidden == 0) {
      throw std::invalid_argument("model config: modes, steps, layers and hidden must be >= 1");
    }
    if (decode_max_step > diffusion_steps) {
      throw std::invalid_argument("model config: decode_max_step must be in [0, diffusion_steps]");
    }
    if (!(dropout >= 0.0 && dropout < 1.0) || !(huber_delta > 0.0) || lambda_conf < 0.0) {
      throw std::invalid_argument("model config: dropout in [0,1), huber_delta > 0, lambda >= 0");
    }
  }

  nlohmann::json to_json() const
  {
    return {{"d_model", d_model},
            {"d_latent", d_latent},
            {"heads", heads},
            {"blocks", blocks},
            {"d_ff", d_ff},
            {"dropout", dropout},
            {"diffusion_steps", diffusion_steps},
            {"decoder_layers", decoder_layers},
            {"gru_hidden", gru_hidden},
            {"modes", modes},
            {"use_dit", use_dit},
            {"multimodal", multimodal},
            {"huber_delta", huber_delta},
            {"lambda_conf", lambda_conf},
            {"decode_max_step", decode_max_step}};
  }

  static ModelConfig from_json(const nlohmann::json & j)
  {
    ModelConfig c;
    c.d_model = j.at("d_model").get<std::size_t>();
    c.d_latent = j.at("d_latent").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.blocks = j.at("blocks").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    c.diffusion_steps = j.at("diffusion_steps").get<std::size_t>();
    c.decoder_layers = j.at("decoder_layers").get<std::size_t>();
    c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
    c.modes = j.at("modes").get<std::size_t>();
    c.use_dit = j.at("use_dit").get<bool>();
    c.multimodal = j.at("multimodal").get<bool>();
    c.huber_delta = j.at("huber_delta").get<double>();
    c.lambda_conf = j.at("lambda_conf").get<double>();
    c.decode_max_step = j.at("decode_max_step").get<std::size_t>();
    return c;
  }
};

/// Model-ready view of a set of scenes.
template <class T>
struct SceneBatch
{
  EncoderInputs<T> inputs;
  ad::Tensor<T> future;  // [B, kFutureFeatures], normalized
  ad::Tensor<T> target;  // [B, kFutureLen, 3] cumulative (x, y, theta) from the anchor
  std::vector<std::int64_t> scene_ids;

  std::size_t size() const { return scene_ids.size(); }
};

/// Future positions relative to the anchor and accumulated heading change.
inline std::vector<std::array<double, 3>> cumulative_target(const data::Scene & s)
{
  const auto d = data::future_displacements(s);
  std::vector<std::array<double, 3>> out(d.size());
  double theta = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    theta += d[k][2];
    out[k] = {s.future[k].x - s.anchor().x, s.future[k].y - s.anchor().y, theta};
  }
  return out;
}

template <class T>
SceneBatch<T> make_batch(std::span<const data::Scene> scenes, const FeatureScales & sc)
{
  SceneBatch<T> b;
  b.inputs = encoder_inputs<T>(scenes, sc);
  const std::size_t n = scenes.size();
  std::vector<T> fut(n * kFutureFeatures);
  std::vector<T> tgt(n * data::kFutureLen * 3);
  for (std::size_t i = 0; i < n; ++i) {
    future_features(scenes[i], sc, fut.data() + i * kFutureFeatures);
    const auto c = cumulative_target(scenes[i]);
    for (std::size_t k = 0; k < c.size(); ++k) {
      for (std::size_t j = 0; j < 3; ++j) {
        tgt[(i * data::kFutureLen + k) * 3 + j] = static_cast<T>(c[k][j]);
      }
    }
    b.scene_ids.push_back(scenes[i].scene_id);
  }
  b.future = ad::Tensor<T>({n, kFutureFeatures}, std::move(fut));
  b.target = ad::Tensor<T>({n, data::kFutureLen, 3}, std::move(tgt));
  return b;
}

template <class T>
struct LossTerms
{
  ad::Tensor<T> total;
  ad::Tensor<T> diffusion;
  ad::Tensor<T> trajectory;
  ad::Tensor<T> confidence;
};

struct SceneForecast
{
  std::int64_t scene_id = 0;
  std::vector<ModePrediction> modes;
};

/// Scene encoder, future-latent embedding, diffusion denoiser and
/// trajectory decoder trained jointly.
template <class T>
class RiskDiffModel
{
public:
  RiskDiffModel(const ModelConfig & cfg, const FeatureScales & scales, std::uint64_t seed)
  : cfg_(cfg), scales_(scales), schedule_(make_schedule(cfg.diffusion_steps))
  {
    cfg_.validate();
    auto rng = substream(seed, "init");
    encoder_ = SceneEncoder<T>(params_, cfg_.d_model, rng);
    latent_ = ad::make_linear(params_, "latent.embed", kFutureFeatures, cfg_.d_latent, rng);
    if (cfg_.use_dit) {
      DenoiserConfig dc;
      dc.d_latent = cfg_.d_latent;
      dc.d_model = cfg_.d_model;
      dc.heads = cfg_.heads;
      dc.blocks = cfg_.blocks;
      dc.d_ff = cfg_.d_ff;
      dc.dropout = cfg_.dropout;
      denoiser_ = Denoiser<T>(params_, dc, rng);
      denoiser_.set_preconditioning(schedule_);
    } else {
      fixed_latents_ = params_.add_uniform(
        "latent.fixed", ad::Shape{cfg_.train_modes(), cfg_.d_latent}, 1.0, rng);
    }
    DecoderConfig rc;
    rc.d_latent = cfg_.d_latent;
    rc.d_cond = cfg_.d_model;
    rc.hidden = cfg_.gru_hidden;
    rc.mlp_layers = cfg_.decoder_layers;
    decoder_ = TrajectoryDecoder<T>(params_, rc, rng);
    const std::vector<T> sv{static_cast<T>(scales_.future_dx), static_cast<T>(scales_.future_dy),
                            static_cast<T>(scales_.future_dtheta)};
    out_scale_ = ad::Tensor<T>({3}, sv);
  }

  const ModelConfig & config() const { return cfg_; }
  const FeatureScales & scales() const { return scales_; }
  const NoiseSchedule & schedule() const { return schedule_; }
  ad::ParamSet<T> & params() { return params_; }
  const ad::ParamSet<T> & params() const { return params_; }
  const SceneEncoder<T> & encoder() const { return encoder_; }
  const Denoiser<T> & denoiser() const { return denoiser_; }
  const TrajectoryDecoder<T> & decoder() const { return decoder_; }

  /// Ground-truth latent x0 = LayerNorm(W future), [B, d_latent].
  ad::Tensor<T> embed_future(const ad::Tensor<T> & future) const
  {
    return ad::layer_norm(latent_(future));
  }

  /// Training objective on one batch. All randomness (diffusion steps and
  /// noise, dropout) comes from rng.
  LossTerms<T> losses(const SceneBatch<T> & batch, Rng & rng, bool train) const
  {
    const std::size_t b = batch.size();
    const std::size_t k = cfg_.train_modes();
    if (b == 0) {
      throw std::invalid_argument("losses: empty batch");
    }
    const auto tokens = encoder_.encode(batch.inputs);
    std::vector<std::size_t> owner(b * k);
    for (std::size_t i = 0; i < b * k; ++i) {
      owner[i] = i / k;
    }

    LossTerms<T> out;
    ad::Tensor<T> latents;
    if (cfg_.use_dit) {
      const auto x0 = ad::index_select(embed_future(batch.future), owner);
      const auto memory = denoiser_.prepare_memory(tokens.memory());
      // noise-prediction objective, steps uniform over the chain
      auto nb = noise_batch(x0, schedule_, rng);
      const auto eps_hat =
        denoiser_.predict_noise(nb.x_t, nb.steps, memory, tokens.e_a, owner, &rng, train);
      out.diffusion = noise_mse(nb.eps, eps_hat);
      // decoder latents: one-shot x0 estimates from the early part of the chain
      auto db = decode_noise_batch(x0, rng);
      const auto eps_dec =
        denoiser_.predict_noise(db.x_t, db.steps, memory, tokens.e_a, owner, &rng, train);
      latents = estimate_x0(db, eps_dec);
    } else {
      std::vector<std::size_t> rows(b * k);
      for (std::size_t i = 0; i < b * k; ++i) {
        rows[i] = i % k;
      }
      latents = ad::index_select(fixed_latents_, rows);
      out.diffusion = ad::Tensor<T>::scalar(T(0));
    }

    const auto dec = decoder_.decode(latents, ad::index_select(tokens.e_a, owner));
    const auto cum = ad::cumsum(ad::mul_bias(dec.displacements, out_scale_), 1);

    // winner-take-all: the mode with the smallest position ADE per scene
    const std::size_t steps = data::kFutureLen;
    std::vector<std::size_t> best(b);
    std::vector<T> onehot(b * k, T(0));
    const auto cv = cum.values();
    const auto tv = batch.target.values();
    for (std::size_t i = 0; i < b; ++i) {
      double best_err = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < k; ++m) {
        double err = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
          const std::size_t p = ((i * k + m) * steps + s) * 3;
          const std::size_t q = (i * steps + s) * 3;
          err += std::hypot(static_cast<double>(cv[p] - tv[q]),
                            static_cast<double>(cv[p + 1] - tv[q + 1]));
        }
        if (err < best_err) {
          best_err = err;
          best[i] = i * k + m;
        }
      }
      onehot[best[i]] = T(1);
    }
    out.trajectory = train::huber_traj_loss(
      ad::index_select(cum, best), batch.target, static_cast<T>(cfg_.huber_delta));
    const auto logp = ad::log_softmax(ad::reshape(dec.logits, ad::Shape{b, k}));
    out.confidence = ad::scale(ad::sum(ad::mul(logp, ad::Tensor<T>({b, k}, std::move(onehot)))),
                               T(-1) / static_cast<T>(b));
    out.total = train::total_loss(out.diffusion, out.trajectory, out.confidence,
                                  static_cast<T>(cfg_.lambda_conf));
    return out;
  }

  /// K latents per scene. With the denoiser each (scene, mode) pair runs its
  /// own reverse chain seeded from (seed, scene_id, mode); without it the
  /// learned fixed latents are used in order.
  std::vector<std::vector<double>> sample_latents(
    const SceneTokens<T> & tokens, const std::vector<std::int64_t> & scene_ids, std::size_t k,
    std::uint64_t seed) const
  {
    if (k < 1) {
      throw std::invalid_argument("sample: need at least one mode");
    }
    const std::size_t b = scene_ids.size();
    std::vector<std::vector<double>> out;
    if (!cfg_.use_dit) {
      if (k > fixed_latents_.dim(0)) {
        throw std::invalid_argument(
          "sample: model without diffusion has " + std::to_string(fixed_latents_.dim(0)) +
          " fixed latents, asked for " + std::to_string(k));
      }
      const auto v = fixed_latents_.values();
      for (std::size_t i = 0; i < b * k; ++i) {
        const std::size_t m = i % k;
        out.emplace_back(v.begin() + m * cfg_.d_latent, v.begin() + (m + 1) * cfg_.d_latent);
      }
      return out;
    }
    ad::NoGradScope<T> ng;
    std::vector<std::size_t> owner(b * k);
    std::vector<std::vector<std::uint64_t>> ids(b * k);
    for (std::size_t i = 0; i < b * k; ++i) {
      owner[i] = i / k;
      ids[i] = {static_cast<std::uint64_t>(scene_ids[i / k]), i % k};
    }
    const auto memory = denoiser_.prepare_memory(tokens.memory());
    auto pred = [&](const ad::Tensor<T> & x, const std::vector<std::size_t> & st) {
      return denoiser_.predict_noise(x, st, memory, tokens.e_a, owner, nullptr, false);
    };
    return sample_chains<T>(cfg_.d_latent, ids, seed, schedule_, pred);
  }

  /// K forecasts per scene in metres/radians, confidences softmax-normalized
  /// over the K modes. Scenes are processed in chunks; every row is computed
  /// independently, so chunking does not change results.
  std::vector<SceneForecast> predict(
    std::span<const data::Scene> scenes, std::size_t k, std::uint64_t seed,
    std::size_t chunk = 64) const
  {
    ad::NoGradScope<T> ng;
    std::vector<SceneForecast> out;
    for (std::size_t lo = 0; lo < scenes.size(); lo += chunk) {
      const std::size_t hi = std::min(scenes.size(), lo + chunk);
      const auto part = scenes.subspan(lo, hi - lo);
      const std::size_t b = part.size();
      const auto tokens = encoder_.encode(encoder_inputs<T>(part, scales_));
      std::vector<std::int64_t> ids;
      for (const auto & s : part) {
        ids.push_back(s.scene_id);
      }
      const auto lat = sample_latents(tokens, ids, k, seed);
      std::vector<T> flat;
      flat.reserve(b * k * cfg_.d_latent);
      for (const auto & l : lat) {
        for (double v : l) {
          flat.push_back(static_cast<T>(v));
        }
      }
      std::vector<std::size_t> owner(b * k);
      for (std::size_t i = 0; i < b * k; ++i) {
        owner[i] = i / k;
      }
      const auto dec = decoder_.decode(ad::Tensor<T>({b * k, cfg_.d_latent}, std::move(flat)),
                                       ad::index_select(tokens.e_a, owner));
      const auto scaled = ad::mul_bias(dec.displacements, out_scale_);
      const auto disp = scaled.values();
      const auto logits = dec.logits.values();
      for (std::size_t i = 0; i < b; ++i) {
        SceneForecast f;
        f.scene_id = ids[i];
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < k; ++m) {
          mx = std::max(mx, static_cast<double>(logits[i * k + m]));
        }
        double z = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
          z += std::exp(static_cast<double>(logits[i * k + m]) - mx);
        }
        for (std::size_t m = 0; m < k; ++m) {
          ModePrediction mp;
          mp.confidence = std::exp(static_cast<double>(logits[i * k + m]) - mx) / z;
          mp.displacements.resize(data::kFutureLen);
          for (std::size_t s = 0; s < data::kFutureLen; ++s) {
            const std::size_t p = ((i * k + m) * data::kFutureLen + s) * 3;
            mp.displacements[s] = {static_cast<double>(disp[p]), static_cast<double>(disp[p + 1]),
                                   static_cast<double>(disp[p + 2])};
          }
          f.modes.push_back(std::move(mp));
        }
        out.push_back(std::move(f));
      }
    }
    return out;
  }

private:
  /// Steps uniform on 1..decode_max_step, fresh noise.
  NoisedBatch<T> decode_noise_batch(const ad::Tensor<T> & x0, Rng & rng) const
  {
    const std::size_t n = x0.dim(0);
    const std::size_t d = x0.dim(1);
    const std::size_t max_step =
      cfg_.decode_max_step == 0 ? cfg_.diffusion_steps : cfg_.decode_max_step;
    NoisedBatch<T> nb;
    nb.steps.resize(n);
    std::vector<T> eps(n * d), ca(n * d), cb(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      nb.steps[i] =
        static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(max_step)));
      for (std::size_t j = 0; j < d; ++j) {
        eps[i * d + j] = static_cast<T>(rng.normal());
      }
      std::fill_n(ca.begin() + i * d, d, static_cast<T>(std::sqrt(schedule_.alpha_bar[nb.steps[i]])));
      std::fill_n(cb.begin() + i * d, d,
                  static_cast<T>(std::sqrt(1.0 - schedule_.alpha_bar[nb.steps[i]])));
    }
    nb.eps = ad::Tensor<T>({n, d}, std::move(eps));
    nb.x_t = ad::add(ad::mul(x0, ad::Tensor<T>({n, d}, std::move(ca))),
                     ad::mul(nb.eps, ad::Tensor<T>({n, d}, std::move(cb))));
    return nb;
  }

  /// (x_t - sqrt(1 - abar) eps_hat) / sqrt(abar), row-wise.
  ad::Tensor<T> estimate_x0(const NoisedBatch<T> & nb, const ad::Tensor<T> & eps_hat) const
  {
    const std::size_t n = eps_hat.dim(0);
    const std::size_t d = eps_hat.dim(1);
    std::vector<T> a(n * d), c(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      const double ab = schedule_.alpha_bar[nb.steps[i]];
      std::fill_n(a.begin() + i * d, d, static_cast<T>(1.0 / std::sqrt(ab)));
      std::fill_n(c.begin() + i * d, d, static_cast<T>(std::sqrt((1.0 - ab) / ab)));
    }
    return ad::sub(ad::mul(nb.x_t, ad::Tensor<T>({n, d}, std::move(a))),
                   ad::mul(eps_hat, ad::Tensor<T>({n, d}, std::move(c))));
  }

  ModelConfig cfg_;
  FeatureScales scales_;
  NoiseSchedule schedule_;
  ad::ParamSet<T> params_;
  SceneEncoder<T> encoder_;
  ad::Linear<T> latent_;
  Denoiser<T> denoiser_;
  ad::Tensor<T> fixed_latents_;
  TrajectoryDecoder<T> decoder_;
  ad::Tensor<T> out_scale_;
};

}  // namespace riskdiff::model

#endif  // RISKDIFF__MODEL__MODEL_HPP_
