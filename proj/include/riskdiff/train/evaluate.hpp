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

#ifndef RISKDIFF__TRAIN__EVALUATE_HPP_
#define RISKDIFF__TRAIN__EVALUATE_HPP_

#include "riskdiff/model/decoder.hpp"
#include "riskdiff/model/model.hpp"
#include "riskdiff/train/metrics.hpp"
#include "riskdiff/train/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::train
{

/// Absolute trajectory of every mode, anchored at the last observed state.
inline std::vector<Trajectory> mode_trajectories(
  const data::Scene & s, const model::SceneForecast & f)
{
  std::vector<Trajectory> out;
  for (const auto & m : f.modes) {
    out.push_back(model::compose_trajectory(s.anchor(), data::anchor_heading(s), m, s.dt).positions);
  }
  return out;
}

struct EvalResult
{
  MetricsReport report;
  std::vector<double> ade;  // per test scene, min over modes
  std::vector<double> fde;
};

/// Forecasts K modes per scene and aggregates minADE / minFDE over the
/// baseline-FDE grades of the same scenes.
inline EvalResult evaluate(
  const Model & m, std::span<const data::Scene> scenes, std::span<const double> baseline_fde,
  std::size_t k, std::uint64_t seed)
{
  if (scenes.size() != baseline_fde.size()) {
    throw std::invalid_argument("evaluate: one baseline FDE per scene required");
  }
  const auto forecasts = m.predict(scenes, k, seed);
  EvalResult r;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto modes = mode_trajectories(scenes[i], forecasts[i]);
    r.ade.push_back(min_ade(modes, scenes[i].future));
    r.fde.push_back(min_fde(modes, scenes[i].future));
  }
  r.report = grade_report(r.ade, r.fde, grade_long_tail(baseline_fde));
  nlohmann::json fp = {{"model", m.config().to_json()}, {"modes", k}, {"seed", seed}};
  r.report.fingerprint = fingerprint(fp);
  return r;
}

/// One ablation variant.
struct AblationCell
{
  bool dit = true;
  bool multimodal = true;
  std::size_t decoder_layers = 2;
  std::size_t modes = 10;

  std::string name() const
  {
    return std::string("dit-") + (dit ? "on" : "off") + "_mm-" + (multimodal ? "on" : "off") +
           "_layers-" + std::to_string(decoder_layers) + "_k-" + std::to_string(modes);
  }

  nlohmann::json to_json() const
  {
    return {{"dit", dit}, {"multimodal", multimodal}, {"decoder_layers", decoder_layers},
            {"modes", modes}};
  }

  /// Throws on invalid combinations.
  model::ModelConfig apply(model::ModelConfig base) const
  {
    if (modes == 0 || decoder_layers == 0) {
      throw std::invalid_argument(name() + ": modes and decoder_layers must be >= 1");
    }
    if (!multimodal && modes != 1) {
      throw std::invalid_argument(name() + ": multimodal off requires modes = 1");
    }
    base.use_dit = dit;
    base.multimodal = multimodal;
    base.decoder_layers = decoder_layers;
    base.modes = modes;
    base.validate();
    return base;
  }
};

struct AblationResult
{
  AblationCell cell;
  MetricsReport report;
  std::vector<EpochLog> log;
};

/// Trains and evaluates one variant from scratch.
inline AblationResult run_ablation(
  const AblationCell & cell, const model::ModelConfig & base, const model::FeatureScales & scales,
  const TrainConfig & tc, std::span<const data::Scene> train_scenes,
  std::span<const data::Scene> test_scenes, std::span<const double> test_baseline_fde,
  const TrainOptions & opt = {})
{
  const auto cfg = cell.apply(base);
  Model m(cfg, scales, tc.seed);
  AblationResult r;
  r.cell = cell;
  r.log = train_model(m, train_scenes, tc, opt);
  r.report = evaluate(m, test_scenes, test_baseline_fde, cfg.train_modes(), tc.seed).report;
  r.report.fingerprint =
    fingerprint({{"model", cfg.to_json()}, {"train", tc.to_json()}, {"cell", cell.to_json()}});
  return r;
}

}  // namespace riskdiff::train

#endif  // RISKDIFF__TRAIN__EVALUATE_HPP_
