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

#ifndef RISKDIFF__TRAIN__TRAINER_HPP_
#define RISKDIFF__TRAIN__TRAINER_HPP_

#include "riskdiff/autodiff/adam.hpp"
#include "riskdiff/autodiff/checkpoint.hpp"
#include "riskdiff/data/scene.hpp"
#include "riskdiff/model/model.hpp"
#include "riskdiff/util/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::train
{

struct TrainConfig
{
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  double lr = 1e-4;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (batch_size == 0 || epochs == 0 || !(lr > 0.0)) {
      throw std::invalid_argument("train config: batch_size, epochs and lr must be positive");
    }
  }

  nlohmann::json to_json() const
  {
    return {{"batch_size", batch_size}, {"epochs", epochs}, {"lr", lr}, {"seed", seed}};
  }
  static TrainConfig from_json(const nlohmann::json & j)
  {
    TrainConfig c;
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
};

struct EpochLog
{
  std::size_t epoch = 0;  // 1-based
  double l_diff = 0.0;
  double l_traj = 0.0;
  double l_conf = 0.0;
  double l_total = 0.0;
};

inline nlohmann::json to_json(const EpochLog & e)
{
  return {{"epoch", e.epoch}, {"l_diff", e.l_diff}, {"l_traj", e.l_traj},
          {"l_conf", e.l_conf}, {"l_total", e.l_total}};
}

inline EpochLog epoch_log_from_json(const nlohmann::json & j)
{
  return {j.at("epoch").get<std::size_t>(), j.at("l_diff").get<double>(),
          j.at("l_traj").get<double>(), j.at("l_conf").get<double>(),
          j.at("l_total").get<double>()};
}

class NonFiniteLoss : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

using Model = model::RiskDiffModel<float>;

inline constexpr const char * kCheckpointKind = "riskdiff-model";

/// Parameters, Adam moments and everything needed to rebuild the model.
inline void save_checkpoint(
  const std::filesystem::path & stem, const Model & m, const ad::AdamState<float> * adam,
  const TrainConfig & tc, const std::vector<EpochLog> & log)
{
  io::BlobBundle b;
  io::append_params(b, m.params(), adam);
  nlohmann::json jl = nlohmann::json::array();
  for (const auto & e : log) {
    jl.push_back(to_json(e));
  }
  b.metadata["kind"] = kCheckpointKind;
  b.metadata["model"] = m.config().to_json();
  b.metadata["scales"] = m.scales().to_json();
  b.metadata["train"] = tc.to_json();
  b.metadata["epoch"] = log.size();
  b.metadata["loss_log"] = jl;
  io::write_bundle(stem, b);
}

struct LoadedModel
{
  Model model;
  TrainConfig train;
  std::vector<EpochLog> log;
  io::BlobBundle bundle;
};

inline LoadedModel load_checkpoint(const std::filesystem::path & stem)
{
  auto b = io::read_bundle(stem);
  if (b.metadata.value("kind", "") != kCheckpointKind) {
    throw io::FormatError(stem.string() + ": not a model checkpoint");
  }
  const auto cfg = model::ModelConfig::from_json(b.metadata.at("model"));
  const auto scales = model::FeatureScales::from_json(b.metadata.at("scales"));
  const auto tc = TrainConfig::from_json(b.metadata.at("train"));
  Model m(cfg, scales, tc.seed);
  io::restore_params(b, m.params());
  std::vector<EpochLog> log;
  for (const auto & e : b.metadata.at("loss_log")) {
    log.push_back(epoch_log_from_json(e));
  }
  return {std::move(m), tc, std::move(log), std::move(b)};
}

struct TrainOptions
{
  std::filesystem::path checkpoint;  // empty: no checkpointing
  bool resume = false;
  std::size_t stop_after = 0;  // stop once this many epochs are done (0: run all)
  std::function<void(const EpochLog &)> on_epoch;
};

/// Mini-batch Adam on the joint objective. The shuffle of epoch e and the
/// randomness of batch j come from (seed, e) and (seed, e, j), so a resumed
/// run continues exactly like an uninterrupted one.
inline std::vector<EpochLog> train_model(
  Model & m, std::span<const data::Scene> scenes, const TrainConfig & tc,
  const TrainOptions & opt = {})
{
  tc.validate();
  if (scenes.empty()) {
    throw std::invalid_argument("train: no training scenes");
  }
  ad::AdamConfig ac;
  ac.lr = tc.lr;
  ad::AdamState<float> adam(m.params(), ac);
  std::vector<EpochLog> log;
  if (opt.resume && !opt.checkpoint.empty() &&
      std::filesystem::exists(opt.checkpoint.string() + ".json"))
  {
    const auto b = io::read_bundle(opt.checkpoint);
    if (b.metadata.at("model") != m.config().to_json() ||
        b.metadata.at("train") != tc.to_json())
    {
      throw std::invalid_argument("train: checkpoint " + opt.checkpoint.string() +
                                  " was written with a different configuration");
    }
    io::restore_params(b, m.params(), &adam);
    for (const auto & e : b.metadata.at("loss_log")) {
      log.push_back(epoch_log_from_json(e));
    }
  }

  std::vector<std::size_t> idx(scenes.size());
  ad::Tape<float> tape;
  const std::size_t last = opt.stop_after > 0 ? std::min(opt.stop_after, tc.epochs) : tc.epochs;
  for (std::size_t epoch = log.size(); epoch < last; ++epoch) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto shuffle_rng = substream(tc.seed, "train.shuffle", {epoch});
    shuffle_rng.shuffle(idx);
    EpochLog e;
    e.epoch = epoch + 1;
    std::size_t batch_no = 0;
    for (std::size_t lo = 0; lo < idx.size(); lo += tc.batch_size, ++batch_no) {
      const std::size_t hi = std::min(idx.size(), lo + tc.batch_size);
      std::vector<data::Scene> part;
      for (std::size_t i = lo; i < hi; ++i) {
        part.push_back(scenes[idx[i]]);
      }
      const auto batch = model::make_batch<float>(part, m.scales());
      auto rng = substream(tc.seed, "train.batch", {epoch, batch_no});
      ad::TapeScope<float> scope(tape);
      model::LossTerms<float> l;
      try {
        l = m.losses(batch, rng, true);
      } catch (const std::exception & ex) {
        tape.clear();
        throw NonFiniteLoss("epoch " + std::to_string(epoch + 1) + " batch " +
                            std::to_string(batch_no) + ": " + ex.what());
      }
      m.params().zero_grad();
      tape.backward(l.total);
      tape.clear();
      try {
        adam.step(m.params());
      } catch (const std::exception & ex) {
        throw NonFiniteLoss("epoch " + std::to_string(epoch + 1) + " batch " +
                            std::to_string(batch_no) + ": " + ex.what());
      }
      const double w = static_cast<double>(hi - lo);
      e.l_diff += w * static_cast<double>(l.diffusion.item());
      e.l_traj += w * static_cast<double>(l.trajectory.item());
      e.l_conf += w * static_cast<double>(l.confidence.item());
      e.l_total += w * static_cast<double>(l.total.item());
    }
    const double n = static_cast<double>(scenes.size());
    e.l_diff /= n;
    e.l_traj /= n;
    e.l_conf /= n;
    e.l_total /= n;
    log.push_back(e);
    if (!opt.checkpoint.empty()) {
      save_checkpoint(opt.checkpoint, m, &adam, tc, log);
    }
    if (opt.on_epoch) {
      opt.on_epoch(e);
    }
  }
  return log;
}

}  // namespace riskdiff::train

#endif  // RISKDIFF__TRAIN__TRAINER_HPP_
