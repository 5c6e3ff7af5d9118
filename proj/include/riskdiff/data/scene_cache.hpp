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

#ifndef RISKDIFF__DATA__SCENE_CACHE_HPP_
#define RISKDIFF__DATA__SCENE_CACHE_HPP_

#include "riskdiff/autodiff/checkpoint.hpp"
#include "riskdiff/data/scene.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace riskdiff::data
{

inline constexpr std::size_t kNeighborFields = 8;  // present, x, y, vx, vy, length, width, lane

/// Writes `<stem>.json` (index: ids, anchors, neighbor ids, user metadata)
/// and `<stem>.bin` (float32 arrays) using the checkpoint blob layout.
inline void save_scene_cache(
  const std::filesystem::path & stem, std::span<const Scene> scenes,
  const nlohmann::json & metadata = nlohmann::json::object())
{
  const std::size_t n = scenes.size();
  io::BlobEntry hist{"history", {n, kHistoryLen, 2}, {}};
  io::BlobEntry delta{"delta_history", {n, kHistoryLen, 2}, {}};
  io::BlobEntry speeds{"speeds", {n, kHistoryLen}, {}};
  io::BlobEntry future{"future", {n, kFutureLen, 2}, {}};
  io::BlobEntry risk{"risk", {n, risk::kNumSlots}, {}};
  io::BlobEntry flow{"flow", {n, 3}, {}};
  io::BlobEntry nb{"neighbors", {n, risk::kNumSlots, kNeighborFields}, {}};
  nlohmann::json index = nlohmann::json::array();
  for (const auto & s : scenes) {
    s.validate();
    for (std::size_t k = 0; k < kHistoryLen; ++k) {
      hist.data.push_back(static_cast<float>(s.history[k].x));
      hist.data.push_back(static_cast<float>(s.history[k].y));
      delta.data.push_back(static_cast<float>(s.delta_history[k].x));
      delta.data.push_back(static_cast<float>(s.delta_history[k].y));
      speeds.data.push_back(static_cast<float>(s.speeds[k]));
    }
    for (const auto & p : s.future) {
      future.data.push_back(static_cast<float>(p.x));
      future.data.push_back(static_cast<float>(p.y));
    }
    for (double w : s.risk) {
      risk.data.push_back(static_cast<float>(w));
    }
    flow.data.push_back(static_cast<float>(s.flow.density));
    flow.data.push_back(static_cast<float>(s.flow.flow_rate));
    flow.data.push_back(static_cast<float>(s.flow.mean_speed));
    nlohmann::json ids = nlohmann::json::array();
    for (const auto & slot : s.neighbors.slots) {
      if (slot) {
        for (double v : {1.0, slot->x, slot->y, slot->vx, slot->vy, slot->length, slot->width,
                         static_cast<double>(slot->lane)}) {
          nb.data.push_back(static_cast<float>(v));
        }
        ids.push_back(slot->id);
      } else {
        nb.data.insert(nb.data.end(), kNeighborFields, 0.0F);
        ids.push_back(nullptr);
      }
    }
    index.push_back({{"scene_id", s.scene_id},
                     {"vehicle_id", s.vehicle_id},
                     {"t_anchor", s.t_anchor},
                     {"dt", s.dt},
                     {"neighbor_ids", ids}});
  }
  io::BlobBundle bundle;
  bundle.entries = {hist, delta, speeds, future, risk, flow, nb};
  bundle.metadata = {{"kind", "scene-cache"}, {"count", n}, {"scenes", index}, {"user", metadata}};
  io::write_bundle(stem, bundle);
}

struct SceneCache
{
  std::vector<Scene> scenes;
  nlohmann::json metadata;
};

inline SceneCache load_scene_cache(const std::filesystem::path & stem)
{
  const auto bundle = io::read_bundle(stem);
  if (bundle.metadata.value("kind", "") != "scene-cache") {
    throw io::FormatError(stem.string() + ": not a scene cache");
  }
  const auto & index = bundle.metadata.at("scenes");
  const std::size_t n = index.size();
  const auto & hist = bundle.get("history").data;
  const auto & delta = bundle.get("delta_history").data;
  const auto & speeds = bundle.get("speeds").data;
  const auto & future = bundle.get("future").data;
  const auto & risk = bundle.get("risk").data;
  const auto & flow = bundle.get("flow").data;
  const auto & nb = bundle.get("neighbors").data;
  if (hist.size() != n * kHistoryLen * 2 || future.size() != n * kFutureLen * 2 ||
      nb.size() != n * risk::kNumSlots * kNeighborFields)
  {
    throw io::FormatError(stem.string() + ": array sizes do not match the index");
  }
  SceneCache out;
  out.metadata = bundle.metadata.value("user", nlohmann::json::object());
  out.scenes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Scene & s = out.scenes[i];
    const auto & e = index[i];
    s.scene_id = e.at("scene_id").get<std::int64_t>();
    s.vehicle_id = e.at("vehicle_id").get<std::int64_t>();
    s.t_anchor = e.at("t_anchor").get<double>();
    s.dt = e.at("dt").get<double>();
    for (std::size_t k = 0; k < kHistoryLen; ++k) {
      const std::size_t o = (i * kHistoryLen + k) * 2;
      s.history.push_back({hist[o], hist[o + 1]});
      s.delta_history.push_back({delta[o], delta[o + 1]});
      s.speeds.push_back(speeds[i * kHistoryLen + k]);
    }
    for (std::size_t k = 0; k < kFutureLen; ++k) {
      const std::size_t o = (i * kFutureLen + k) * 2;
      s.future.push_back({future[o], future[o + 1]});
    }
    for (std::size_t k = 0; k < risk::kNumSlots; ++k) {
      s.risk[k] = risk[i * risk::kNumSlots + k];
      const float * f = nb.data() + (i * risk::kNumSlots + k) * kNeighborFields;
      if (f[0] != 0.0F) {
        risk::VehicleState v;
        v.id = e.at("neighbor_ids").at(k).get<std::int64_t>();
        v.x = f[1];
        v.y = f[2];
        v.vx = f[3];
        v.vy = f[4];
        v.length = f[5];
        v.width = f[6];
        v.lane = static_cast<int>(f[7]);
        s.neighbors.slots[k] = v;
      }
    }
    s.flow = {flow[i * 3], flow[i * 3 + 1], flow[i * 3 + 2]};
    s.validate();
  }
  return out;
}

}  // namespace riskdiff::data

#endif  // RISKDIFF__DATA__SCENE_CACHE_HPP_
