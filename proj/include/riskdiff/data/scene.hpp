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

#ifndef RISKDIFF__DATA__SCENE_HPP_
#define RISKDIFF__DATA__SCENE_HPP_

#include "riskdiff/risk/risk_graph.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::data
{

inline constexpr std::size_t kHistoryLen = 75;
inline constexpr std::size_t kFutureLen = 50;
inline constexpr std::size_t kWindowLen = kHistoryLen + kFutureLen;
inline constexpr double kDefaultDt = 0.1;

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2 &, const Vec2 &) = default;
};

struct TrafficFlowFeatures
{
  double density = 0.0;     // veh/km
  double flow_rate = 0.0;   // veh/h
  double mean_speed = 0.0;  // km/h

  void validate() const
  {
    for (double v : {density, flow_rate, mean_speed}) {
      if (!std::isfinite(v) || v < 0.0) {
        throw std::invalid_argument("traffic flow features must be finite and >= 0");
      }
    }
  }
};

/// One prediction instance: 75 observed frames and 50 future frames of one
/// vehicle, plus the context sampled at the last observed frame.
struct Scene
{
  std::int64_t scene_id = 0;
  std::int64_t vehicle_id = 0;
  double t_anchor = 0.0;  // timestamp of the last history frame
  double dt = kDefaultDt;
  std::vector<Vec2> history;        // kHistoryLen absolute positions
  std::vector<Vec2> delta_history;  // kHistoryLen increments, first is (0, 0)
  std::vector<double> speeds;       // kHistoryLen, m/s
  risk::NeighborSet neighbors;      // at the anchor frame
  risk::RiskVector risk{};          // pair weights to the neighbor slots
  TrafficFlowFeatures flow;
  std::vector<Vec2> future;  // kFutureLen absolute positions

  const Vec2 & anchor() const { return history.back(); }

  void validate() const
  {
    const std::string id = "scene " + std::to_string(scene_id);
    if (history.size() != kHistoryLen || delta_history.size() != kHistoryLen ||
        speeds.size() != kHistoryLen) {
      throw std::invalid_argument(id + ": history must have " + std::to_string(kHistoryLen) +
                                  " frames");
    }
    if (future.size() != kFutureLen) {
      throw std::invalid_argument(id + ": future must have " + std::to_string(kFutureLen) +
                                  " frames");
    }
    if (!(dt > 0.0)) {
      throw std::invalid_argument(id + ": dt must be positive");
    }
    for (double w : risk) {
      if (!std::isfinite(w) || w < 0.0) {
        throw std::invalid_argument(id + ": risk weights must be finite and >= 0");
      }
    }
    flow.validate();
  }
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a)
{
  constexpr double kPi = std::numbers::pi;
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

/// Heading from a displacement; a near-zero step keeps the previous heading.
inline double step_heading(double dx, double dy, double previous, double eps = 1e-3)
{
  return std::hypot(dx, dy) > eps ? std::atan2(dy, dx) : previous;
}

/// Heading at the anchor frame, from the last history step that moved.
inline double anchor_heading(const Scene & s)
{
  double h = 0.0;
  for (std::size_t k = 1; k < s.history.size(); ++k) {
    h = step_heading(s.history[k].x - s.history[k - 1].x, s.history[k].y - s.history[k - 1].y, h);
  }
  return h;
}

/// Ground-truth future as per-step (dx, dy, dtheta), dtheta from atan2
/// differences of consecutive positions, wrapped to (-pi, pi].
inline std::vector<std::array<double, 3>> future_displacements(const Scene & s)
{
  std::vector<std::array<double, 3>> out(s.future.size());
  Vec2 prev = s.anchor();
  double heading = anchor_heading(s);
  for (std::size_t k = 0; k < s.future.size(); ++k) {
    const double dx = s.future[k].x - prev.x;
    const double dy = s.future[k].y - prev.y;
    const double h = step_heading(dx, dy, heading);
    out[k] = {dx, dy, wrap_angle(h - heading)};
    heading = h;
    prev = s.future[k];
  }
  return out;
}

}  // namespace riskdiff::data

#endif  // RISKDIFF__DATA__SCENE_HPP_
