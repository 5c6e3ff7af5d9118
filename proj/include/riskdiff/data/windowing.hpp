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

#ifndef RISKDIFF__DATA__WINDOWING_HPP_
#define RISKDIFF__DATA__WINDOWING_HPP_

#include "riskdiff/data/records.hpp"
#include "riskdiff/data/scene.hpp"
#include "riskdiff/risk/risk_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace riskdiff::data
{

struct RoadSection
{
  double center_x = 0.0;  // m
  double length = 500.0;  // m
};

struct TimeWindow
{
  double begin = 0.0;  // s, inclusive
  double end = 0.0;    // s, inclusive
};

inline constexpr double kSectionLength = 500.0;

inline risk::VehicleState to_state(const RawRecord & r)
{
  risk::VehicleState s;
  s.id = r.vehicle_id;
  s.x = r.x;
  s.y = r.y;
  s.vx = r.vx;
  s.vy = r.vy;
  s.length = r.length;
  s.width = r.width;
  s.lane = r.lane;
  return s;
}

namespace detail
{

/// Density from the mean per-frame count, arithmetic mean speed in km/h,
/// q = k v.
inline TrafficFlowFeatures flow_from_counts(
  std::size_t in_section, std::size_t frames, double speed_sum, double length_m)
{
  TrafficFlowFeatures f;
  if (in_section == 0 || frames == 0) {
    return f;
  }
  const double per_frame = static_cast<double>(in_section) / static_cast<double>(frames);
  f.density = per_frame / (length_m / 1000.0);
  f.mean_speed = 3.6 * speed_sum / static_cast<double>(in_section);
  f.flow_rate = f.density * f.mean_speed;
  return f;
}

}  // namespace detail

/// Flow features of one road section over a time window. Frames are the
/// distinct timestamps inside the window; density is the mean number of
/// vehicles in the section per frame over the section length (veh/km).
inline TrafficFlowFeatures traffic_flow_features(
  std::span<const RawRecord> records, const RoadSection & section, const TimeWindow & window)
{
  if (!(section.length > 0.0)) {
    throw std::invalid_argument("traffic_flow_features: section length must be positive");
  }
  std::set<double> frames;
  std::size_t n = 0;
  double speed_sum = 0.0;
  for (const auto & r : records) {
    if (r.timestamp < window.begin || r.timestamp > window.end) {
      continue;
    }
    frames.insert(r.timestamp);
    if (std::abs(r.x - section.center_x) <= 0.5 * section.length) {
      ++n;
      speed_sum += std::hypot(r.vx, r.vy);
    }
  }
  return detail::flow_from_counts(n, frames.size(), speed_sum, section.length);
}

struct WindowStats
{
  std::size_t tracks = 0;
  std::size_t short_segments = 0;  // contiguous segments shorter than one window
  std::size_t gaps = 0;            // breaks inside a vehicle's track
  std::size_t scenes = 0;
};

/// Slides a 125-frame window over every contiguous vehicle segment. Each
/// window becomes one scene: 75 history and 50 future frames, neighbors and
/// risk at the last history frame, flow features over a 500 m section
/// centered on the ego and the history span. Scene ids follow vehicle id,
/// then window start.
inline std::vector<Scene> window_scenes(
  std::span<const RawRecord> records, double dt = kDefaultDt, std::size_t stride = 25,
  WindowStats * stats = nullptr)
{
  if (!(dt > 0.0) || stride == 0) {
    throw std::invalid_argument("window_scenes: dt and stride must be positive");
  }
  auto frame_of = [dt](double t) { return static_cast<std::int64_t>(std::llround(t / dt)); };

  std::map<std::int64_t, std::vector<std::size_t>> by_frame;
  std::map<std::int64_t, std::vector<std::size_t>> by_vehicle;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_frame[frame_of(records[i].timestamp)].push_back(i);
    by_vehicle[records[i].vehicle_id].push_back(i);
  }

  WindowStats st;
  std::vector<Scene> out;
  for (auto & [vid, idx] : by_vehicle) {
    ++st.tracks;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return records[a].timestamp < records[b].timestamp;
    });
    // split into runs of consecutive frames
    std::size_t run_start = 0;
    for (std::size_t i = 1; i <= idx.size(); ++i) {
      const bool breaks = i == idx.size() ||
        frame_of(records[idx[i]].timestamp) != frame_of(records[idx[i - 1]].timestamp) + 1;
      if (!breaks) {
        continue;
      }
      if (i < idx.size()) {
        ++st.gaps;
      }
      const std::size_t len = i - run_start;
      if (len < kWindowLen) {
        ++st.short_segments;
      }
      for (std::size_t w = run_start; w + kWindowLen <= i; w += stride) {
        Scene s;
        s.scene_id = static_cast<std::int64_t>(out.size());
        s.vehicle_id = vid;
        s.dt = dt;
        for (std::size_t k = 0; k < kHistoryLen; ++k) {
          const auto & r = records[idx[w + k]];
          s.history.push_back({r.x, r.y});
          s.speeds.push_back(std::hypot(r.vx, r.vy));
        }
        s.delta_history.resize(kHistoryLen);
        for (std::size_t k = 1; k < kHistoryLen; ++k) {
          s.delta_history[k] = {s.history[k].x - s.history[k - 1].x,
                                s.history[k].y - s.history[k - 1].y};
        }
        for (std::size_t k = kHistoryLen; k < kWindowLen; ++k) {
          const auto & r = records[idx[w + k]];
          s.future.push_back({r.x, r.y});
        }
        const auto & anchor = records[idx[w + kHistoryLen - 1]];
        s.t_anchor = anchor.timestamp;
        const auto ego = to_state(anchor);
        std::vector<risk::VehicleState> others;
        for (std::size_t j : by_frame[frame_of(anchor.timestamp)]) {
          if (records[j].vehicle_id != vid) {
            others.push_back(to_state(records[j]));
          }
        }
        s.neighbors = risk::select_neighbors(ego, others);
        s.risk = risk::risk_feature_vector(ego, s.neighbors);

        const std::int64_t f0 = frame_of(records[idx[w]].timestamp);
        const std::int64_t f1 = frame_of(anchor.timestamp);
        std::size_t n = 0;
        double speed_sum = 0.0;
        std::size_t frames = 0;
        for (std::int64_t f = f0; f <= f1; ++f) {
          const auto it = by_frame.find(f);
          if (it == by_frame.end()) {
            continue;
          }
          ++frames;
          for (std::size_t j : it->second) {
            if (std::abs(records[j].x - anchor.x) <= 0.5 * kSectionLength) {
              ++n;
              speed_sum += std::hypot(records[j].vx, records[j].vy);
            }
          }
        }
        s.flow = detail::flow_from_counts(n, frames, speed_sum, kSectionLength);
        out.push_back(std::move(s));
      }
      run_start = i;
    }
  }
  st.scenes = out.size();
  if (stats != nullptr) {
    *stats = st;
  }
  return out;
}

}  // namespace riskdiff::data

#endif  // RISKDIFF__DATA__WINDOWING_HPP_
