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

#ifndef RISKDIFF__DATA__SYNTH_HPP_
#define RISKDIFF__DATA__SYNTH_HPP_

#include "riskdiff/data/records.hpp"
#include "riskdiff/data/scene.hpp"
#include "riskdiff/util/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::data
{

struct SynthConfig
{
  std::size_t n_scenes = 1000;
  double fraction_emergency = 0.3;  // per-lane probability of a hard-braking event
  std::uint64_t seed = 0;
  int lanes = 3;
  double dt = kDefaultDt;
  double lane_width = 3.5;          // m
  std::size_t vehicles_per_lane = 8;

  void validate() const
  {
    if (n_scenes == 0) {
      throw std::invalid_argument("synth: n_scenes must be >= 1");
    }
    if (!(fraction_emergency >= 0.0 && fraction_emergency <= 1.0)) {
      throw std::invalid_argument("synth: fraction_emergency must be in [0, 1]");
    }
    if (lanes < 1 || !(dt > 0.0) || !(lane_width > 0.0) || vehicles_per_lane == 0) {
      throw std::invalid_argument("synth: lanes, dt, lane_width and vehicles_per_lane must be positive");
    }
  }
};

/// Car-following parameters. Each vehicle draws its own headway, acceleration
/// and evasive limits around these defaults.
struct IdmParams
{
  double time_headway = 1.2;  // s
  double min_gap = 2.0;       // m
  double max_accel = 1.0;     // m/s^2
  double comfort_decel = 1.5; // m/s^2
  double accel_lo = -3.0;     // comfortable bounds
  double accel_hi = 2.0;
  double evasive_lo = -8.0;
  double swerve_time = 2.5;   // s
  double swerve_prob = 0.6;
};

/// IDM acceleration of a follower with speed v behind a leader at bumper gap
/// `gap` moving at `v_lead`.
inline double idm_accel(double v, double v0, double gap, double v_lead, const IdmParams & p)
{
  const double dv = v - v_lead;
  const double s_star = p.min_gap +
    std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
  const double s = std::max(gap, 0.1);
  return p.max_accel * (1.0 - std::pow(v / v0, 4) - (s_star / s) * (s_star / s));
}

namespace detail
{

struct SimVehicle
{
  std::int64_t id = 0;
  double x = 0.0, y = 0.0, v = 0.0, vy = 0.0;
  double length = 4.5, width = 1.8;
  double v0 = 12.0;
  IdmParams idm;
  double swerve_gap = 15.0;   // gap below which a swerve starts
  double brake_decel = -6.0;
  bool lane_leader = false;
  // lane-leader speed profile
  double target = 0.0;
  double next_target_time = 0.0;
  // emergency state
  int brake_frame = -1;       // >= 0: hard braking starts at this frame
  bool evasive = false;       // allowed to brake beyond the comfortable bound
  bool wants_swerve = false;
  int alert_frame = -1;       // frame from which a swerve may start
  int swerve_frame = -1;      // frame the lateral move started
  double y_from = 0.0, y_to = 0.0;
};

inline double leader_target(Rng & rng)
{
  // stop-and-go: mostly crawling, sometimes moving
  return rng.bernoulli(0.85) ? rng.uniform(0.0, 0.8) : rng.uniform(0.8, 2.0);
}

/// Simulates one episode of `counts[l]` vehicles per lane for kWindowLen
/// frames and appends its records.
inline void simulate_episode(
  const SynthConfig & cfg, const std::vector<std::size_t> & counts, std::uint64_t episode,
  std::int64_t & next_id, std::vector<RawRecord> & out)
{
  const IdmParams p;
  auto rng = substream(cfg.seed, "synth", {episode});
  const double t0 = static_cast<double>(episode) * (static_cast<double>(kWindowLen) * cfg.dt + 10.0);
  const int lanes = cfg.lanes;

  // lanes with an emergency move faster until a vehicle brakes hard
  std::vector<bool> emergency(static_cast<std::size_t>(lanes));
  for (int l = 0; l < lanes; ++l) {
    emergency[static_cast<std::size_t>(l)] = rng.bernoulli(cfg.fraction_emergency);
  }

  std::vector<SimVehicle> cars;
  for (int l = 0; l < lanes; ++l) {
    const bool fast = emergency[static_cast<std::size_t>(l)];
    const double v_init = fast ? rng.uniform(3.0, 5.5) : leader_target(rng);
    double x = rng.uniform(250.0, 300.0);
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(l)]; ++i) {
      SimVehicle c;
      c.id = next_id++;
      c.length = rng.uniform(4.0, 5.2);
      c.width = rng.uniform(1.7, 2.0);
      c.y = cfg.lane_width * l;
      c.v0 = rng.uniform(10.0, 14.0);
      c.idm = p;
      c.idm.time_headway = rng.uniform(0.9, 1.6);
      c.idm.max_accel = rng.uniform(0.7, 1.4);
      c.idm.evasive_lo = rng.uniform(-9.0, -5.0);
      c.idm.swerve_time = rng.uniform(1.5, 3.5);
      c.swerve_gap = rng.uniform(6.0, 20.0);
      c.lane_leader = i == 0;
      c.v = i == 0 ? v_init : std::max(0.0, v_init + rng.uniform(-0.5, 0.5));
      if (i > 0) {
        const auto & ahead = cars.back();
        const double gap = p.min_gap + c.v * c.idm.time_headway + (fast ? rng.uniform(2.0, 8.0) : rng.uniform(0.3, 3.0));
        x = ahead.x - 0.5 * (ahead.length + c.length) - gap;
      }
      c.x = x;
      c.target = v_init;
      c.next_target_time = fast ? 1e9 : rng.uniform(2.0, 5.0);
      cars.push_back(c);
    }
  }

  // emergencies: a vehicle in the front part of a lane brakes hard inside
  // the future horizon, its followers react and some swerve
  for (int l = 0; l < lanes; ++l) {
    if (!emergency[static_cast<std::size_t>(l)]) {
      continue;
    }
    std::vector<std::size_t> lane_idx;
    for (std::size_t i = 0; i < cars.size(); ++i) {
      if (std::abs(cars[i].y - cfg.lane_width * l) < 0.1) {
        lane_idx.push_back(i);
      }
    }
    if (lane_idx.size() < 2) {
      continue;
    }
    // front half of the lane, so that someone is behind
    const auto pick = rng.uniform_int(0, static_cast<std::int64_t>(lane_idx.size() - 1) / 2);
    const std::size_t b = lane_idx[static_cast<std::size_t>(pick)];
    cars[b].brake_frame = static_cast<int>(rng.uniform_int(65, 100));
    cars[b].brake_decel = rng.uniform(-8.0, -4.0);
    for (std::size_t i : lane_idx) {
      if (cars[i].x < cars[b].x) {
        cars[i].evasive = true;
        cars[i].wants_swerve = rng.bernoulli(p.swerve_prob);
        // reaction time 0 to 1.2 s
        cars[i].alert_frame = cars[b].brake_frame + static_cast<int>(rng.uniform_int(0, 12));
      }
    }
  }

  const auto lane_of = [&](double y) {
    const long l = std::lround(y / cfg.lane_width);
    return static_cast<int>(std::clamp<long>(l, 0, lanes - 1));
  };
  const auto lateral_overlap = [](const SimVehicle & a, const SimVehicle & b) {
    return std::abs(a.y - b.y) < 0.5 * (a.width + b.width) + 0.3;
  };

  std::vector<std::size_t> order(cars.size());
  for (int frame = 0; frame < static_cast<int>(kWindowLen); ++frame) {
    const double t = frame * cfg.dt;
    for (const auto & c : cars) {
      RawRecord r;
      r.vehicle_id = c.id;
      r.timestamp = t0 + t;
      r.x = c.x;
      r.y = c.y;
      r.vx = c.v;
      r.vy = c.vy;
      r.length = c.length;
      r.width = c.width;
      r.lane = lane_of(c.y);
      out.push_back(r);
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return cars[a].x != cars[b].x ? cars[a].x > cars[b].x : cars[a].id < cars[b].id;
    });
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      auto & c = cars[order[oi]];
      // nearest laterally overlapping vehicle ahead
      const SimVehicle * lead = nullptr;
      for (std::size_t oj = 0; oj < oi; ++oj) {
        const auto & o = cars[order[oj]];
        if (lateral_overlap(c, o) && (lead == nullptr || o.x < lead->x)) {
          lead = &o;
        }
      }
      const double gap = lead != nullptr ? lead->x - c.x - 0.5 * (lead->length + c.length) : 1e9;

      // swerve decision: once the gap closes, move to a free adjacent lane
      if (c.wants_swerve && c.swerve_frame < 0 && lead != nullptr && frame >= c.alert_frame &&
          gap < c.swerve_gap)
      {
        const int l = lane_of(c.y);
        std::vector<int> options;
        for (int dl : {1, -1}) {
          const int nl = l + dl;
          if (nl < 0 || nl >= lanes) {
            continue;
          }
          bool free = true;
          for (const auto & o : cars) {
            if (&o != &c && lane_of(o.y) == nl &&
                std::abs(o.x - c.x) < 0.5 * (o.length + c.length) + 4.0) {
              free = false;
            }
          }
          if (free) {
            options.push_back(nl);
          }
        }
        if (!options.empty()) {
          const int nl = options[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1))];
          c.swerve_frame = frame;
          c.y_from = c.y;
          c.y_to = cfg.lane_width * nl;
        }
        c.wants_swerve = false;
      }

      double a = 0.0;
      const bool alerted = c.evasive && frame >= c.alert_frame;
      double lo = alerted ? c.idm.evasive_lo : p.accel_lo;
      if (c.brake_frame >= 0 && frame >= c.brake_frame) {
        a = c.brake_decel;
        lo = c.brake_decel;
      } else if (lead == nullptr && c.lane_leader && c.swerve_frame < 0) {
        if (t >= c.next_target_time && c.brake_frame < 0) {
          c.target = leader_target(rng);
          c.next_target_time = t + rng.uniform(3.0, 6.0);
        }
        a = std::clamp(0.8 * (c.target - c.v), -1.5, 1.0);
      } else if (lead == nullptr) {
        a = idm_accel(c.v, c.v0, 1e9, c.v, c.idm);
      } else {
        a = idm_accel(c.v, c.v0, gap, lead->v, c.idm);
      }
      a = std::clamp(a, lo, p.accel_hi);
      const double v_new = std::max(0.0, c.v + a * cfg.dt);
      c.x += 0.5 * (c.v + v_new) * cfg.dt;
      c.v = v_new;
      if (c.swerve_frame >= 0) {
        const double u = std::min(1.0, (frame + 1 - c.swerve_frame) * cfg.dt / c.idm.swerve_time);
        const double y_new =
          c.y_from + (c.y_to - c.y_from) * 0.5 * (1.0 - std::cos(std::numbers::pi * u));
        c.vy = (y_new - c.y) / cfg.dt;
        c.y = y_new;
        if (u >= 1.0) {
          c.vy = 0.0;
        }
      }
      // never drive into the vehicle ahead
      if (lead != nullptr) {
        const double max_x = lead->x - 0.5 * (lead->length + c.length) - 0.5;
        if (c.x > max_x) {
          c.x = max_x;
          c.v = std::min(c.v, lead->v);
        }
      }
    }
  }
}

}  // namespace detail

/// Multi-lane congested traffic from an IDM car-following integrator. Each
/// episode lasts exactly one scene window, so every vehicle yields one scene
/// and the corpus holds exactly n_scenes tracks. Episodes are separated in
/// time and never interact.
inline std::vector<RawRecord> synth_generate(const SynthConfig & cfg)
{
  cfg.validate();
  std::vector<RawRecord> out;
  const std::size_t per_episode = cfg.vehicles_per_lane * static_cast<std::size_t>(cfg.lanes);
  out.reserve(cfg.n_scenes * kWindowLen);
  std::int64_t next_id = 1;
  std::size_t remaining = cfg.n_scenes;
  for (std::uint64_t e = 0; remaining > 0; ++e) {
    const std::size_t n = std::min(per_episode, remaining);
    std::vector<std::size_t> counts(static_cast<std::size_t>(cfg.lanes), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[i % counts.size()];
    }
    detail::simulate_episode(cfg, counts, e, next_id, out);
    remaining -= n;
  }
  return out;
}

}  // namespace riskdiff::data

#endif  // RISKDIFF__DATA__SYNTH_HPP_
