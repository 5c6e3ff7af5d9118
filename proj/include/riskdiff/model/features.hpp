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

#ifndef RISKDIFF__MODEL__FEATURES_HPP_
#define RISKDIFF__MODEL__FEATURES_HPP_

#include "riskdiff/data/scene.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::model
{

inline constexpr std::size_t kTrajFeatures = 4 * data::kHistoryLen;  // rel. pos + increments
inline constexpr std::size_t kRiskFeatures = risk::kNumSlots;
inline constexpr std::size_t kEnvFeatures = 3;
inline constexpr std::size_t kVelFeatures = 6;
inline constexpr std::size_t kStepChannels = 3;  // dx, dy, dtheta
inline constexpr std::size_t kFutureFeatures = kStepChannels * data::kFutureLen;

struct VelocityStats
{
  double accel = 0.0;  // m/s^2
  double mean = 0.0;   // m/s
  double std = 0.0;    // m/s
  double kurtosis = 0.0;  // excess
  double skewness = 0.0;
  double cv = 0.0;
};

/// Population moments of a speed sequence. Skewness and kurtosis are 0 when
/// the spread is below eps; cv is 0 when |mean| is below eps.
inline VelocityStats velocity_statistics(std::span<const double> v, double dt, double eps = 1e-9)
{
  if (v.size() < 2) {
    throw std::invalid_argument("velocity_statistics: need at least 2 samples");
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("velocity_statistics: dt must be positive");
  }
  const double n = static_cast<double>(v.size());
  VelocityStats s;
  s.accel = (v.back() - v.front()) / ((n - 1.0) * dt);
  double sum = 0.0;
  for (double x : v) {
    sum += x;
  }
  s.mean = sum / n;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = x - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.std = std::sqrt(m2);
  if (s.std >= eps) {
    s.skewness = m3 / (m2 * s.std);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  if (std::abs(s.mean) > eps) {
    s.cv = s.std / s.mean;
  }
  return s;
}

/// Per-corpus scales, fixed when the training set is prepared and stored
/// with every checkpoint.
struct FeatureScales
{
  double history_pos_x = 1.0;
  double history_pos_y = 1.0;
  double history_inc_x = 1.0;
  double history_inc_y = 1.0;
  double future_dx = 1.0;
  double future_dy = 1.0;
  double future_dtheta = 1.0;

  nlohmann::json to_json() const
  {
    return {{"history_pos_x", history_pos_x}, {"history_pos_y", history_pos_y},
            {"history_inc_x", history_inc_x}, {"history_inc_y", history_inc_y},
            {"future_dx", future_dx},         {"future_dy", future_dy},
            {"future_dtheta", future_dtheta}};
  }

  static FeatureScales from_json(const nlohmann::json & j)
  {
    FeatureScales s;
    s.history_pos_x = j.at("history_pos_x").get<double>();
    s.history_pos_y = j.at("history_pos_y").get<double>();
    s.history_inc_x = j.at("history_inc_x").get<double>();
    s.history_inc_y = j.at("history_inc_y").get<double>();
    s.future_dx = j.at("future_dx").get<double>();
    s.future_dy = j.at("future_dy").get<double>();
    s.future_dtheta = j.at("future_dtheta").get<double>();
    return s;
  }
};

/// Root-mean-square scales over a set of scenes, floored so that a
/// degenerate corpus (e.g. no lateral motion) does not divide by zero.
inline FeatureScales fit_feature_scales(std::span<const data::Scene> scenes, double floor = 1e-3)
{
  if (scenes.empty()) {
    throw std::invalid_argument("fit_feature_scales: no scenes");
  }
  double px = 0, py = 0, ix = 0, iy = 0, fx = 0, fy = 0, ft = 0;
  double nh = 0, nf = 0;
  for (const auto & s : scenes) {
    const auto & a = s.anchor();
    for (std::size_t k = 0; k < s.history.size(); ++k) {
      px += (s.history[k].x - a.x) * (s.history[k].x - a.x);
      py += (s.history[k].y - a.y) * (s.history[k].y - a.y);
      ix += s.delta_history[k].x * s.delta_history[k].x;
      iy += s.delta_history[k].y * s.delta_history[k].y;
      nh += 1;
    }
    for (const auto & d : data::future_displacements(s)) {
      fx += d[0] * d[0];
      fy += d[1] * d[1];
      ft += d[2] * d[2];
      nf += 1;
    }
  }
  auto rms = [&](double acc, double n) { return std::max(std::sqrt(acc / n), floor); };
  FeatureScales out;
  out.history_pos_x = rms(px, nh);
  out.history_pos_y = rms(py, nh);
  out.history_inc_x = rms(ix, nh);
  out.history_inc_y = rms(iy, nh);
  out.future_dx = rms(fx, nf);
  out.future_dy = rms(fy, nf);
  out.future_dtheta = rms(ft, nf);
  return out;
}

/// Fixed input scales for the flow triple and the velocity statistics.
inline constexpr double kDensityScale = 100.0;  // veh/km
inline constexpr double kFlowRateScale = 2000.0;  // veh/h
inline constexpr double kSpeedScale = 40.0;  // km/h
inline constexpr std::array<double, kVelFeatures> kVelScales{2.0, 10.0, 2.0, 10.0, 3.0, 1.0};

/// History positions relative to the last observed point, then increments,
/// each divided by its corpus scale. Length kTrajFeatures.
template <class T>
void trajectory_features(const data::Scene & s, const FeatureScales & sc, T * out)
{
  const auto & a = s.anchor();
  const std::size_t n = data::kHistoryLen;
  for (std::size_t k = 0; k < n; ++k) {
    out[2 * k] = static_cast<T>((s.history[k].x - a.x) / sc.history_pos_x);
    out[2 * k + 1] = static_cast<T>((s.history[k].y - a.y) / sc.history_pos_y);
    out[2 * n + 2 * k] = static_cast<T>(s.delta_history[k].x / sc.history_inc_x);
    out[2 * n + 2 * k + 1] = static_cast<T>(s.delta_history[k].y / sc.history_inc_y);
  }
}

template <class T>
void risk_features(const data::Scene & s, T * out)
{
  for (std::size_t k = 0; k < kRiskFeatures; ++k) {
    out[k] = static_cast<T>(s.risk[k]);
  }
}

template <class T>
void env_features(const data::TrafficFlowFeatures & f, T * out)
{
  out[0] = static_cast<T>(f.density / kDensityScale);
  out[1] = static_cast<T>(f.flow_rate / kFlowRateScale);
  out[2] = static_cast<T>(f.mean_speed / kSpeedScale);
}

template <class T>
void velocity_features(const data::Scene & s, T * out)
{
  const auto v = velocity_statistics(s.speeds, s.dt);
  const double raw[kVelFeatures] = {v.accel, v.mean, v.std, v.kurtosis, v.skewness, v.cv};
  for (std::size_t k = 0; k < kVelFeatures; ++k) {
    out[k] = static_cast<T>(raw[k] / kVelScales[k]);
  }
}

/// Ground-truth future, (dx, dy, dtheta) per step divided by the corpus
/// scales. Length kFutureFeatures.
template <class T>
void future_features(const data::Scene & s, const FeatureScales & sc, T * out)
{
  const auto d = data::future_displacements(s);
  for (std::size_t k = 0; k < d.size(); ++k) {
    out[3 * k] = static_cast<T>(d[k][0] / sc.future_dx);
    out[3 * k + 1] = static_cast<T>(d[k][1] / sc.future_dy);
    out[3 * k + 2] = static_cast<T>(d[k][2] / sc.future_dtheta);
  }
}

}  // namespace riskdiff::model

#endif  // RISKDIFF__MODEL__FEATURES_HPP_
