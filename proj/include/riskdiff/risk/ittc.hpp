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

#ifndef RISKDIFF__RISK__ITTC_HPP_
#define RISKDIFF__RISK__ITTC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace riskdiff::risk
{

/// Saturation value for inverse time-to-collision, in 1/s (TTC of 0.1 s).
inline constexpr double kIttcCap = 10.0;

struct VehicleState
{
  std::int64_t id = 0;
  double x = 0.0;       // m, longitudinal
  double y = 0.0;       // m, lateral (increases towards higher lane indices)
  double vx = 0.0;      // m/s
  double vy = 0.0;      // m/s
  double length = 4.5;  // m
  double width = 1.8;   // m
  int lane = 0;

  void validate() const
  {
    const bool finite = std::isfinite(x) && std::isfinite(y) && std::isfinite(vx) &&
      std::isfinite(vy) && std::isfinite(length) && std::isfinite(width);
    if (!finite) {
      throw std::invalid_argument("vehicle " + std::to_string(id) + ": non-finite state");
    }
    if (!(length > 0.0) || !(width > 0.0)) {
      throw std::invalid_argument("vehicle " + std::to_string(id) + ": non-positive extent");
    }
  }
};

namespace detail
{

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Inverse time until the bumper gap along one axis closes.
///   gap     = |p_a - p_b| - (extent_a + extent_b) / 2
///   closing = rate at which |p_a - p_b| shrinks (rear minus front speed)
/// Zero when not closing; saturates at kIttcCap, including when the extents
/// already overlap.
inline double axis_ittc(double pa, double pb, double va, double vb, double ea, double eb)
{
  const double d = pa - pb;
  const double gap = std::abs(d) - (ea + eb) / 2.0;
  const double closing = -sign(d) * (va - vb);
  if (!(closing > 0.0)) {
    return 0.0;
  }
  if (gap <= 0.0) {
    return kIttcCap;
  }
  return std::min(closing / gap, kIttcCap);
}

inline double axis_gap(double pa, double pb, double ea, double eb)
{
  return std::abs(pa - pb) - (ea + eb) / 2.0;
}

}  // namespace detail

/// ITTC along x with vehicle lengths as extents.
inline double longitudinal_ittc(const VehicleState & a, const VehicleState & b)
{
  return detail::axis_ittc(a.x, b.x, a.vx, b.vx, a.length, b.length);
}

/// ITTC along y with vehicle widths as extents.
inline double lateral_ittc(const VehicleState & a, const VehicleState & b)
{
  return detail::axis_ittc(a.y, b.y, a.vy, b.vy, a.width, b.width);
}

/// Edge weight between two vehicles: the larger of the two axis ITTCs.
///
/// An axis whose extents already overlap (e.g. the lateral axis for two cars
/// in one lane) is not an interaction axis and contributes nothing; if both
/// axes overlap the boxes intersect, which saturates whenever either axis is
/// still closing.
inline double pair_weight(const VehicleState & a, const VehicleState & b)
{
  const double gx = detail::axis_gap(a.x, b.x, a.length, b.length);
  const double gy = detail::axis_gap(a.y, b.y, a.width, b.width);
  const double lon = longitudinal_ittc(a, b);
  const double lat = lateral_ittc(a, b);
  if (gx > 0.0 && gy > 0.0) {
    return std::max(lon, lat);
  }
  if (gx > 0.0) {
    return lon;
  }
  if (gy > 0.0) {
    return lat;
  }
  return (lon > 0.0 || lat > 0.0) ? kIttcCap : 0.0;
}

}  // namespace riskdiff::risk

#endif  // RISKDIFF__RISK__ITTC_HPP_
