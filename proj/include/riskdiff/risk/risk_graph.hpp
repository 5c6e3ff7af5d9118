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

#ifndef RISKDIFF__RISK__RISK_GRAPH_HPP_
#define RISKDIFF__RISK__RISK_GRAPH_HPP_

#include "riskdiff/risk/ittc.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::risk
{

enum class Slot : std::size_t
{
  kSameFront = 0,
  kSameRear = 1,
  kLeftFront = 2,
  kLeftRear = 3,
  kRightFront = 4,
  kRightRear = 5,
};

inline constexpr std::size_t kNumSlots = 6;
using RiskVector = std::array<double, kNumSlots>;

/// Nearest front/rear vehicle on the ego lane and the two adjacent lanes.
/// Lane index + 1 is the left lane.
struct NeighborSet
{
  std::array<std::optional<VehicleState>, kNumSlots> slots;

  const std::optional<VehicleState> & operator[](Slot s) const
  {
    return slots[static_cast<std::size_t>(s)];
  }
  std::size_t occupied() const
  {
    std::size_t n = 0;
    for (const auto & s : slots) {
      n += s.has_value();
    }
    return n;
  }
};

/// Slot for `other` relative to `ego`, or nothing if it is more than one lane
/// away. A vehicle level with the ego counts as in front.
inline std::optional<Slot> classify_slot(const VehicleState & ego, const VehicleState & other)
{
  const int dl = other.lane - ego.lane;
  const bool front = other.x >= ego.x;
  switch (dl) {
    case 0:
      return front ? Slot::kSameFront : Slot::kSameRear;
    case 1:
      return front ? Slot::kLeftFront : Slot::kLeftRear;
    case -1:
      return front ? Slot::kRightFront : Slot::kRightRear;
    default:
      return std::nullopt;
  }
}

/// Fills each slot with the vehicle at the smallest longitudinal distance;
/// ties go to the lower id. Vehicles sharing the ego's id are ignored.
inline NeighborSet select_neighbors(const VehicleState & ego, std::span<const VehicleState> others)
{
  NeighborSet n;
  for (const auto & o : others) {
    if (o.id == ego.id) {
      continue;
    }
    const auto slot = classify_slot(ego, o);
    if (!slot) {
      continue;
    }
    auto & cur = n.slots[static_cast<std::size_t>(*slot)];
    const double d = std::abs(o.x - ego.x);
    if (!cur) {
      cur = o;
      continue;
    }
    const double dc = std::abs(cur->x - ego.x);
    if (d < dc || (d == dc && o.id < cur->id)) {
      cur = o;
    }
  }
  return n;
}

/// Undirected weighted graph; weights[i][j] is the pair ITTC weight.
struct RiskGraph
{
  std::vector<VehicleState> vertices;
  std::vector<std::vector<double>> weights;

  std::size_t size() const { return vertices.size(); }
};

inline RiskGraph build_risk_graph(std::vector<VehicleState> vertices)
{
  RiskGraph g;
  g.vertices = std::move(vertices);
  const std::size_t n = g.vertices.size();
  g.weights.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = pair_weight(g.vertices[i], g.vertices[j]);
      g.weights[i][j] = w;
      g.weights[j][i] = w;
    }
  }
  return g;
}

/// Graph over the ego (vertex 0) and its occupied neighbor slots in slot order.
inline RiskGraph build_risk_graph(const VehicleState & ego, const NeighborSet & n)
{
  std::vector<VehicleState> v{ego};
  for (const auto & s : n.slots) {
    if (s) {
      v.push_back(*s);
    }
  }
  return build_risk_graph(std::move(v));
}

/// Weighted degree centrality: sum of the vertex's edge weights.
inline double degree_centrality(const RiskGraph & g, std::size_t i)
{
  if (i >= g.size()) {
    throw std::out_of_range(
      "degree_centrality: vertex " + std::to_string(i) + " not in graph of " +
      std::to_string(g.size()));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (j != i) {
      s += g.weights[i][j];
    }
  }
  return s;
}

/// Per-slot weights between the ego and each neighbor; empty slots are 0.
inline RiskVector risk_feature_vector(const VehicleState & ego, const NeighborSet & n)
{
  RiskVector w{};
  for (std::size_t k = 0; k < kNumSlots; ++k) {
    w[k] = n.slots[k] ? pair_weight(ego, *n.slots[k]) : 0.0;
  }
  return w;
}

}  // namespace riskdiff::risk

#endif  // RISKDIFF__RISK__RISK_GRAPH_HPP_
