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

#include "riskdiff/risk/ittc.hpp"
#include "riskdiff/risk/risk_graph.hpp"
#include "riskdiff/util/rng.hpp"
#include "support/ttc_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace
{

using riskdiff::risk::VehicleState;
using riskdiff::risk::Slot;
namespace risk = riskdiff::risk;

VehicleState car(std::int64_t id, double x, double y, double vx, double vy, int lane = 0)
{
  VehicleState v;
  v.id = id;
  v.x = x;
  v.y = y;
  v.vx = vx;
  v.vy = vy;
  v.lane = lane;
  return v;
}

TEST(Ittc, LongitudinalHandCalculation)
{
  auto rear = car(1, 100.0, 0.0, 30.0, 0.0);
  auto front = car(2, 130.0, 0.0, 25.0, 0.0);
  rear.length = 4.0;
  front.length = 4.0;
  EXPECT_NEAR(risk::longitudinal_ittc(rear, front), 5.0 / 26.0, 1e-12);
  EXPECT_NEAR(risk::longitudinal_ittc(rear, front), 0.1923, 5e-5);
  EXPECT_DOUBLE_EQ(risk::longitudinal_ittc(front, rear), 5.0 / 26.0);
}

TEST(Ittc, LongitudinalDivergingAndEqualSpeed)
{
  auto rear = car(1, 100.0, 0.0, 20.0, 0.0);
  auto front = car(2, 130.0, 0.0, 25.0, 0.0);
  EXPECT_EQ(risk::longitudinal_ittc(rear, front), 0.0);
  front.vx = 20.0;
  EXPECT_EQ(risk::longitudinal_ittc(rear, front), 0.0);
}

TEST(Ittc, LateralHandCalculation)
{
  // widths 2 + 2 -> half-sum 2; centre distance 5 -> gap 3
  auto a = car(1, 0.0, 0.0, 0.0, 0.5);
  auto b = car(2, 0.0, 5.0, 0.0, -0.5);
  a.width = 2.0;
  b.width = 2.0;
  EXPECT_NEAR(risk::lateral_ittc(a, b), 1.0 / 3.0, 1e-12);
  b.vy = 1.0;
  EXPECT_EQ(risk::lateral_ittc(a, b), 0.0);
}

TEST(Ittc, SameYZeroVyIsZero)
{
  auto a = car(1, 0.0, 0.0, 10.0, 0.0);
  auto b = car(2, 30.0, 0.0, 10.0, 0.0);
  EXPECT_EQ(risk::lateral_ittc(a, b), 0.0);
}

TEST(Ittc, OverlapClampsToCap)
{
  auto rear = car(1, 100.0, 0.0, 30.0, 0.0);
  auto front = car(2, 103.0, 0.0, 25.0, 0.0);
  EXPECT_EQ(risk::longitudinal_ittc(rear, front), risk::kIttcCap);
  EXPECT_EQ(risk::pair_weight(rear, front), risk::kIttcCap);
  front.vx = 35.0;
  EXPECT_EQ(risk::pair_weight(rear, front), 0.0);
}

TEST(Ittc, NearContactSaturates)
{
  auto rear = car(1, 100.0, 0.0, 30.0, 0.0);
  auto front = car(2, 104.6, 0.0, 10.0, 0.0);
  EXPECT_EQ(risk::longitudinal_ittc(rear, front), risk::kIttcCap);
}

TEST(PairWeight, MaxOfAxes)
{
  auto rear = car(1, 100.0, 0.0, 30.0, 0.0);
  auto front = car(2, 130.0, 0.0, 25.0, 0.0);
  rear.length = front.length = 4.0;
  EXPECT_NEAR(risk::pair_weight(rear, front), 0.1923, 5e-5);

  // diagonal: lateral 1/3, longitudinal 5/26 -> lateral wins
  auto a = car(1, 0.0, 0.0, 30.0, 0.5);
  auto b = car(2, 30.0, 5.0, 25.0, -0.5);
  a.length = b.length = 4.0;
  a.width = b.width = 2.0;
  EXPECT_NEAR(risk::pair_weight(a, b), 1.0 / 3.0, 1e-12);
}

TEST(PairWeight, SelfPairIsZero)
{
  auto a = car(7, 12.0, 3.0, 22.0, 0.3);
  EXPECT_EQ(risk::pair_weight(a, a), 0.0);
}

TEST(PairWeight, SymmetricOnRandomPairs)
{
  auto rng = riskdiff::substream(11, "risk.symmetry", {});
  for (int i = 0; i < 1000; ++i) {
    auto [a, b] = riskdiff::testing::random_pair(rng);
    const double ab = risk::pair_weight(a, b);
    const double ba = risk::pair_weight(b, a);
    EXPECT_EQ(ab, ba) << "pair " << i;
    EXPECT_GE(ab, 0.0);
  }
}

TEST(PairWeight, MatchesBruteForceCollisionTime)
{
  auto rng = riskdiff::substream(12, "risk.oracle", {});
  int approaching = 0;
  int diverging = 0;
  for (int i = 0; i < 200; ++i) {
    auto [a, b] = riskdiff::testing::random_pair(rng);
    const auto hit = riskdiff::testing::brute_force_contact(a, b);
    const double w = risk::pair_weight(a, b);
    if (hit.contact) {
      ++approaching;
      const double expect = std::min(1.0 / hit.time, risk::kIttcCap);
      EXPECT_NEAR(w, expect, 1e-6 * expect) << "pair " << i;
    } else if (risk::longitudinal_ittc(a, b) == 0.0 && risk::lateral_ittc(a, b) == 0.0) {
      ++diverging;
      EXPECT_EQ(w, 0.0);
    }
  }
  EXPECT_GT(approaching, 50);
  EXPECT_GT(diverging, 10);
}

TEST(PairWeight, RejectsInvalidState)
{
  auto a = car(1, 0.0, 0.0, 1.0, 0.0);
  a.length = 0.0;
  EXPECT_THROW(a.validate(), std::invalid_argument);
  a.length = 4.0;
  a.vx = std::nan("");
  EXPECT_THROW(a.validate(), std::invalid_argument);
}

TEST(Neighbors, EgoAlone)
{
  const auto ego = car(1, 0.0, 0.0, 10.0, 0.0, 1);
  const auto n = risk::select_neighbors(ego, {});
  EXPECT_EQ(n.occupied(), 0u);
}

TEST(Neighbors, NearerWins)
{
  const auto ego = car(1, 0.0, 0.0, 10.0, 0.0, 1);
  std::vector<VehicleState> others{car(2, 20.0, 0.0, 10.0, 0.0, 1), car(3, 10.0, 0.0, 10.0, 0.0, 1)};
  const auto n = risk::select_neighbors(ego, others);
  ASSERT_TRUE(n[Slot::kSameFront].has_value());
  EXPECT_EQ(n[Slot::kSameFront]->id, 3);
  EXPECT_EQ(n.occupied(), 1u);
}

TEST(Neighbors, TieBreaksOnLowerId)
{
  const auto ego = car(1, 0.0, 0.0, 10.0, 0.0, 1);
  std::vector<VehicleState> others{car(9, 15.0, 0.0, 0.0, 0.0, 2), car(4, 15.0, 0.0, 0.0, 0.0, 2)};
  const auto n = risk::select_neighbors(ego, others);
  EXPECT_EQ(n[Slot::kLeftFront]->id, 4);
}

TEST(Neighbors, MatchesExhaustiveSearch)
{
  auto rng = riskdiff::substream(13, "risk.neighbors", {});
  for (int trial = 0; trial < 200; ++trial) {
    const auto ego = car(0, rng.uniform(0.0, 100.0), 0.0, 10.0, 0.0, 2);
    std::vector<VehicleState> others;
    for (int k = 1; k <= 10; ++k) {
      // coarse grid so that distance ties occur
      others.push_back(car(k, std::round(rng.uniform(0.0, 100.0) / 5.0) * 5.0, 0.0, 10.0, 0.0,
                           static_cast<int>(rng.uniform_int(1, 3))));
    }
    const auto n = risk::select_neighbors(ego, others);

    for (std::size_t s = 0; s < risk::kNumSlots; ++s) {
      const int dl = s < 2 ? 0 : (s < 4 ? 1 : -1);
      const bool front = s % 2 == 0;
      const VehicleState * best = nullptr;
      for (const auto & o : others) {
        if (o.lane - ego.lane != dl || (o.x >= ego.x) != front) {
          continue;
        }
        const double d = std::abs(o.x - ego.x);
        if (best == nullptr) {
          best = &o;
          continue;
        }
        const double db = std::abs(best->x - ego.x);
        if (d < db || (d == db && o.id < best->id)) {
          best = &o;
        }
      }
      if (best == nullptr) {
        EXPECT_FALSE(n.slots[s].has_value()) << "trial " << trial << " slot " << s;
      } else {
        ASSERT_TRUE(n.slots[s].has_value()) << "trial " << trial << " slot " << s;
        EXPECT_EQ(n.slots[s]->id, best->id) << "trial " << trial << " slot " << s;
      }
    }
    // a vehicle appears at most once
    for (std::size_t s = 0; s < risk::kNumSlots; ++s) {
      for (std::size_t r = s + 1; r < risk::kNumSlots; ++r) {
        if (n.slots[s] && n.slots[r]) {
          EXPECT_NE(n.slots[s]->id, n.slots[r]->id);
        }
      }
    }
  }
}

TEST(Centrality, DirectSummation)
{
  risk::RiskGraph g;
  g.vertices.resize(7);
  g.weights.assign(7, std::vector<double>(7, 0.0));
  const double w[6] = {0.19, 0.05, 0.0, 0.0, 0.10, 0.0};
  for (int j = 0; j < 6; ++j) {
    g.weights[0][j + 1] = g.weights[j + 1][0] = w[j];
  }
  EXPECT_NEAR(risk::degree_centrality(g, 0), 0.34, 1e-12);
}

TEST(Centrality, EgoOnlyAndUniform)
{
  const auto ego = car(1, 0.0, 0.0, 10.0, 0.0, 1);
  const auto g = risk::build_risk_graph(ego, risk::NeighborSet{});
  EXPECT_EQ(g.size(), 1u);
  EXPECT_EQ(risk::degree_centrality(g, 0), 0.0);

  risk::RiskGraph u;
  u.vertices.resize(7);
  u.weights.assign(7, std::vector<double>(7, 0.0));
  for (int j = 1; j <= 6; ++j) {
    u.weights[0][j] = u.weights[j][0] = 0.25;
  }
  EXPECT_DOUBLE_EQ(risk::degree_centrality(u, 0), 6 * 0.25);
  EXPECT_THROW(risk::degree_centrality(u, 7), std::out_of_range);
}

TEST(Graph, InvariantsAndRowSums)
{
  auto rng = riskdiff::substream(14, "risk.graph", {});
  std::vector<VehicleState> cars;
  for (int k = 0; k < 12; ++k) {
    const int lane = static_cast<int>(rng.uniform_int(0, 2));
    cars.push_back(car(k, rng.uniform(0.0, 200.0), 3.5 * lane + rng.uniform(-0.5, 0.5),
                       rng.uniform(0.0, 30.0), rng.uniform(-1.0, 1.0), lane));
  }
  const auto g = risk::build_risk_graph(cars);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(g.weights[i][i], 0.0);
    double row = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      EXPECT_EQ(g.weights[i][j], g.weights[j][i]);
      EXPECT_GE(g.weights[i][j], 0.0);
      row += g.weights[i][j];
    }
    EXPECT_EQ(risk::degree_centrality(g, i), row);
  }
}

TEST(RiskVector, EmptyAndSingleSlot)
{
  const auto ego = car(1, 100.0, 0.0, 30.0, 0.0, 1);
  const auto empty = risk::risk_feature_vector(ego, risk::NeighborSet{});
  for (double v : empty) {
    EXPECT_EQ(v, 0.0);
  }

  auto e = ego;
  e.length = 4.0;
  auto front = car(2, 130.0, 0.0, 25.0, 0.0, 1);
  front.length = 4.0;
  std::vector<VehicleState> others{front};
  const auto w = risk::risk_feature_vector(e, risk::select_neighbors(e, others));
  EXPECT_NEAR(w[0], 0.1923, 5e-5);
  for (std::size_t k = 1; k < risk::kNumSlots; ++k) {
    EXPECT_EQ(w[k], 0.0);
  }
}

TEST(RiskVector, FullSetMatchesPerSlotRecomputation)
{
  const auto ego = car(0, 50.0, 3.5, 12.0, 0.0, 1);
  std::vector<VehicleState> others{
    car(1, 70.0, 3.4, 8.0, 0.0, 1),  car(2, 35.0, 3.6, 15.0, 0.0, 1),
    car(3, 60.0, 7.0, 10.0, -0.4, 2), car(4, 44.0, 7.1, 14.0, 0.0, 2),
    car(5, 56.0, 0.1, 12.0, 0.6, 0),  car(6, 30.0, 0.0, 13.0, 0.0, 0)};
  const auto n = risk::select_neighbors(ego, others);
  ASSERT_EQ(n.occupied(), 6u);
  const auto w = risk::risk_feature_vector(ego, n);
  for (std::size_t k = 0; k < risk::kNumSlots; ++k) {
    EXPECT_EQ(w[k], risk::pair_weight(ego, others[k])) << "slot " << k;
  }
  const auto g = risk::build_risk_graph(ego, n);
  double sum = 0.0;
  for (double v : w) {
    sum += v;
  }
  EXPECT_DOUBLE_EQ(risk::degree_centrality(g, 0), sum);
}

}  // namespace
