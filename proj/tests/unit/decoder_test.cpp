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

#include "riskdiff/model/decoder.hpp"
#include "riskdiff/train/losses.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <string>

namespace
{

using namespace riskdiff;
using model::ModePrediction;

TEST(Compose, ConstantStepExample)
{
  ModePrediction m;
  m.displacements.assign(3, {1.0, 0.0, 0.1});
  const auto t = model::compose_trajectory({10.0, 5.0}, 0.0, m);
  ASSERT_EQ(t.positions.size(), 3u);
  EXPECT_DOUBLE_EQ(t.positions[2].x, 13.0);
  EXPECT_DOUBLE_EQ(t.positions[2].y, 5.0);
  EXPECT_NEAR(t.headings[2], 0.3, 1e-12);
  EXPECT_DOUBLE_EQ(t.velocities[0].x, 10.0);
}

TEST(Compose, PositionsArePrefixSums)
{
  auto rng = substream(4, "compose");
  ModePrediction m;
  for (int k = 0; k < 50; ++k) {
    m.displacements.push_back({rng.normal(), rng.normal(), 0.01 * rng.normal()});
  }
  const auto t = model::compose_trajectory({-3.0, 2.0}, 1.0, m);
  double x = -3.0, y = 2.0, h = 1.0;
  for (std::size_t k = 0; k < 50; ++k) {
    x += m.displacements[k][0];
    y += m.displacements[k][1];
    h += m.displacements[k][2];
    EXPECT_EQ(t.positions[k].x, x);
    EXPECT_EQ(t.positions[k].y, y);
    EXPECT_EQ(t.headings[k], h);
  }
}

TEST(Compose, VelocityIsDisplacementOverDt)
{
  ModePrediction m;
  m.displacements = {{2.0, 0.0, 0.0}};
  const auto v = model::velocity_from_displacements(m, 0.1);
  EXPECT_DOUBLE_EQ(v[0].x, 20.0);
  EXPECT_DOUBLE_EQ(v[0].y, 0.0);
  EXPECT_THROW(model::velocity_from_displacements(m, 0.0), std::invalid_argument);
}

TEST(Compose, CsvRows)
{
  ModePrediction m;
  m.displacements = {{1.0, 0.5, 0.0}, {1.0, 0.5, 0.0}};
  std::ostringstream os;
  model::write_prediction_csv_header(os);
  model::write_prediction_csv_rows(os, 7, 2, model::compose_trajectory({0, 0}, 0, m), 0.25);
  EXPECT_EQ(os.str(), "scene_id,mode,step,x,y,theta,confidence\n7,2,1,1,0.5,0,0.25\n7,2,2,2,1,0,0.25\n");
}

model::DecoderConfig small_config()
{
  model::DecoderConfig c;
  c.d_latent = 6;
  c.d_cond = 5;
  c.hidden = 8;
  c.steps = 7;
  return c;
}

TEST(Decoder, Shapes)
{
  ad::ParamSet<double> p;
  auto rng = substream(1, "dec");
  model::TrajectoryDecoder<double> dec(p, small_config(), rng);
  const auto out = dec.decode(ad::gaussian<double>({4, 6}, rng), ad::gaussian<double>({4, 5}, rng));
  EXPECT_EQ(out.displacements.shape(), (ad::Shape{4, 7, 3}));
  EXPECT_EQ(out.logits.shape(), (ad::Shape{4, 1}));
  EXPECT_THROW(dec.decode(ad::gaussian<double>({4, 5}, rng), ad::gaussian<double>({4, 5}, rng)),
               std::invalid_argument);
  EXPECT_THROW(dec.decode(ad::gaussian<double>({4, 6}, rng), ad::gaussian<double>({3, 5}, rng)),
               std::invalid_argument);
}

TEST(Decoder, ZeroWeightsGiveHeadBias)
{
  ad::ParamSet<double> p;
  auto rng = substream(2, "dec");
  model::TrajectoryDecoder<double> dec(p, small_config(), rng);
  p.fill(0.0);
  auto bias = p.get("decoder.head.1.bias");
  bias.mutable_values()[0] = 0.5;
  bias.mutable_values()[2] = -0.25;
  const auto out = dec.decode(ad::gaussian<double>({3, 6}, rng), ad::gaussian<double>({3, 5}, rng));
  const auto d = out.displacements.values();
  for (std::size_t i = 0; i < d.size(); i += 3) {
    EXPECT_EQ(d[i], 0.5);
    EXPECT_EQ(d[i + 1], 0.0);
    EXPECT_EQ(d[i + 2], -0.25);
  }
}

TEST(Decoder, RowsAreIndependent)
{
  ad::ParamSet<double> p;
  auto rng = substream(3, "dec");
  model::TrajectoryDecoder<double> dec(p, small_config(), rng);
  const auto z = ad::gaussian<double>({5, 6}, rng);
  const auto c = ad::gaussian<double>({5, 5}, rng);
  const auto full = dec.decode(z, c);
  const auto one = dec.decode(ad::index_select(z, {3}), ad::index_select(c, {3}));
  const auto fv = full.displacements.values();
  const auto ov = one.displacements.values();
  for (std::size_t j = 0; j < ov.size(); ++j) {
    EXPECT_EQ(fv[3 * 21 + j], ov[j]);
  }
  // identical latents give identical rollouts
  const auto twin = dec.decode(ad::index_select(z, {1, 1}), ad::index_select(c, {1, 1}));
  const auto tv = twin.displacements.values();
  for (std::size_t j = 0; j < 21; ++j) {
    EXPECT_EQ(tv[j], tv[21 + j]);
  }
}

TEST(Decoder, LatentsAreSoftClamped)
{
  ad::ParamSet<double> p;
  auto rng = substream(5, "dec");
  model::TrajectoryDecoder<double> dec(p, small_config(), rng);
  const auto c = ad::gaussian<double>({1, 5}, rng);
  std::vector<double> big(6, 1e6), bigger(6, 1e7);
  const auto a = dec.decode(ad::Tensor<double>({1, 6}, big), c).displacements;
  const auto b = dec.decode(ad::Tensor<double>({1, 6}, bigger), c).displacements;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t j = 0; j < av.size(); ++j) {
    EXPECT_NEAR(av[j], bv[j], 1e-12);
  }
}

TEST(Losses, HuberExamples)
{
  const ad::Tensor<double> gt({2}, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(train::huber_traj_loss(ad::Tensor<double>({2}, {0.5, 0.5}), gt, 1.0).item(),
                   0.125);
  EXPECT_DOUBLE_EQ(train::huber_traj_loss(ad::Tensor<double>({2}, {2.0, -2.0}), gt, 1.0).item(),
                   1.5);
  EXPECT_THROW(train::huber_traj_loss(ad::Tensor<double>({3}, {0, 0, 0}), gt, 1.0),
               std::invalid_argument);
}

TEST(Losses, TotalWeightsConfidence)
{
  const auto t = train::total_loss(ad::Tensor<double>::scalar(1.0), ad::Tensor<double>::scalar(2.0),
                                   ad::Tensor<double>::scalar(3.0), 0.1);
  EXPECT_NEAR(t.item(), 3.3, 1e-12);
  EXPECT_THROW(train::total_loss(ad::Tensor<double>::scalar(NAN), ad::Tensor<double>::scalar(2.0),
                                 ad::Tensor<double>::scalar(3.0), 0.1),
               std::exception);
}

}  // namespace
