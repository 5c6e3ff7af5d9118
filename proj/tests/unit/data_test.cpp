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

#include "riskdiff/data/records.hpp"
#include "riskdiff/data/scene_cache.hpp"
#include "riskdiff/data/synth.hpp"
#include "riskdiff/data/windowing.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <sstream>
#include <string>

namespace
{

using namespace riskdiff;
using data::RawRecord;

std::string three_rows()
{
  return std::string(data::kCsvHeader) +
         "\n1,0.0,0,0,10,0,4.5,1.8,0\n1,0.1,1,0,10,0,4.5,1.8,0\n2,0.0,20,3.5,9,0,4.5,1.8,1\n";
}

std::string error_of(const std::string & csv)
{
  std::istringstream in(csv);
  try {
    data::parse_csv(in, "t.csv");
  } catch (const data::CsvError & e) {
    return e.what();
  }
  return "";
}

TEST(LoadCsv, WellFormed)
{
  std::istringstream in(three_rows());
  const auto r = data::parse_csv(in);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[2].vehicle_id, 2);
  EXPECT_DOUBLE_EQ(r[2].y, 3.5);
  EXPECT_EQ(r[2].lane, 1);
}

TEST(LoadCsv, MissingColumn)
{
  const auto e = error_of("vehicle_id,timestamp,x,y,vx,vy,length,width\n1,0,0,0,0,0,4,2\n");
  EXPECT_NE(e.find("missing column 'lane'"), std::string::npos) << e;
}

TEST(LoadCsv, ReorderedHeaderRejected)
{
  EXPECT_NE(error_of("timestamp,vehicle_id,x,y,vx,vy,length,width,lane\n").find("exactly"),
            std::string::npos);
}

TEST(LoadCsv, DuplicateTimestampNamesRow)
{
  const auto e =
    error_of(std::string(data::kCsvHeader) + "\n1,0.0,0,0,0,0,4,2,0\n1,0.0,1,0,0,0,4,2,0\n");
  EXPECT_NE(e.find("row 3"), std::string::npos) << e;
  EXPECT_NE(e.find("not after"), std::string::npos) << e;
}

TEST(LoadCsv, NonFiniteAndGarbage)
{
  EXPECT_NE(error_of(std::string(data::kCsvHeader) + "\n1,0.0,nan,0,0,0,4,2,0\n").find("row 2"),
            std::string::npos);
  EXPECT_NE(error_of(std::string(data::kCsvHeader) + "\n1,0.0,1x,0,0,0,4,2,0\n").find("row 2"),
            std::string::npos);
  EXPECT_NE(error_of(std::string(data::kCsvHeader) + "\n1,0.0,1\n").find("fields"),
            std::string::npos);
}

TEST(LoadCsv, WriteParseRoundTrip)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 5;
  const auto rec = data::synth_generate(cfg);
  std::ostringstream os;
  data::write_csv(os, rec);
  std::istringstream in(os.str());
  const auto back = data::parse_csv(in);
  ASSERT_EQ(back.size(), rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    EXPECT_EQ(back[i].vehicle_id, rec[i].vehicle_id);
    EXPECT_NEAR(back[i].x, rec[i].x, 5e-5);
    EXPECT_EQ(back[i].lane, rec[i].lane);
  }
}

std::vector<RawRecord> straight_track(std::int64_t id, std::size_t frames, double y = 0.0,
                                      double x0 = 0.0, double v = 10.0, double t0 = 0.0)
{
  std::vector<RawRecord> out;
  for (std::size_t k = 0; k < frames; ++k) {
    RawRecord r;
    r.vehicle_id = id;
    r.timestamp = t0 + 0.1 * static_cast<double>(k);
    r.x = x0 + v * r.timestamp;
    r.y = y;
    r.vx = v;
    r.lane = static_cast<int>(std::lround(y / 3.5));
    out.push_back(r);
  }
  return out;
}

TEST(Window, CountsPerTrackLength)
{
  EXPECT_EQ(data::window_scenes(straight_track(1, 125)).size(), 1u);
  EXPECT_EQ(data::window_scenes(straight_track(1, 150)).size(), 2u);
  EXPECT_EQ(data::window_scenes(straight_track(1, 149)).size(), 1u);
  data::WindowStats st;
  EXPECT_TRUE(data::window_scenes(straight_track(1, 124), 0.1, 25, &st).empty());
  EXPECT_EQ(st.short_segments, 1u);
  EXPECT_EQ(data::window_scenes(straight_track(1, 200), 0.1, 1).size(), 76u);
}

TEST(Window, NeverSpansAGap)
{
  auto rec = straight_track(1, 100);
  const auto tail = straight_track(1, 130, 0.0, 0.0, 10.0, 10.5);  // 5 missing frames
  rec.insert(rec.end(), tail.begin(), tail.end());
  data::WindowStats st;
  const auto s = data::window_scenes(rec, 0.1, 25, &st);
  EXPECT_EQ(st.gaps, 1u);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].history.front().x, 105.0, 1e-9);
}

TEST(Window, SceneLayout)
{
  auto rec = straight_track(7, 125, 0.0, 0.0, 10.0);
  const auto s = data::window_scenes(rec).at(0);
  s.validate();
  EXPECT_EQ(s.vehicle_id, 7);
  EXPECT_NEAR(s.t_anchor, 7.4, 1e-9);
  EXPECT_NEAR(s.anchor().x, 74.0, 1e-9);
  EXPECT_NEAR(s.future.front().x, 75.0, 1e-9);
  EXPECT_NEAR(s.future.back().x, 124.0, 1e-9);
  EXPECT_EQ(s.delta_history.front().x, 0.0);
  EXPECT_NEAR(s.delta_history[1].x, 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.speeds[10], 10.0);
}

TEST(Window, RiskMatchesRecomputationAtAnchor)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 60;
  cfg.fraction_emergency = 0.5;
  cfg.seed = 3;
  const auto rec = data::synth_generate(cfg);
  const auto scenes = data::window_scenes(rec);
  ASSERT_EQ(scenes.size(), 60u);
  std::size_t nonzero = 0;
  for (const auto & s : scenes) {
    const RawRecord * ego = nullptr;
    std::vector<risk::VehicleState> others;
    for (const auto & r : rec) {
      if (std::abs(r.timestamp - s.t_anchor) > 1e-9) {
        continue;
      }
      if (r.vehicle_id == s.vehicle_id) {
        ego = &r;
      } else {
        others.push_back(data::to_state(r));
      }
    }
    ASSERT_NE(ego, nullptr);
    const auto n = risk::select_neighbors(data::to_state(*ego), others);
    const auto w = risk::risk_feature_vector(data::to_state(*ego), n);
    for (std::size_t k = 0; k < risk::kNumSlots; ++k) {
      EXPECT_EQ(w[k], s.risk[k]);
      nonzero += w[k] > 0.0;
    }
  }
  EXPECT_GT(nonzero, 0u);
}

TEST(Flow, CountingExample)
{
  std::vector<RawRecord> rec;
  for (int i = 0; i < 5; ++i) {
    RawRecord r;
    r.vehicle_id = i;
    r.x = 10.0 * i;
    r.vx = 2.0;
    rec.push_back(r);
  }
  const auto f = data::traffic_flow_features(rec, {20.0, 100.0}, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(f.density, 50.0);
  EXPECT_DOUBLE_EQ(f.mean_speed, 7.2);
  EXPECT_DOUBLE_EQ(f.flow_rate, 360.0);
}

TEST(Flow, RateIsDensityTimesSpeed)
{
  // the published means: 51.83 veh/km at 4.38 km/h gives about 227 veh/h
  data::TrafficFlowFeatures f = data::detail::flow_from_counts(5183, 100, 5183 * 4.38 / 3.6, 1000.0);
  EXPECT_NEAR(f.density, 51.83, 1e-9);
  EXPECT_NEAR(f.mean_speed, 4.38, 1e-9);
  EXPECT_NEAR(f.flow_rate, 227.0, 0.1);
}

TEST(Flow, EmptySectionIsZero)
{
  const auto f = data::traffic_flow_features({}, {0.0, 500.0}, {0.0, 1.0});
  EXPECT_EQ(f.density, 0.0);
  EXPECT_EQ(f.flow_rate, 0.0);
  EXPECT_EQ(f.mean_speed, 0.0);
  EXPECT_THROW(data::traffic_flow_features({}, {0.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
}

TEST(Flow, WindowAveragesFrames)
{
  // 2 vehicles in frame 0, 4 in frame 1: mean 3 per frame on 0.1 km
  std::vector<RawRecord> rec;
  for (int i = 0; i < 6; ++i) {
    RawRecord r;
    r.vehicle_id = i;
    r.timestamp = i < 2 ? 0.0 : 0.1;
    rec.push_back(r);
  }
  EXPECT_DOUBLE_EQ(data::traffic_flow_features(rec, {0.0, 100.0}, {0.0, 0.1}).density, 30.0);
}

TEST(Synth, SameSeedSameCorpus)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 50;
  cfg.seed = 9;
  std::ostringstream a, b;
  data::write_csv(a, data::synth_generate(cfg));
  data::write_csv(b, data::synth_generate(cfg));
  EXPECT_EQ(a.str(), b.str());
  cfg.seed = 10;
  std::ostringstream c;
  data::write_csv(c, data::synth_generate(cfg));
  EXPECT_NE(a.str(), c.str());
}

TEST(Synth, ExactSceneCount)
{
  for (std::size_t n : {1u, 23u, 24u, 25u, 100u}) {
    data::SynthConfig cfg;
    cfg.n_scenes = n;
    EXPECT_EQ(data::window_scenes(data::synth_generate(cfg)).size(), n);
  }
}

TEST(Synth, RejectsBadConfig)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 0;
  EXPECT_THROW(data::synth_generate(cfg), std::invalid_argument);
  cfg.n_scenes = 5;
  cfg.fraction_emergency = 1.5;
  EXPECT_THROW(data::synth_generate(cfg), std::invalid_argument);
}

std::map<std::int64_t, std::vector<RawRecord>> by_vehicle(const std::vector<RawRecord> & rec)
{
  std::map<std::int64_t, std::vector<RawRecord>> out;
  for (const auto & r : rec) {
    out[r.vehicle_id].push_back(r);
  }
  return out;
}

TEST(Synth, CalmTrafficStaysComfortable)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 500;
  cfg.fraction_emergency = 0.0;
  cfg.seed = 4;
  for (const auto & [id, t] : by_vehicle(data::synth_generate(cfg))) {
    for (std::size_t k = 1; k < t.size(); ++k) {
      const double a = (t[k].vx - t[k - 1].vx) / cfg.dt;
      ASSERT_LE(std::abs(a), 3.0 + 1e-9) << "vehicle " << id << " frame " << k;
      ASSERT_EQ(t[k].vy, 0.0);
    }
  }
}

TEST(Synth, CongestionNearTargets)
{
  data::SynthConfig cfg;
  cfg.fraction_emergency = 0.0;
  cfg.seed = 5;
  const auto scenes = data::window_scenes(data::synth_generate(cfg));
  double d = 0.0, v = 0.0;
  for (const auto & s : scenes) {
    d += s.flow.density;
    v += s.flow.mean_speed;
  }
  d /= static_cast<double>(scenes.size());
  v /= static_cast<double>(scenes.size());
  EXPECT_NEAR(d, 50.0, 10.0);
  EXPECT_NEAR(v, 4.4, 2.0);
}

TEST(Synth, EmergenciesCauseHardBrakingAndLaneChanges)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 500;
  cfg.fraction_emergency = 1.0;
  cfg.seed = 6;
  std::size_t hard = 0, lane_changes = 0;
  for (const auto & [id, t] : by_vehicle(data::synth_generate(cfg))) {
    bool braked = false;
    for (std::size_t k = 1; k < t.size(); ++k) {
      braked = braked || (t[k].vx - t[k - 1].vx) / cfg.dt < -5.0;
    }
    hard += braked;
    lane_changes += t.front().lane != t.back().lane;
  }
  EXPECT_GT(hard, 20u);
  EXPECT_GT(lane_changes, 10u);
}

TEST(Synth, NoOverlapAndBoundedRisk)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 480;
  cfg.fraction_emergency = 0.5;
  cfg.seed = 8;
  const auto rec = data::synth_generate(cfg);
  std::map<long long, std::vector<const RawRecord *>> frames;
  for (const auto & r : rec) {
    frames[std::llround(r.timestamp * 10.0)].push_back(&r);
  }
  for (const auto & [f, v] : frames) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = i + 1; j < v.size(); ++j) {
        const bool overlap = std::abs(v[i]->x - v[j]->x) < 0.5 * (v[i]->length + v[j]->length) &&
                             std::abs(v[i]->y - v[j]->y) < 0.5 * (v[i]->width + v[j]->width);
        ASSERT_FALSE(overlap) << "vehicles " << v[i]->vehicle_id << " and " << v[j]->vehicle_id;
        const double w = risk::pair_weight(data::to_state(*v[i]), data::to_state(*v[j]));
        ASSERT_TRUE(std::isfinite(w));
        ASSERT_LE(w, risk::kIttcCap);
      }
    }
  }
}

TEST(SceneCache, RoundTrip)
{
  data::SynthConfig cfg;
  cfg.n_scenes = 30;
  cfg.seed = 2;
  const auto scenes = data::window_scenes(data::synth_generate(cfg));
  const auto dir = std::filesystem::temp_directory_path() / "riskdiff_cache_test";
  std::filesystem::create_directories(dir);
  data::save_scene_cache(dir / "scenes", scenes, {{"seed", 2}});
  const auto back = data::load_scene_cache(dir / "scenes");
  EXPECT_EQ(back.metadata.at("seed"), 2);
  ASSERT_EQ(back.scenes.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto & a = scenes[i];
    const auto & b = back.scenes[i];
    EXPECT_EQ(a.scene_id, b.scene_id);
    EXPECT_EQ(a.vehicle_id, b.vehicle_id);
    EXPECT_NEAR(a.history[40].x, b.history[40].x, 1e-3);
    EXPECT_NEAR(a.future[49].y, b.future[49].y, 1e-4);
    EXPECT_EQ(a.neighbors.occupied(), b.neighbors.occupied());
    for (std::size_t k = 0; k < risk::kNumSlots; ++k) {
      EXPECT_NEAR(a.risk[k], b.risk[k], 1e-5 * (1.0 + a.risk[k]));
      if (a.neighbors.slots[k]) {
        EXPECT_EQ(a.neighbors.slots[k]->id, b.neighbors.slots[k]->id);
        EXPECT_EQ(a.neighbors.slots[k]->lane, b.neighbors.slots[k]->lane);
      }
    }
    EXPECT_NEAR(a.flow.density, b.flow.density, 1e-4);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
