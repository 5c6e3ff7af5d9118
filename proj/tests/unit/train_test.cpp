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

#include "riskdiff/train/baseline.hpp"
#include "riskdiff/train/evaluate.hpp"
#include "riskdiff/train/metrics.hpp"
#include "riskdiff/train/trainer.hpp"
#include "support/scene_factory.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

namespace
{

using namespace riskdiff;
using train::Trajectory;

Trajectory line(double x0, double dx, double y = 0.0, std::size_t n = 50)
{
  Trajectory t;
  for (std::size_t k = 0; k < n; ++k) {
    t.push_back({x0 + dx * static_cast<double>(k + 1), y});
  }
  return t;
}

TEST(MinAde, ExactModeIsZero)
{
  const auto gt = line(0, 1);
  const std::vector<Trajectory> modes{line(0, 1, 2.0), gt};
  EXPECT_EQ(train::min_ade(modes, gt), 0.0);
  EXPECT_EQ(train::min_fde(modes, gt), 0.0);
}

TEST(MinAde, MinimumOverModes)
{
  const auto gt = line(0, 1);
  const std::vector<Trajectory> modes{line(0, 1, 3.0), line(0, 1, 1.0)};
  EXPECT_DOUBLE_EQ(train::min_ade(modes, gt), 1.0);
  EXPECT_DOUBLE_EQ(train::min_fde(modes, gt), 1.0);
  EXPECT_THROW(train::min_ade(std::vector<Trajectory>{}, gt), std::invalid_argument);
  EXPECT_THROW(train::min_fde(std::vector<Trajectory>{line(0, 1, 0, 49)}, gt),
               std::invalid_argument);
}

TEST(MinAde, MatchesBruteForce)
{
  auto rng = substream(3, "metrics");
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory gt;
    std::vector<Trajectory> modes(7);
    for (std::size_t k = 0; k < 50; ++k) {
      gt.push_back({rng.normal(), rng.normal()});
      for (auto & m : modes) {
        m.push_back({rng.normal(), rng.normal()});
      }
    }
    double best_ade = 1e300, best_fde = 1e300;
    for (const auto & m : modes) {
      long double s = 0;
      for (std::size_t k = 0; k < 50; ++k) {
        const long double dx = m[k].x - gt[k].x;
        const long double dy = m[k].y - gt[k].y;
        s += std::sqrt(dx * dx + dy * dy);
      }
      best_ade = std::min(best_ade, static_cast<double>(s / 50));
      const double dx = m[49].x - gt[49].x;
      const double dy = m[49].y - gt[49].y;
      best_fde = std::min(best_fde, std::sqrt(dx * dx + dy * dy));
    }
    EXPECT_NEAR(train::min_ade(modes, gt), best_ade, 1e-12);
    EXPECT_NEAR(train::min_fde(modes, gt), best_fde, 1e-12);
  }
}

TEST(Grading, TopTenOfTen)
{
  std::vector<double> f(10);
  std::iota(f.begin(), f.end(), 1.0);
  const auto g = train::grade_long_tail(f);
  EXPECT_EQ(g.top(0), (std::vector<std::size_t>{9}));
  EXPECT_EQ(g.top(4).size(), 5u);
  EXPECT_EQ(g.rest().size(), 5u);
  EXPECT_THROW(train::grade_long_tail(std::vector<double>{}), std::invalid_argument);
}

TEST(Grading, NestedForRandomInput)
{
  auto rng = substream(5, "grading");
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> f(static_cast<std::size_t>(rng.uniform_int(1, 500)));
    for (auto & v : f) {
      v = std::floor(rng.uniform(0, 20));  // many ties
    }
    const auto g = train::grade_long_tail(f);
    for (std::size_t k = 0; k + 1 < train::kTopPercents.size(); ++k) {
      const auto a = g.top(k);
      const auto b = g.top(k + 1);
      const std::set<std::size_t> sb(b.begin(), b.end());
      for (std::size_t i : a) {
        EXPECT_TRUE(sb.count(i));
      }
    }
    // every Top 50% sample is at least as hard as every Rest sample
    double lo = 1e300, hi = -1e300;
    for (std::size_t i : g.top(4)) {
      lo = std::min(lo, f[i]);
    }
    for (std::size_t i : g.rest()) {
      hi = std::max(hi, f[i]);
    }
    if (!g.rest().empty() && !g.top(4).empty()) {
      EXPECT_GE(lo, hi);
    }
    EXPECT_EQ(g.top(4).size() + g.rest().size(), f.size());
  }
}

TEST(Grading, HistogramOverDocumentedRange)
{
  const auto e = train::histogram_edges(0.0002, 41.3775);
  ASSERT_EQ(e.size(), 101u);
  EXPECT_EQ(e.front(), 0.0002);
  EXPECT_EQ(e.back(), 41.3775);
  const double w = (41.3775 - 0.0002) / 100.0;
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_NEAR(e[i + 1] - e[i], w, 1e-12);
  }
  const std::vector<double> v{0.0002, 41.3775, 20.0, 0.5};
  const auto h = train::histogram(v);
  EXPECT_EQ(h.counts.size(), 100u);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), 4u);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[1], 1u);
  EXPECT_EQ(h.counts[48], 1u);
  EXPECT_EQ(h.counts[99], 1u);
}

TEST(Report, AllRowIsWeightedMeanOfPartition)
{
  auto rng = substream(6, "report");
  std::vector<double> base(263), a(263), f(263);
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = rng.uniform(0, 10);
    a[i] = rng.uniform(0, 3);
    f[i] = rng.uniform(0, 6);
  }
  const auto r = train::grade_report(a, f, train::grade_long_tail(base));
  ASSERT_EQ(r.rows.size(), 7u);
  const auto & top = r.row("Top 50%");
  const auto & rest = r.row("Rest");
  const auto & all = r.row("All");
  EXPECT_EQ(top.count + rest.count, 263u);
  EXPECT_NEAR(all.min_ade, (top.count * top.min_ade + rest.count * rest.min_ade) / 263.0, 1e-9);
  EXPECT_NEAR(all.min_fde, (top.count * top.min_fde + rest.count * rest.min_fde) / 263.0, 1e-9);
  std::ostringstream os;
  r.write_csv(os);
  const std::string csv = os.str();
  EXPECT_EQ(csv.rfind("grade,minADE,minFDE\nTop 10%,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Split, TenThousandSamples)
{
  auto rng = substream(1, "split-test");
  std::vector<double> f(10000);
  for (auto & v : f) {
    v = rng.uniform(0, 10);
  }
  const auto s = train::split_dataset(f, 42);
  EXPECT_EQ(s.train.size() + s.test.size(), 10000u);
  EXPECT_NEAR(s.train.size() / 10000.0, 0.74, 0.005);
  std::size_t tail_train = 0, tail_test = 0;
  for (std::size_t i : s.train) {
    tail_train += s.long_tail[i];
  }
  for (std::size_t i : s.test) {
    tail_test += s.long_tail[i];
  }
  EXPECT_NEAR(tail_train / 10000.0, 0.10, 0.005);
  EXPECT_NEAR(tail_test / 10000.0, 0.10, 0.005);
  std::vector<std::size_t> all(s.train);
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) {
    ASSERT_EQ(all[i], i);
  }
}

TEST(Split, ThousandDeterministic)
{
  std::vector<double> f(1000);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = static_cast<double>((i * 7919) % 1000);
  }
  const auto a = train::split_dataset(f, 3);
  const auto b = train::split_dataset(f, 3);
  EXPECT_EQ(a.train.size(), 740u);
  EXPECT_EQ(a.test.size(), 260u);
  EXPECT_EQ(a.train, b.train);
  EXPECT_NE(a.train, train::split_dataset(f, 4).train);
  EXPECT_THROW(train::split_dataset(std::vector<double>(99, 1.0), 1), std::invalid_argument);
}

TEST(Baseline, LearnsConstantVelocity)
{
  std::vector<data::Scene> scenes;
  auto rng = substream(2, "cv");
  for (int i = 0; i < 256; ++i) {
    scenes.push_back(riskdiff::testing::arc_scene(i, rng.uniform(2.0, 12.0), 0.0, 0.0));
  }
  const auto scales = model::fit_feature_scales(scenes);
  train::BaselineConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 32;
  cfg.seed = 1;
  train::BaselinePredictor b(scales, cfg);
  EXPECT_THROW(b.predict(scenes), std::logic_error);
  b.fit(scenes);
  std::vector<data::Scene> held_out;
  for (int i = 0; i < 16; ++i) {
    held_out.push_back(riskdiff::testing::arc_scene(1000 + i, 3.0 + 0.5 * i, 0.0, 0.0));
  }
  const auto f = b.fde(held_out);
  EXPECT_LT(*std::max_element(f.begin(), f.end()), 1.0);
  const auto p = b.predict(std::span(scenes).subspan(0, 3));
  EXPECT_EQ(p[0].size(), 50u);
  EXPECT_EQ(b.predict(std::span(scenes).subspan(0, 3)), p);
}

model::ModelConfig tiny()
{
  model::ModelConfig c;
  c.d_model = 16;
  c.d_latent = 8;
  c.heads = 2;
  c.blocks = 1;
  c.d_ff = 32;
  c.gru_hidden = 16;
  c.modes = 3;
  c.diffusion_steps = 10;
  c.decode_max_step = 5;
  return c;
}

TEST(Trainer, LossDecreasesAndResumeMatches)
{
  const auto scenes = riskdiff::testing::random_scenes(21, 40);
  const auto scales = model::fit_feature_scales(scenes);
  train::TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 6;
  tc.lr = 3e-3;
  tc.seed = 5;
  const auto dir = std::filesystem::temp_directory_path() / "riskdiff_trainer_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  train::Model full(tiny(), scales, tc.seed);
  const auto log = train::train_model(full, scenes, tc);
  ASSERT_EQ(log.size(), 6u);
  EXPECT_LT(log.back().l_total, log.front().l_total);

  train::Model part(tiny(), scales, tc.seed);
  train::TrainOptions opt;
  opt.checkpoint = dir / "ckpt";
  opt.stop_after = 3;
  train::train_model(part, scenes, tc, opt);
  train::Model resumed(tiny(), scales, tc.seed);
  opt.stop_after = 0;
  opt.resume = true;
  const auto log2 = train::train_model(resumed, scenes, tc, opt);
  ASSERT_EQ(log2.size(), 6u);
  for (std::size_t e = 0; e < 6; ++e) {
    EXPECT_NEAR(log2[e].l_total, log[e].l_total, 1e-6 * log[e].l_total) << "epoch " << e + 1;
  }
  // checkpoint reloads into an identical predictor
  const auto loaded = train::load_checkpoint(dir / "ckpt");
  EXPECT_EQ(loaded.log.size(), 6u);
  const auto a = full.predict(std::span(scenes).subspan(0, 4), 3, 1);
  const auto b = loaded.model.predict(std::span(scenes).subspan(0, 4), 3, 1);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(a[i].modes[1].displacements, b[i].modes[1].displacements);
  }
  // a different config cannot resume from this checkpoint
  auto other = tiny();
  other.modes = 2;
  train::Model wrong(other, scales, tc.seed);
  EXPECT_THROW(train::train_model(wrong, scenes, tc, opt), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST(Evaluate, MoreModesNeverWorse)
{
  const auto scenes = riskdiff::testing::random_scenes(22, 30);
  const auto scales = model::fit_feature_scales(scenes);
  train::Model m(tiny(), scales, 2);
  std::vector<double> base(scenes.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = static_cast<double>(i % 7);
  }
  const auto k3 = train::evaluate(m, scenes, base, 3, 11);
  const auto k1 = train::evaluate(m, scenes, base, 1, 11);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    EXPECT_LE(k3.fde[i], k1.fde[i]);
    EXPECT_LE(k3.ade[i], k1.ade[i]);
  }
  for (std::size_t r = 0; r < 7; ++r) {
    EXPECT_LE(k3.report.rows[r].min_fde, k1.report.rows[r].min_fde);
  }
  EXPECT_NE(k3.report.fingerprint, k1.report.fingerprint);
}

TEST(Ablation, FingerprintAndValidation)
{
  const auto scenes = riskdiff::testing::random_scenes(23, 24);
  const auto scales = model::fit_feature_scales(scenes);
  train::TrainConfig tc;
  tc.batch_size = 12;
  tc.epochs = 1;
  std::vector<double> base(12);
  std::iota(base.begin(), base.end(), 0.0);
  const std::span<const data::Scene> tr(scenes.data(), 12);
  const std::span<const data::Scene> te(scenes.data() + 12, 12);
  train::AblationCell on;
  on.modes = 3;
  auto off = on;
  off.dit = false;
  const auto a = train::run_ablation(on, tiny(), scales, tc, tr, te, base);
  const auto b = train::run_ablation(off, tiny(), scales, tc, tr, te, base);
  EXPECT_EQ(a.report.rows.size(), 7u);
  EXPECT_NE(a.report.fingerprint, b.report.fingerprint);
  auto bad = on;
  bad.multimodal = false;
  EXPECT_THROW(train::run_ablation(bad, tiny(), scales, tc, tr, te, base), std::invalid_argument);
  bad.modes = 1;
  EXPECT_NO_THROW(train::run_ablation(bad, tiny(), scales, tc, tr, te, base));
}

TEST(Losses, GradientsReachEncoderAndDenoiser)
{
  const auto scenes = riskdiff::testing::random_scenes(24, 4);
  const auto scales = model::fit_feature_scales(scenes);
  train::Model m(tiny(), scales, 1);
  ad::Tape<float> tape;
  ad::TapeScope<float> scope(tape);
  auto rng = substream(1, "g");
  const auto l = m.losses(model::make_batch<float>(scenes, scales), rng, true);
  m.params().zero_grad();
  tape.backward(l.total);
  double enc = 0.0, dit = 0.0;
  for (const auto & [name, t] : m.params().entries()) {
    double g = 0.0;
    for (float v : t.grad()) {
      g += std::abs(v);
    }
    if (name.rfind("encoder.", 0) == 0) {
      enc += g;
    } else if (name.rfind("dit.", 0) == 0) {
      dit += g;
    }
  }
  EXPECT_GT(enc, 0.0);
  EXPECT_GT(dit, 0.0);
}

}  // namespace
