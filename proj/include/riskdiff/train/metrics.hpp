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

#ifndef RISKDIFF__TRAIN__METRICS_HPP_
#define RISKDIFF__TRAIN__METRICS_HPP_

#include "riskdiff/data/scene.hpp"
#include "riskdiff/util/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::train
{

using Trajectory = std::vector<data::Vec2>;

namespace detail
{

inline void check_modes(std::span<const Trajectory> preds, const Trajectory & gt)
{
  if (preds.empty()) {
    throw std::invalid_argument("metrics: need at least one mode");
  }
  if (gt.empty()) {
    throw std::invalid_argument("metrics: empty ground truth");
  }
  for (const auto & p : preds) {
    if (p.size() != gt.size()) {
      throw std::invalid_argument("metrics: mode length " + std::to_string(p.size()) +
                                  " vs ground truth " + std::to_string(gt.size()));
    }
  }
}

}  // namespace detail

inline double ade(const Trajectory & pred, const Trajectory & gt)
{
  double s = 0.0;
  for (std::size_t k = 0; k < gt.size(); ++k) {
    s += std::hypot(pred[k].x - gt[k].x, pred[k].y - gt[k].y);
  }
  return s / static_cast<double>(gt.size());
}

inline double fde(const Trajectory & pred, const Trajectory & gt)
{
  return std::hypot(pred.back().x - gt.back().x, pred.back().y - gt.back().y);
}

/// Smallest mean pointwise distance over the modes.
inline double min_ade(std::span<const Trajectory> preds, const Trajectory & gt)
{
  detail::check_modes(preds, gt);
  double best = ade(preds[0], gt);
  for (std::size_t m = 1; m < preds.size(); ++m) {
    best = std::min(best, ade(preds[m], gt));
  }
  return best;
}

/// Smallest endpoint distance over the modes.
inline double min_fde(std::span<const Trajectory> preds, const Trajectory & gt)
{
  detail::check_modes(preds, gt);
  double best = fde(preds[0], gt);
  for (std::size_t m = 1; m < preds.size(); ++m) {
    best = std::min(best, fde(preds[m], gt));
  }
  return best;
}

inline constexpr std::array<int, 5> kTopPercents{10, 20, 30, 40, 50};
inline constexpr std::size_t kHistogramBins = 100;

struct Histogram
{
  std::vector<double> edges;        // bins + 1, equal width
  std::vector<std::size_t> counts;  // bins
};

inline std::vector<double> histogram_edges(double lo, double hi, std::size_t bins = kHistogramBins)
{
  if (bins == 0 || !(hi >= lo)) {
    throw std::invalid_argument("histogram: need bins >= 1 and hi >= lo");
  }
  std::vector<double> e(bins + 1);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) {
    e[i] = lo + w * static_cast<double>(i);
  }
  e.back() = hi;
  return e;
}

/// Equal-width bins over [min, max]; the last bin is closed.
inline Histogram histogram(std::span<const double> values, std::size_t bins = kHistogramBins)
{
  if (values.empty()) {
    throw std::invalid_argument("histogram: no values");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  Histogram h;
  h.edges = histogram_edges(*lo, *hi, bins);
  h.counts.assign(bins, 0);
  const double w = (*hi - *lo) / static_cast<double>(bins);
  for (double v : values) {
    std::size_t b = w > 0.0 ? static_cast<std::size_t>((v - *lo) / w) : 0;
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

/// Difficulty grades from per-sample baseline FDE. Top X% holds the worst
/// X% of samples (nested); Rest is the complement of Top 50%.
struct LongTailGrading
{
  std::vector<double> baseline_fde;
  std::vector<std::size_t> order;  // sample indices, worst first
  std::array<std::size_t, kTopPercents.size()> top_counts{};
  Histogram hist;

  /// Sample indices of grade g in 0..4 (Top 10%..Top 50%).
  std::vector<std::size_t> top(std::size_t g) const
  {
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_counts.at(g))};
  }
  std::vector<std::size_t> rest() const
  {
    return {order.begin() + static_cast<std::ptrdiff_t>(top_counts.back()), order.end()};
  }
};

inline std::size_t top_count(std::size_t n, int percent)
{
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * percent / 100.0));
}

inline LongTailGrading grade_long_tail(std::span<const double> baseline_fdes)
{
  if (baseline_fdes.empty()) {
    throw std::invalid_argument("grade_long_tail: no samples");
  }
  LongTailGrading g;
  g.baseline_fde.assign(baseline_fdes.begin(), baseline_fdes.end());
  g.order.resize(g.baseline_fde.size());
  std::iota(g.order.begin(), g.order.end(), std::size_t{0});
  std::stable_sort(g.order.begin(), g.order.end(), [&](std::size_t a, std::size_t b) {
    return g.baseline_fde[a] > g.baseline_fde[b];
  });
  for (std::size_t i = 0; i < kTopPercents.size(); ++i) {
    g.top_counts[i] = top_count(g.baseline_fde.size(), kTopPercents[i]);
  }
  g.hist = histogram(g.baseline_fde);
  return g;
}

struct GradeRow
{
  std::string grade;
  std::size_t count = 0;
  double min_ade = 0.0;
  double min_fde = 0.0;
};

/// Table of per-grade mean minADE / minFDE.
struct MetricsReport
{
  std::vector<GradeRow> rows;  // Top 10%..Top 50%, Rest, All
  std::string fingerprint;

  const GradeRow & row(const std::string & grade) const
  {
    for (const auto & r : rows) {
      if (r.grade == grade) {
        return r;
      }
    }
    throw std::out_of_range("report: no grade '" + grade + "'");
  }

  void write_csv(std::ostream & os) const
  {
    os << "grade,minADE,minFDE\n";
    char buf[128];
    for (const auto & r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f\n", r.grade.c_str(), r.min_ade, r.min_fde);
      os << buf;
    }
  }
};

inline std::string grade_name(std::size_t g)
{
  return "Top " + std::to_string(kTopPercents.at(g)) + "%";
}

/// Aggregates per-sample metrics over the grades.
inline MetricsReport grade_report(
  std::span<const double> sample_ade, std::span<const double> sample_fde,
  const LongTailGrading & grading)
{
  const std::size_t n = grading.baseline_fde.size();
  if (sample_ade.size() != n || sample_fde.size() != n) {
    throw std::invalid_argument("grade_report: metric count does not match the grading");
  }
  auto row_of = [&](const std::string & name, const std::vector<std::size_t> & idx) {
    GradeRow r;
    r.grade = name;
    r.count = idx.size();
    for (std::size_t i : idx) {
      r.min_ade += sample_ade[i];
      r.min_fde += sample_fde[i];
    }
    if (!idx.empty()) {
      r.min_ade /= static_cast<double>(idx.size());
      r.min_fde /= static_cast<double>(idx.size());
    }
    return r;
  };
  MetricsReport rep;
  for (std::size_t g = 0; g < kTopPercents.size(); ++g) {
    rep.rows.push_back(row_of(grade_name(g), grading.top(g)));
  }
  rep.rows.push_back(row_of("Rest", grading.rest()));
  rep.rows.push_back(row_of("All", grading.order));
  return rep;
}

/// FNV-1a over the canonical JSON dump.
inline std::string fingerprint(const nlohmann::json & config)
{
  const std::uint64_t h = fnv1a(config.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Split
{
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<bool> long_tail;  // per sample
};

/// Worst 20% by baseline FDE form the long-tail pool, split 50:50; the
/// remaining samples split 80:20. Overall 74:26 with long-tail samples at
/// 10% of the total on each side. Index lists are sorted.
inline Split split_dataset(std::span<const double> baseline_fdes, std::uint64_t seed)
{
  const std::size_t n = baseline_fdes.size();
  if (n < 100) {
    throw std::invalid_argument("split_dataset: need at least 100 samples, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return baseline_fdes[a] > baseline_fdes[b];
  });
  const std::size_t n_tail = top_count(n, 20);
  std::vector<std::size_t> tail(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_tail));
  std::vector<std::size_t> body(order.begin() + static_cast<std::ptrdiff_t>(n_tail), order.end());
  std::sort(tail.begin(), tail.end());
  std::sort(body.begin(), body.end());
  auto rt = substream(seed, "split", {0});
  auto rb = substream(seed, "split", {1});
  rt.shuffle(tail);
  rb.shuffle(body);

  Split s;
  s.long_tail.assign(n, false);
  for (std::size_t i : tail) {
    s.long_tail[i] = true;
  }
  const std::size_t tail_train = n_tail / 2;
  const std::size_t body_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(body.size())));
  s.train.insert(s.train.end(), tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail_train));
  s.test.insert(s.test.end(), tail.begin() + static_cast<std::ptrdiff_t>(tail_train), tail.end());
  s.train.insert(s.train.end(), body.begin(), body.begin() + static_cast<std::ptrdiff_t>(body_train));
  s.test.insert(s.test.end(), body.begin() + static_cast<std::ptrdiff_t>(body_train), body.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace riskdiff::train

#endif  // RISKDIFF__TRAIN__METRICS_HPP_
