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


#ifndef RISKDIFF__PLOT__SVG_HPP_
#define RISKDIFF__PLOT__SVG_HPP_

#include "riskdiff/data/scene.hpp"
#include "riskdiff/model/decoder.hpp"
#include "riskdiff/train/metrics.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskdiff::plot
{

inline constexpr double kWidth = 800.0;
inline constexpr double kHeight = 500.0;
inline constexpr double kMargin = 50.0;

namespace detail
{

inline std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Box
{
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void add(const data::Vec2 & p)
  {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
};

}  // namespace detail

/// Bar chart of the 100-bin FDE histogram; one <rect class="bin"> per bin.
inline std::string histogram_svg(std::span<const double> fdes, const std::string & title = "FDE")
{
  const auto h = train::histogram(fdes);
  const std::size_t peak = *std::max_element(h.counts.begin(), h.counts.end());
  const double pw = kWidth - 2 * kMargin;
  const double ph = kHeight - 2 * kMargin;
  const double bw = pw / static_cast<double>(h.counts.size());
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\">\n";
  os << "<text x=\"" << kMargin << "\" y=\"30\" font-size=\"16\">" << title << " histogram ("
     << h.counts.size() << " bins, n=" << fdes.size() << ")</text>\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double bh = peak > 0 ? ph * static_cast<double>(h.counts[b]) / static_cast<double>(peak) : 0;
    os << "<rect class=\"bin\" x=\"" << detail::num(kMargin + bw * static_cast<double>(b))
       << "\" y=\"" << detail::num(kMargin + ph - bh) << "\" width=\"" << detail::num(bw)
       << "\" height=\"" << detail::num(bh) << "\" fill=\"steelblue\"/>\n";
  }
  os << "<text x=\"" << kMargin << "\" y=\"" << kHeight - 15 << "\" font-size=\"12\">"
     << detail::num(h.edges.front()) << " m</text>\n";
  os << "<text x=\"" << kWidth - kMargin - 60 << "\" y=\"" << kHeight - 15
     << "\" font-size=\"12\">" << detail::num(h.edges.back()) << " m</text>\n";
  os << "</svg>\n";
  return os.str();
}

/// History, ground truth and the `top` most confident modes of one scene.
inline std::string scene_svg(
  const data::Scene & s, const model::SceneForecast & f, std::size_t top = 3)
{
  std::vector<std::size_t> rank(f.modes.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return f.modes[a].confidence > f.modes[b].confidence;
  });
  rank.resize(std::min(top, rank.size()));

  std::vector<std::vector<data::Vec2>> preds;
  for (const auto r : rank) {
    preds.push_back(
      model::compose_trajectory(s.anchor(), data::anchor_heading(s), f.modes[r], s.dt).positions);
  }
  detail::Box box;
  for (const auto & p : s.history) {
    box.add(p);
  }
  for (const auto & p : s.future) {
    box.add(p);
  }
  for (const auto & t : preds) {
    for (const auto & p : t) {
      box.add(p);
    }
  }
  // equal aspect, y up
  const double span = std::max({box.x1 - box.x0, box.y1 - box.y0, 1.0});
  const double k = std::min(kWidth, kHeight) - 2 * kMargin;
  auto px = [&](const data::Vec2 & p) {
    return detail::num(kMargin + (p.x - box.x0) / span * k) + "," +
           detail::num(kHeight - kMargin - (p.y - box.y0) / span * k);
  };
  auto polyline = [&](const std::vector<data::Vec2> & pts, const std::string & cls,
                      const std::string & color, const std::string & extra) {
    std::string out = "<polyline class=\"" + cls + "\" fill=\"none\" stroke=\"" + color +
                      "\" stroke-width=\"2\"" + extra + " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out += (i ? " " : "") + px(pts[i]);
    }
    return out + "\"/>\n";
  };

  static const std::array<const char *, 3> colors{"#d62728", "#ff7f0e", "#2ca02c"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\">\n";
  os << "<text x=\"" << kMargin << "\" y=\"30\" font-size=\"16\">scene " << s.scene_id
     << "</text>\n";
  os << polyline(s.history, "history", "#444444", "");
  os << polyline(s.future, "truth", "#1f77b4", " stroke-dasharray=\"6,3\"");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    os << polyline(preds[i], "prediction", colors[i % colors.size()],
                   " data-rank=\"" + std::to_string(i + 1) + "\" data-confidence=\"" +
                     detail::num(f.modes[rank[i]].confidence) + "\"");
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace riskdiff::plot

#endif  // RISKDIFF__PLOT__SVG_HPP_
