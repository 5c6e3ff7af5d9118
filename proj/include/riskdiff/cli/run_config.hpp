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


#ifndef RISKDIFF__CLI__RUN_CONFIG_HPP_
#define RISKDIFF__CLI__RUN_CONFIG_HPP_

#include "riskdiff/data/synth.hpp"
#include "riskdiff/model/model.hpp"
#include "riskdiff/train/trainer.hpp"

#include <json.hpp>

#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace riskdiff::cli
{

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Everything a run needs. The text form is one `section.key = value` per
/// line; `#` starts a comment. Sections: model, train, synth.
struct RunConfig
{
  model::ModelConfig model;
  train::TrainConfig train;
  data::SynthConfig synth;

  nlohmann::json to_json() const
  {
    return {{"model", model.to_json()}, {"train", train.to_json()}, {"synth", synth_json()}};
  }

  nlohmann::json synth_json() const
  {
    return {{"n_scenes", synth.n_scenes}, {"fraction_emergency", synth.fraction_emergency},
            {"seed", synth.seed}, {"lanes", synth.lanes}, {"dt", synth.dt},
            {"lane_width", synth.lane_width}, {"vehicles_per_lane", synth.vehicles_per_lane}};
  }

  void set_from_json(const nlohmann::json & j)
  {
    model = model::ModelConfig::from_json(j.at("model"));
    train = train::TrainConfig::from_json(j.at("train"));
    const auto & s = j.at("synth");
    synth.n_scenes = s.at("n_scenes").get<std::size_t>();
    synth.fraction_emergency = s.at("fraction_emergency").get<double>();
    synth.seed = s.at("seed").get<std::uint64_t>();
    synth.lanes = s.at("lanes").get<int>();
    synth.dt = s.at("dt").get<double>();
    synth.lane_width = s.at("lane_width").get<double>();
    synth.vehicles_per_lane = s.at("vehicles_per_lane").get<std::size_t>();
  }

  void validate() const
  {
    model.validate();
    train.validate();
    synth.validate();
  }
};

namespace detail
{

inline std::string trim(const std::string & s)
{
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) {
    ++b;
  }
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) {
    --e;
  }
  return s.substr(b, e - b);
}

// Converts `text` to the JSON type already stored at `slot`.
inline nlohmann::json convert_like(const nlohmann::json & slot, const std::string & text,
                                   const std::string & where)
{
  auto fail = [&]() -> ConfigError {
    return ConfigError(where + ": cannot parse '" + text + "' as " + slot.type_name());
  };
  if (slot.is_boolean()) {
    if (text == "true" || text == "on" || text == "1") {
      return true;
    }
    if (text == "false" || text == "off" || text == "0") {
      return false;
    }
    throw fail();
  }
  if (slot.is_number_unsigned()) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) {
      throw fail();
    }
    return v;
  }
  if (slot.is_number_integer()) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) {
      throw fail();
    }
    return v;
  }
  if (slot.is_number_float()) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text, &used);
    } catch (const std::exception &) {
      throw fail();
    }
    if (used != text.size()) {
      throw fail();
    }
    return v;
  }
  throw fail();
}

}  // namespace detail

/// Applies one `section.key = value` assignment. Unknown keys throw.
inline void apply_assignment(RunConfig & cfg, const std::string & key, const std::string & value,
                             const std::string & where = "config")
{
  auto j = cfg.to_json();
  const auto dot = key.find('.');
  if (dot == std::string::npos) {
    throw ConfigError(where + ": key '" + key + "' must be section.name");
  }
  const auto section = key.substr(0, dot);
  const auto name = key.substr(dot + 1);
  if (!j.contains(section) || !j[section].contains(name)) {
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
  j[section][name] = detail::convert_like(j[section][name], value, where + ": " + key);
  cfg.set_from_json(j);
}

inline RunConfig parse_run_config(std::istream & in, const std::string & source = "<config>")
{
  RunConfig cfg;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto where = source + ":" + std::to_string(row);
    const auto hash = line.find('#');
    line = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected key = value");
    }
    apply_assignment(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)),
                     where);
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config " + path.string());
  }
  return parse_run_config(in, path.string());
}

/// Round-trippable text form, keys sorted within each section.
inline void write_run_config(std::ostream & os, const RunConfig & cfg)
{
  const auto j = cfg.to_json();
  for (const char * section : {"model", "train", "synth"}) {
    for (const auto & [k, v] : j.at(section).items()) {
      os << section << '.' << k << " = ";
      if (v.is_number_float()) {
        std::ostringstream s;
        s.precision(17);
        s << v.get<double>();
        os << s.str();
      } else {
        os << v.dump();
      }
      os << '\n';
    }
  }
}

}  // namespace riskdiff::cli

#endif  // RISKDIFF__CLI__RUN_CONFIG_HPP_
