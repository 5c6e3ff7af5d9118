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


// riskdiff command line: gen-data, train, eval, ablate, plot, predict.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include "riskdiff/cli/run_config.hpp"
#include "riskdiff/data/records.hpp"
#include "riskdiff/data/scene_cache.hpp"
#include "riskdiff/data/synth.hpp"
#include "riskdiff/data/windowing.hpp"
#include "riskdiff/plot/svg.hpp"
#include "riskdiff/train/baseline.hpp"
#include "riskdiff/train/evaluate.hpp"
#include "riskdiff/train/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riskdiff;

namespace
{

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

constexpr const char * kCsvName = "corpus.csv";
constexpr const char * kCacheStem = "scenes";
constexpr const char * kSplitName = "split.json";
constexpr const char * kModelStem = "model";

std::string read_file(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + p.string());
  }
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path & p, const std::string & text)
{
  std::ofstream out(p, std::ios::binary);
  if (!out || !(out << text) || !out.flush()) {
    throw std::runtime_error("cannot write " + p.string());
  }
}

void make_dir(const fs::path & dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create directory " + dir.string());
  }
}

std::string hex(std::uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Lists every regular file under `dir` with size and hash. No timestamps, so
// reruns with the same seed give identical manifests.
void write_manifest(const fs::path & dir, const std::string & command)
{
  std::vector<fs::path> files;
  for (const auto & e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  json m = {{"command", command}, {"files", json::array()}};
  for (const auto & f : files) {
    const auto bytes = read_file(f);
    m["files"].push_back({{"path", fs::relative(f, dir).generic_string()},
                          {"bytes", bytes.size()},
                          {"fnv1a", hex(fnv1a(bytes))}});
  }
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void write_resolved_config(const fs::path & p, const cli::RunConfig & cfg)
{
  std::ostringstream s;
  cli::write_run_config(s, cfg);
  write_file(p, s.str());
}

cli::RunConfig resolve_config(const std::string & path, const std::vector<std::string> & sets)
{
  cli::RunConfig cfg;
  try {
    if (!path.empty()) {
      if (!fs::exists(path)) {
        throw UsageError("config file " + path + " does not exist");
      }
      cfg = cli::load_run_config(path);
    }
    for (const auto & s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw UsageError("--set expects key=value, got '" + s + "'");
      }
      cli::apply_assignment(cfg, cli::detail::trim(s.substr(0, eq)),
                            cli::detail::trim(s.substr(eq + 1)), "--set");
    }
    cfg.validate();
  } catch (const cli::ConfigError & e) {
    throw UsageError(e.what());
  } catch (const std::invalid_argument & e) {
    throw UsageError(e.what());
  }
  return cfg;
}

struct Dataset
{
  std::vector<data::Scene> scenes;
  json split;

  std::vector<std::size_t> indices(const char * key) const
  {
    return split.at(key).get<std::vector<std::size_t>>();
  }

  std::vector<data::Scene> pick(const std::vector<std::size_t> & idx) const
  {
    std::vector<data::Scene> out;
    for (const auto i : idx) {
      out.push_back(scenes.at(i));
    }
    return out;
  }

  std::vector<double> baseline_fde(const std::vector<std::size_t> & idx) const
  {
    const auto all = split.at("baseline_fde").get<std::vector<double>>();
    std::vector<double> out;
    for (const auto i : idx) {
      out.push_back(all.at(i));
    }
    return out;
  }
};

Dataset load_dataset(const fs::path & dir)
{
  if (!fs::exists(dir / (std::string(kCacheStem) + ".json")) || !fs::exists(dir / kSplitName)) {
    throw std::runtime_error(dir.string() + " has no scene cache; run gen-data first");
  }
  Dataset d;
  d.scenes = data::load_scene_cache(dir / kCacheStem).scenes;
  d.split = json::parse(read_file(dir / kSplitName));
  if (d.split.at("baseline_fde").size() != d.scenes.size()) {
    throw std::runtime_error(dir.string() + ": split does not match the scene cache");
  }
  return d;
}

std::size_t find_scene(const Dataset & d, std::int64_t id)
{
  for (std::size_t i = 0; i < d.scenes.size(); ++i) {
    if (d.scenes[i].scene_id == id) {
      return i;
    }
  }
  throw std::runtime_error("scene " + std::to_string(id) + " not in the corpus");
}

double skewness(const std::vector<double> & v)
{
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    m2 += (x - mean) * (x - mean);
    m3 += (x - mean) * (x - mean) * (x - mean);
  }
  m2 /= static_cast<double>(v.size());
  m3 /= static_cast<double>(v.size());
  return m2 > 0 ? m3 / std::pow(m2, 1.5) : 0.0;
}

// ---- gen-data ---------------------------------------------------------------

struct GenArgs
{
  std::size_t scenes = 1000;
  double emergency = 0.3;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  std::vector<std::string> sets;
};

int cmd_gen_data(const GenArgs & a)
{
  auto cfg = resolve_config(a.config, a.sets);
  cfg.synth.n_scenes = a.scenes;
  cfg.synth.fraction_emergency = a.emergency;
  cfg.synth.seed = a.seed;
  try {
    cfg.synth.validate();
  } catch (const std::invalid_argument & e) {
    throw UsageError(e.what());
  }
  const fs::path out(a.out);
  make_dir(out);

  const auto records = data::synth_generate(cfg.synth);
  data::save_csv(out / kCsvName, records);
  // everything downstream reads the files back, exactly as an external corpus
  const auto loaded = data::load_csv(out / kCsvName);
  data::WindowStats stats;
  const auto windows = data::window_scenes(loaded, cfg.synth.dt, 25, &stats);
  json meta = {{"synth", cfg.synth_json()}, {"source", kCsvName}};
  data::save_scene_cache(out / kCacheStem, windows, meta);
  const auto scenes = data::load_scene_cache(out / kCacheStem).scenes;
  train::BaselineConfig bc;
  bc.seed = cfg.synth.seed;
  train::BaselinePredictor baseline(model::fit_feature_scales(scenes), bc);
  baseline.fit(scenes);
  const auto fdes = baseline.fde(scenes);
  train::Split split;
  const bool graded = scenes.size() >= 100;
  if (graded) {
    split = train::split_dataset(fdes, cfg.synth.seed);
  } else {
    // too small for six grades: train on everything, nothing to evaluate
    std::cerr << "warning: " << scenes.size()
              << " scenes is below the 100 needed for the long-tail split; all go to train\n";
    split.train.resize(scenes.size());
    std::iota(split.train.begin(), split.train.end(), std::size_t{0});
    split.long_tail.assign(scenes.size(), false);
  }
  std::size_t tail_train = 0, tail_test = 0;
  for (const auto i : split.train) {
    tail_train += split.long_tail[i];
  }
  for (const auto i : split.test) {
    tail_test += split.long_tail[i];
  }
  json js = {{"seed", cfg.synth.seed},
             {"graded", graded},
             {"train", split.train},
             {"test", split.test},
             {"long_tail", split.long_tail},
             {"baseline_fde", fdes}};
  write_file(out / kSplitName, js.dump() + "\n");

  double density = 0.0, speed = 0.0, rate = 0.0;
  for (const auto & s : scenes) {
    density += s.flow.density;
    speed += s.flow.mean_speed;
    rate += s.flow.flow_rate;
  }
  const double n = static_cast<double>(scenes.size());
  json summary = {{"records", records.size()},
                  {"tracks", stats.tracks},
                  {"scenes", scenes.size()},
                  {"short_segments", stats.short_segments},
                  {"gaps", stats.gaps},
                  {"mean_density_veh_per_km", density / n},
                  {"mean_speed_km_per_h", speed / n},
                  {"mean_flow_rate_veh_per_h", rate / n},
                  {"baseline_fde_max", *std::max_element(fdes.begin(), fdes.end())},
                  {"baseline_fde_skewness", skewness(fdes)},
                  {"train", split.train.size()},
                  {"test", split.test.size()},
                  {"long_tail_train", tail_train},
                  {"long_tail_test", tail_test}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
  write_resolved_config(out / "config.txt", cfg);
  write_manifest(out, "gen-data");
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs
{
  std::string config;
  std::vector<std::string> sets;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::size_t stop_after = 0;
  bool resume = false;
  bool quiet = false;
};

void write_loss_log(const fs::path & p, const std::vector<train::EpochLog> & log)
{
  std::ostringstream s;
  s << "epoch,L_diff,L_Traj,L_total\n";
  char buf[128];
  for (const auto & e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", e.epoch, e.l_diff, e.l_traj,
                  e.l_total);
    s << buf;
  }
  write_file(p, s.str());
}

int cmd_train(const TrainArgs & a)
{
  auto cfg = resolve_config(a.config, a.sets);
  if (a.seed) {
    cfg.train.seed = *a.seed;
  }
  if (a.epochs) {
    if (*a.epochs == 0) {
      throw UsageError("--epochs must be >= 1");
    }
    cfg.train.epochs = *a.epochs;
  }
  const auto d = load_dataset(a.data);
  const auto train_scenes = d.pick(d.indices("train"));
  const fs::path out(a.out);
  make_dir(out);
  write_resolved_config(out / "config.txt", cfg);

  train::Model m(cfg.model, model::fit_feature_scales(train_scenes), cfg.train.seed);
  train::TrainOptions opt;
  opt.checkpoint = out / kModelStem;
  opt.resume = a.resume;
  opt.stop_after = a.stop_after;
  std::vector<train::EpochLog> log;
  if (a.resume && fs::exists(out / (std::string(kModelStem) + ".json"))) {
    for (const auto & e : io::read_bundle(opt.checkpoint).metadata.at("loss_log")) {
      log.push_back(train::epoch_log_from_json(e));
    }
  }
  opt.on_epoch = [&](const train::EpochLog & e) {
    log.push_back(e);
    write_loss_log(out / "loss_log.csv", log);
    if (!a.quiet) {
      std::printf("epoch %3zu  L_diff %.4f  L_Traj %.4f  L_conf %.4f  L_total %.4f\n", e.epoch,
                  e.l_diff, e.l_traj, e.l_conf, e.l_total);
      std::fflush(stdout);
    }
  };
  try {
    log = train::train_model(m, train_scenes, cfg.train, opt);
  } catch (const train::NonFiniteLoss & e) {
    std::cerr << "error: non-finite loss, training stopped (" << e.what()
              << "); try a lower train.lr\n";
    return 1;
  }
  write_loss_log(out / "loss_log.csv", log);
  write_manifest(out, "train");
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs
{
  std::string ckpt;
  std::string data;
  std::size_t modes = 10;
  std::string report;
  std::optional<std::uint64_t> seed;
};

fs::path model_stem(const fs::path & ckpt)
{
  if (fs::is_directory(ckpt)) {
    return ckpt / kModelStem;
  }
  return ckpt;
}

int cmd_eval(const EvalArgs & a)
{
  if (a.modes == 0) {
    throw UsageError("--modes must be >= 1");
  }
  const auto loaded = train::load_checkpoint(model_stem(a.ckpt));
  const auto & cfg = loaded.model.config();
  if (!cfg.use_dit && a.modes > cfg.train_modes()) {
    throw UsageError("--modes exceeds the " + std::to_string(cfg.train_modes()) +
                     " fixed latents of a dit=off model");
  }
  const auto d = load_dataset(a.data);
  const auto idx = d.indices("test");
  if (idx.empty()) {
    throw std::runtime_error(a.data + " has no test split (corpus below 100 scenes)");
  }
  const auto test = d.pick(idx);
  const auto bfde = d.baseline_fde(idx);
  const std::uint64_t seed = a.seed.value_or(loaded.train.seed);
  const auto r = train::evaluate(loaded.model, test, bfde, a.modes, seed);

  const fs::path report(a.report);
  if (report.has_parent_path()) {
    make_dir(report.parent_path());
  }
  std::ostringstream csv;
  r.report.write_csv(csv);
  write_file(report, csv.str());
  // per-scene detail next to the report, read by `plot --report`
  std::ostringstream per;
  per << "scene_id,baseline_fde,minADE,minFDE\n";
  char buf[160];
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f\n",
                  static_cast<long long>(test[i].scene_id), bfde[i], r.ade[i], r.fde[i]);
    per << buf;
  }
  write_file(fs::path(report.string() + ".scenes.csv"), per.str());
  json info = {{"checkpoint", model_stem(a.ckpt).generic_string()},
               {"modes", a.modes},
               {"seed", seed},
               {"test_scenes", test.size()},
               {"fingerprint", r.report.fingerprint}};
  write_file(fs::path(report.string() + ".json"), info.dump(2) + "\n");
  std::cout << csv.str();
  return 0;
}

// ---- ablate -----------------------------------------------------------------

struct AblateArgs
{
  std::string grid;
  std::string data;
  std::string out;
  std::string config;
  std::vector<std::string> sets;
};

// One cell per non-comment line: `dit=on multimodal=on decoder_layers=2 modes=10`.
std::vector<std::pair<std::string, std::optional<train::AblationCell>>> parse_grid(
  const fs::path & p)
{
  std::istringstream in(read_file(p));
  std::vector<std::pair<std::string, std::optional<train::AblationCell>>> cells;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    line = cli::detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (line.empty()) {
      continue;
    }
    train::AblationCell c;
    std::istringstream tokens(line);
    std::string tok;
    bool ok = true;
    auto flag = [&](const std::string & v, bool & dst) {
      if (v == "on" || v == "true" || v == "1") {
        dst = true;
      } else if (v == "off" || v == "false" || v == "0") {
        dst = false;
      } else {
        ok = false;
      }
    };
    auto count = [&](const std::string & v, std::size_t & dst) {
      try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        ok = ok && used == v.size() && x >= 0;
        dst = static_cast<std::size_t>(std::max(0LL, x));
      } catch (const std::exception &) {
        ok = false;
      }
    };
    while (tokens >> tok) {
      const auto eq = tok.find('=');
      const auto k = tok.substr(0, eq);
      const auto v = eq == std::string::npos ? std::string() : tok.substr(eq + 1);
      if (k == "dit") {
        flag(v, c.dit);
      } else if (k == "multimodal") {
        flag(v, c.multimodal);
      } else if (k == "decoder_layers") {
        count(v, c.decoder_layers);
      } else if (k == "modes") {
        count(v, c.modes);
      } else {
        ok = false;
      }
    }
    const auto label = "line " + std::to_string(row) + ": " + line;
    cells.emplace_back(label, ok ? std::optional(c) : std::nullopt);
  }
  return cells;
}

int cmd_ablate(const AblateArgs & a)
{
  if (!fs::exists(a.grid)) {
    throw UsageError("grid file " + a.grid + " does not exist");
  }
  const auto cfg = resolve_config(a.config, a.sets);
  const auto cells = parse_grid(a.grid);
  if (cells.empty()) {
    throw UsageError("grid file " + a.grid + " has no cells");
  }
  const auto d = load_dataset(a.data);
  const auto train_scenes = d.pick(d.indices("train"));
  const auto test_idx = d.indices("test");
  if (test_idx.empty()) {
    throw std::runtime_error(a.data + " has no test split (corpus below 100 scenes)");
  }
  const auto test = d.pick(test_idx);
  const auto bfde = d.baseline_fde(test_idx);
  const auto scales = model::fit_feature_scales(train_scenes);
  const fs::path out(a.out);
  make_dir(out);
  write_resolved_config(out / "config.txt", cfg);

  std::ostringstream summary;
  summary << "cell,status";
  std::vector<std::string> grades;
  for (std::size_t g = 0; g < train::kTopPercents.size(); ++g) {
    grades.push_back(train::grade_name(g));
  }
  grades.insert(grades.end(), {"Rest", "All"});
  for (const auto & g : grades) {
    summary << ',' << g << " minADE," << g << " minFDE";
  }
  summary << '\n';
  bool failed = false;
  for (const auto & [label, cell] : cells) {
    std::string name = cell ? cell->name() : label;
    try {
      if (!cell) {
        throw std::invalid_argument("cannot parse cell");
      }
      cell->apply(cfg.model);  // validates before any training
      std::cout << "cell " << name << std::endl;
      const auto r = train::run_ablation(*cell, cfg.model, scales, cfg.train, train_scenes, test,
                                         bfde);
      std::ostringstream csv;
      r.report.write_csv(csv);
      write_file(out / (name + ".csv"), csv.str());
      summary << name << ",ok";
      char buf[64];
      for (const auto & row : r.report.rows) {
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f", row.min_ade, row.min_fde);
        summary << buf;
      }
      summary << '\n';
    } catch (const std::exception & e) {
      failed = true;
      std::cerr << "cell " << name << " failed: " << e.what() << '\n';
      std::string safe = name;
      std::replace(safe.begin(), safe.end(), ',', ';');
      summary << '"' << safe << "\",failed" << std::string(14, ',') << '\n';
    }
  }
  write_file(out / "summary.csv", summary.str());
  write_manifest(out, "ablate");
  std::cout << summary.str();
  return failed ? 1 : 0;
}

// ---- plot / predict ---------------------------------------------------------

struct PlotArgs
{
  std::string report;
  std::optional<std::int64_t> scene;
  std::string ckpt;
  std::string data;
  std::string out;
  std::size_t modes = 10;
  std::optional<std::uint64_t> seed;
};

std::vector<double> read_column(const fs::path & p, const std::string & column)
{
  std::istringstream in(read_file(p));
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(p.string() + " is empty");
  }
  const auto header = data::detail::split_csv_line(line);
  const auto it = std::find(header.begin(), header.end(), column);
  if (it == header.end()) {
    throw std::runtime_error(p.string() + " has no column " + column);
  }
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      out.push_back(std::stod(data::detail::split_csv_line(line).at(col)));
    }
  }
  return out;
}

std::vector<model::SceneForecast> forecast_one(const PlotArgs & a, const Dataset & d,
                                               std::size_t i, const train::LoadedModel & lm)
{
  const std::vector<data::Scene> one{d.scenes[i]};
  return lm.model.predict(one, a.modes, a.seed.value_or(lm.train.seed));
}

int cmd_plot(const PlotArgs & a)
{
  if (a.report.empty() == !a.scene.has_value()) {
    throw UsageError("plot needs exactly one of --report or --scene");
  }
  const fs::path out(a.out);
  make_dir(out);
  if (!a.report.empty()) {
    const fs::path detail(a.report + ".scenes.csv");
    if (!fs::exists(a.report) || !fs::exists(detail)) {
      throw std::runtime_error("report " + a.report + " (or its .scenes.csv) not found");
    }
    const auto fdes = read_column(detail, "baseline_fde");
    write_file(out / "fde_histogram.svg", plot::histogram_svg(fdes, "Baseline FDE"));
    std::cout << (out / "fde_histogram.svg").string() << '\n';
    return 0;
  }
  if (a.ckpt.empty() || a.data.empty()) {
    throw UsageError("--scene needs --ckpt and --data");
  }
  const auto lm = train::load_checkpoint(model_stem(a.ckpt));
  const auto d = load_dataset(a.data);
  const auto i = find_scene(d, *a.scene);
  const auto f = forecast_one(a, d, i, lm);
  const auto path = out / ("scene_" + std::to_string(*a.scene) + ".svg");
  write_file(path, plot::scene_svg(d.scenes[i], f.front(), 3));
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_predict(const PlotArgs & a)
{
  const auto lm = train::load_checkpoint(model_stem(a.ckpt));
  const auto d = load_dataset(a.data);
  const auto i = find_scene(d, *a.scene);
  const auto f = forecast_one(a, d, i, lm).front();
  std::vector<std::size_t> rank(f.modes.size());
  for (std::size_t k = 0; k < rank.size(); ++k) {
    rank[k] = k;
  }
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t x, std::size_t y) {
    return f.modes[x].confidence > f.modes[y].confidence;
  });
  std::ostringstream csv;
  csv.precision(6);
  csv << std::fixed;
  model::write_prediction_csv_header(csv);
  const auto & s = d.scenes[i];
  for (std::size_t r = 0; r < rank.size(); ++r) {
    const auto & m = f.modes[rank[r]];
    model::write_prediction_csv_rows(
      csv, s.scene_id, r, model::compose_trajectory(s.anchor(), data::anchor_heading(s), m, s.dt),
      m.confidence);
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << csv.str();
  } else {
    const fs::path p(a.out);
    if (p.has_parent_path()) {
      make_dir(p.parent_path());
    }
    write_file(p, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"riskdiff: risk-aware diffusion trajectory prediction"};
  app.require_subcommand(1);

  GenArgs gen;
  auto * g = app.add_subcommand("gen-data", "Generate a synthetic corpus, scene cache and split");
  g->add_option("--scenes", gen.scenes, "Number of scenes")->capture_default_str();
  g->add_option("--emergency", gen.emergency, "Fraction of lanes with a braking event")
    ->capture_default_str();
  g->add_option("--seed", gen.seed, "Root seed")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--config", gen.config, "key = value config file");
  g->add_option("--set", gen.sets, "Override one config key (section.key=value)");

  TrainArgs tr;
  auto * t = app.add_subcommand("train", "Train the model on the training split");
  t->add_option("--config", tr.config, "key = value config file");
  t->add_option("--set", tr.sets, "Override one config key (section.key=value)");
  t->add_option("--data", tr.data, "Directory written by gen-data")->required();
  t->add_option("--out", tr.out, "Checkpoint directory")->required();
  t->add_option("--seed", tr.seed, "Overrides train.seed");
  t->add_option("--epochs", tr.epochs, "Overrides train.epochs");
  t->add_option("--stop-after", tr.stop_after, "Stop once this many epochs are done");
  t->add_flag("--resume", tr.resume, "Continue from the checkpoint in --out");
  t->add_flag("--quiet", tr.quiet, "No per-epoch output");

  EvalArgs ev;
  auto * e = app.add_subcommand("eval", "Grade-wise minADE / minFDE on the test split");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint directory or stem")->required();
  e->add_option("--data", ev.data, "Directory written by gen-data")->required();
  e->add_option("--modes", ev.modes, "Modes sampled per scene")->capture_default_str();
  e->add_option("--report", ev.report, "Report CSV path")->required();
  e->add_option("--seed", ev.seed, "Sampling seed (default: the training seed)");

  AblateArgs ab;
  auto * b = app.add_subcommand("ablate", "Train and evaluate every cell of a grid");
  b->add_option("--grid", ab.grid, "Grid file, one cell per line")->required();
  b->add_option("--data", ab.data, "Directory written by gen-data")->required();
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--config", ab.config, "key = value config file");
  b->add_option("--set", ab.sets, "Override one config key (section.key=value)");

  PlotArgs pl;
  auto * p = app.add_subcommand("plot", "SVG figures: FDE histogram or one scene");
  p->add_option("--report", pl.report, "Report CSV written by eval");
  p->add_option("--scene", pl.scene, "Scene id to draw");
  p->add_option("--ckpt", pl.ckpt, "Checkpoint (with --scene)");
  p->add_option("--data", pl.data, "Corpus directory (with --scene)");
  p->add_option("--modes", pl.modes, "Modes sampled")->capture_default_str();
  p->add_option("--seed", pl.seed, "Sampling seed");
  p->add_option("--out", pl.out, "Output directory")->required();

  PlotArgs pr;
  auto * q = app.add_subcommand("predict", "Confidence-ranked forecast of one scene as CSV");
  q->add_option("--ckpt", pr.ckpt, "Checkpoint")->required();
  q->add_option("--data", pr.data, "Corpus directory")->required();
  q->add_option("--scene", pr.scene, "Scene id")->required();
  q->add_option("--modes", pr.modes, "Modes sampled")->capture_default_str();
  q->add_option("--seed", pr.seed, "Sampling seed");
  q->add_option("--out", pr.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError & ex) {
    app.exit(ex);
    return 2;
  }

  try {
    if (*g) {
      return cmd_gen_data(gen);
    }
    if (*t) {
      return cmd_train(tr);
    }
    if (*e) {
      return cmd_eval(ev);
    }
    if (*b) {
      return cmd_ablate(ab);
    }
    if (*p) {
      return cmd_plot(pl);
    }
    if (*q) {
      if (pr.modes == 0) {
        throw UsageError("--modes must be >= 1");
      }
      return cmd_predict(pr);
    }
  } catch (const UsageError & ex) {
    std::cerr << "usage error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception & ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}
