#include "sparseg/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "sparseg/harness.hpp"

namespace sparseg {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

template <typename T>
T get(const ordered_json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  }
}

Dims get_dims(const ordered_json& j, const std::string& key) {
  const auto v = get<std::vector<int>>(j, key);
  if (v.size() != 3) throw std::invalid_argument("config key '" + key + "' needs 3 values");
  return {v[0], v[1], v[2]};
}

std::vector<fs::path> get_paths(const ordered_json& j, const std::string& key, const fs::path& base) {
  std::vector<fs::path> out;
  for (const auto& s : get<std::vector<std::string>>(j, key)) {
    fs::path p(s);
    out.push_back(p.is_absolute() || base.empty() ? p : base / p);
  }
  return out;
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.generic_string());
  return out;
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd_momentum;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

void apply(ExperimentConfig& c, const std::string& key, const ordered_json& j, const fs::path& base) {
  PhantomSpec& ph = c.phantom;
  TrainConfig& t = c.train;
  ScheduleConfig& s = c.train.schedule;
  DataPaths& d = c.data;
  if (key == "dims") {
    ph.dims = get_dims(j, key);
  } else if (key == "spacing") {
    const auto v = get<std::vector<double>>(j, key);
    if (v.size() != 3) throw std::invalid_argument("config key 'spacing' needs 3 values");
    ph.spacing = {v[0], v[1], v[2]};
  } else if (key == "lobes_min") {
    ph.lobes_min = get<int>(j, key);
  } else if (key == "lobes_max") {
    ph.lobes_max = get<int>(j, key);
  } else if (key == "size_min") {
    ph.size_min = get<double>(j, key);
  } else if (key == "size_max") {
    ph.size_max = get<double>(j, key);
  } else if (key == "contrast") {
    ph.contrast = get<double>(j, key);
  } else if (key == "noise_sigma") {
    ph.noise_sigma = get<double>(j, key);
  } else if (key == "texture_amplitude") {
    ph.texture_amplitude = get<double>(j, key);
  } else if (key == "regime") {
    t.regime = parse_regime(get<std::string>(j, key));
  } else if (key == "percentage") {
    t.percentage = get<double>(j, key);
  } else if (key == "borders") {
    t.borders = get<bool>(j, key);
  } else if (key == "batch_size") {
    t.batch_size = get<std::size_t>(j, key);
  } else if (key == "patch") {
    t.patch = get_dims(j, key);
  } else if (key == "epochs_phase1") {
    t.epochs_phase1 = get<int>(j, key);
  } else if (key == "epochs_phase2") {
    t.epochs_phase2 = get<int>(j, key);
  } else if (key == "iterations_per_epoch") {
    t.iterations_per_epoch = get<int>(j, key);
  } else if (key == "optimizer") {
    t.optimizer = parse_optimizer(get<std::string>(j, key));
  } else if (key == "seed") {
    t.seed = get<std::uint64_t>(j, key);
  } else if (key == "initial_lr") {
    s.initial_lr = get<double>(j, key);
  } else if (key == "lr_factor") {
    s.factor = get<double>(j, key);
  } else if (key == "patience") {
    s.patience = get<int>(j, key);
  } else if (key == "plateau_threshold") {
    s.threshold = get<double>(j, key);
  } else if (key == "min_lr") {
    s.min_lr = get<double>(j, key);
  } else if (key == "restart_period") {
    s.restart_period = get<int>(j, key);
  } else if (key == "train_partial") {
    c.train_partial = get<std::size_t>(j, key);
  } else if (key == "validation") {
    c.validation = get<std::size_t>(j, key);
  } else if (key == "test") {
    c.test = get<std::size_t>(j, key);
  } else if (key == "seeds") {
    c.seeds = get<std::vector<std::uint64_t>>(j, key);
  } else if (key == "scenarios") {
    c.scenarios = get<std::vector<std::string>>(j, key);
  } else if (key == "out") {
    const fs::path p(get<std::string>(j, key));
    c.out_dir = p.is_absolute() || base.empty() ? p : base / p;
  } else if (key == "train_images") {
    d.train_images = get_paths(j, key, base);
  } else if (key == "train_masks") {
    d.train_masks = get_paths(j, key, base);
  } else if (key == "val_images") {
    d.val_images = get_paths(j, key, base);
  } else if (key == "val_masks") {
    d.val_masks = get_paths(j, key, base);
  } else if (key == "test_images") {
    d.test_images = get_paths(j, key, base);
  } else if (key == "test_masks") {
    d.test_masks = get_paths(j, key, base);
  } else if (key == "dataset") {
    const fs::path p(get<std::string>(j, key));
    const fs::path file = p.is_absolute() || base.empty() ? p : base / p;
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("cannot open dataset file " + file.string());
    ordered_json ds;
    try {
      ds = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("dataset file " + file.string() + ": " + e.what());
    }
    for (const auto& [k, v] : ds.items()) {
      if (k == "seed" || k == "phantom") continue;  // provenance only
      if (k.find("_images") == std::string::npos && k.find("_masks") == std::string::npos) {
        throw std::invalid_argument("unexpected key '" + k + "' in dataset file " + file.string());
      }
      apply(c, k, ds, file.parent_path());
    }
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

}  // namespace

std::size_t ExperimentConfig::train_full() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(train_partial) * train.percentage));
}

void ExperimentConfig::validate() const {
  phantom.validate();
  train.validate();
  if (seeds.empty()) throw std::invalid_argument("seeds must not be empty");
  if (train_partial == 0 || validation == 0 || test == 0) {
    throw std::invalid_argument("train_partial, validation and test counts must be positive");
  }
  if (train_full() == 0) throw std::invalid_argument("round(train_partial * percentage) must be at least 1");
  std::set<std::string> seen;
  for (const auto& s : scenarios) {
    parse_scenario(s);
    if (!seen.insert(s).second) throw std::invalid_argument("scenario '" + s + "' listed twice");
  }
  const Dims& p = train.patch;
  const Dims& d = phantom.dims;
  if (p.x > d.x || p.y > d.y || p.z > d.z) throw std::invalid_argument("patch larger than phantom dims");
}

ExperimentConfig config_from_json(const ordered_json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, value] : j.items()) apply(c, key, j, base_dir);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

ordered_json config_to_json(const ExperimentConfig& c) {
  const PhantomSpec& ph = c.phantom;
  const TrainConfig& t = c.train;
  const ScheduleConfig& s = t.schedule;
  ordered_json j;
  j["dims"] = {ph.dims.x, ph.dims.y, ph.dims.z};
  j["spacing"] = {ph.spacing.sx, ph.spacing.sy, ph.spacing.sz};
  j["lobes_min"] = ph.lobes_min;
  j["lobes_max"] = ph.lobes_max;
  j["size_min"] = ph.size_min;
  j["size_max"] = ph.size_max;
  j["contrast"] = ph.contrast;
  j["noise_sigma"] = ph.noise_sigma;
  j["texture_amplitude"] = ph.texture_amplitude;
  j["regime"] = to_string(t.regime);
  j["percentage"] = t.percentage;
  j["borders"] = t.borders;
  j["batch_size"] = t.batch_size;
  j["patch"] = {t.patch.x, t.patch.y, t.patch.z};
  j["epochs_phase1"] = t.epochs_phase1;
  j["epochs_phase2"] = t.epochs_phase2;
  j["iterations_per_epoch"] = t.iterations_per_epoch;
  j["optimizer"] = t.optimizer == OptimizerKind::adam ? "adam" : "sgd";
  j["seed"] = t.seed;
  j["initial_lr"] = s.initial_lr;
  j["lr_factor"] = s.factor;
  j["patience"] = s.patience;
  j["plateau_threshold"] = s.threshold;
  j["min_lr"] = s.min_lr;
  j["restart_period"] = s.restart_period;
  j["train_partial"] = c.train_partial;
  j["validation"] = c.validation;
  j["test"] = c.test;
  j["seeds"] = c.seeds;
  j["scenarios"] = c.scenarios.empty() ? all_scenario_names() : c.scenarios;
  const DataPaths& d = c.data;
  const std::pair<const char*, const std::vector<fs::path>*> lists[] = {
      {"train_images", &d.train_images}, {"train_masks", &d.train_masks}, {"val_images", &d.val_images},
      {"val_masks", &d.val_masks},       {"test_images", &d.test_images}, {"test_masks", &d.test_masks}};
  for (const auto& [name, list] : lists) {
    if (!list->empty()) j[name] = path_strings(*list);
  }
  return j;
}

}  // namespace sparseg
