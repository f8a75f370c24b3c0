#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseg/phantom.hpp"
#include "sparseg/trainer.hpp"

namespace sparseg {

/// Image/mask file lists for training from disk (as written by `gen-data`).
struct DataPaths {
  std::vector<std::filesystem::path> train_images, train_masks;
  std::vector<std::filesystem::path> val_images, val_masks;
  std::vector<std::filesystem::path> test_images, test_masks;
};

/// Everything a config file can set. Keys are flat; see config_from_json.
struct ExperimentConfig {
  PhantomSpec phantom;
  TrainConfig train;
  std::size_t train_partial = 20;
  std::size_t validation = 6;
  std::size_t test = 20;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4};
  std::vector<std::string> scenarios;  ///< empty means all six
  std::filesystem::path out_dir = "out";
  DataPaths data;

  /// round(train_partial * percentage), so both arms delineate about the same number of slices.
  std::size_t train_full() const;
  void validate() const;
};

/// Throws std::invalid_argument on unknown keys or ill-typed values. Relative
/// paths are resolved against base_dir. A "dataset" key names a JSON file whose
/// image/mask lists are merged in.
ExperimentConfig config_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
/// Full echo of the effective configuration (paths excluded when empty).
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

}  // namespace sparseg
