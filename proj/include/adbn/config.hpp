#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "adbn/dataset.hpp"
#include "adbn/dbn.hpp"
#include "adbn/structure.hpp"

namespace adbn {

/// Dataset source: either an on-disk tree or the synthetic generator.
struct DataConfig {
  std::string type = "synthetic";  // "synthetic" | "sdnet"
  // synthetic
  int n = 1200;
  double crack_fraction = 0.5;
  double test_fraction = 0.2;
  // sdnet
  std::string root;
  std::optional<Structure> subset;
  SdnetNaming naming;
};

struct TrainingConfig {
  int epochs_per_layer = 100;
  int batch_size = 64;
  double learning_rate = 0.05;
  int cd_k = 1;
  double momentum = 0.0;
  double weight_decay = 0.0;
  int initial_hidden = 8;
  double init_sigma = 0.01;
  bool data_mean_visible_bias = true;
  int head_epochs = 200;
  double head_learning_rate = 0.1;
  bool fine_tune = true;
  bool adaptive = true;
};

/// Fully-resolved run configuration; every field has a default and the
/// resolved document is echoed next to the run outputs.
struct RunConfig {
  std::string task = "binary";  // binary | deck | wall | pavement | combined
  std::uint64_t seed = 1;
  std::string output_dir = "run";
  DataConfig data;
  PreprocessDescriptor preprocess;
  StructureConfig structure;
  TrainingConfig training;

  TaskShape task_shape() const;
  std::optional<Structure> task_subset() const;

  void validate() const;

  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  DbnTrainOptions trainer_options() const;
};

}  // namespace adbn
