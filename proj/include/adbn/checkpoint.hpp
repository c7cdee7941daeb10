#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adbn/config.hpp"
#include "adbn/dbn.hpp"

namespace adbn {

inline constexpr int kCheckpointVersion = 1;

/// Self-contained training artifact: resolved config, full model (layers,
/// head, override table), structural history, and final metrics. Reload
/// never needs the original dataset.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::string status = "ok";  // "ok" | "aborted-numeric"
  RunConfig config;
  DbnModel model;
  std::vector<StructuralEvent> events;
  nlohmann::json final_metrics;  // accuracies, misclassified counts, layer sizes
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adbn
