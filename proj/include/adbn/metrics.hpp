#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "adbn/structure.hpp"

namespace adbn {

/// One CSV row: either the per-epoch statistics of a layer or a structural
/// event. Schema v1, fixed column order; numeric cells are empty on event
/// rows and the event/detail cells are empty on epoch rows.
struct MetricsRow {
  std::string row_type;  // "epoch" | "event"
  int epoch = 0;
  int layer = 0;
  double reconstruction_error = 0.0;
  double mean_energy = 0.0;
  double wd_total = 0.0;
  int hidden_count = 0;
  std::string event;
  std::string detail;
};

class MetricsLog {
 public:
  static const char* csv_header();

  void add_epoch(int epoch, int layer, double reconstruction_error, double mean_energy,
                 double wd_total, int hidden_count);
  void add_event(const StructuralEvent& event);

  const std::vector<MetricsRow>& rows() const { return rows_; }
  std::size_t epoch_row_count() const;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<MetricsRow> rows_;
};

/// Shortest-round-trip decimal formatting shared by the CSV writers.
std::string format_double(double value);

}  // namespace adbn
