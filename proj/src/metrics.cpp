#include "adbn/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "adbn/fsutil.hpp"

namespace adbn {

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

const char* MetricsLog::csv_header() {
  return "row_type,epoch,layer,reconstruction_error,mean_energy,wd_total,hidden_count,event,detail";
}

void MetricsLog::add_epoch(int epoch, int layer, double reconstruction_error, double mean_energy,
                           double wd_total, int hidden_count) {
  MetricsRow row;
  row.row_type = "epoch";
  row.epoch = epoch;
  row.layer = layer;
  row.reconstruction_error = reconstruction_error;
  row.mean_energy = mean_energy;
  row.wd_total = wd_total;
  row.hidden_count = hidden_count;
  rows_.push_back(std::move(row));
}

void MetricsLog::add_event(const StructuralEvent& event) {
  MetricsRow row;
  row.row_type = "event";
  row.epoch = event.epoch;
  row.layer = event.layer;
  row.event = StructuralEvent::kind_name(event.kind);
  row.detail = std::to_string(event.detail);
  rows_.push_back(std::move(row));
}

std::size_t MetricsLog::epoch_row_count() const {
  std::size_t count = 0;
  for (const auto& row : rows_) {
    if (row.row_type == "epoch") ++count;
  }
  return count;
}

std::string MetricsLog::to_csv() const {
  std::ostringstream out;
  out << csv_header() << "\n";
  for (const auto& row : rows_) {
    out << row.row_type << "," << row.epoch << "," << row.layer << ",";
    if (row.row_type == "epoch") {
      out << format_double(row.reconstruction_error) << "," << format_double(row.mean_energy)
          << "," << format_double(row.wd_total) << "," << row.hidden_count << ",,";
    } else {
      out << ",,,," << row.event << "," << row.detail;
    }
    out << "\n";
  }
  return out.str();
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  write_file_atomic(path, to_csv());
}

}  // namespace adbn
