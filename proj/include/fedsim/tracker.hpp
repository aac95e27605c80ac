#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fedsim/metrics.hpp"

namespace fedsim {

struct MetricStats {
  double best = 0.0;
  std::int64_t best_round = 0;
  double final_value = 0.0;
  std::int64_t final_round = 0;
  std::int64_t count = 0;
};

struct RunSummary {
  // Keyed by (scope, name). "Best" is the maximum, except for names
  // containing "loss" where lower is better.
  std::map<std::pair<std::string, std::string>, MetricStats> metrics;
  std::uint64_t total_bytes = 0;  // sum of comm_bytes_* values
  double wall_span_seconds = 0.0;
  std::int64_t record_count = 0;
};

// Collects metric records from server and clients, appends them durably in
// arrival order, and summarizes runs. record() accepts concurrent calls.
class Tracker {
 public:
  Tracker() = default;
  explicit Tracker(const std::string& path) { open_file(path); }

  // Streams subsequent records to `path` (truncates), one line each.
  void open_file(const std::string& path);

  void record(MetricRecord record);

  std::vector<MetricRecord> records(std::uint64_t task_id) const;
  RunSummary summarize(std::uint64_t task_id) const;

  // Canonical re-export of one task's stream; equals the live file byte for
  // byte when the tracker holds a single task.
  void export_to(std::uint64_t task_id, const std::string& path) const;

  static std::vector<MetricRecord> import_file(const std::string& path);
  static RunSummary summarize_records(const std::vector<MetricRecord>& records);
  static std::string render_record(const MetricRecord& record);

  // Seconds since this tracker was constructed; the wall_time stamp.
  double clock_seconds() const;

 private:
  mutable std::mutex mutex_;
  std::vector<MetricRecord> records_;
  std::string path_;
  mutable double epoch_ = 0.0;
};

}  // namespace fedsim
