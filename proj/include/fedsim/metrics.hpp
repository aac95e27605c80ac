#pragma once

#include <cstdint>
#include <string>

namespace fedsim {

// One tracked measurement. Scope is "server", "client:<id>" or
// "cluster:<id>". wall_time is seconds since the tracker epoch and is the
// only field excluded from determinism comparisons (together with metrics
// named *_seconds, which carry wall-clock durations as values).
struct MetricRecord {
  std::uint64_t task_id = 0;
  std::int64_t round_index = 0;
  std::string scope;
  std::string name;
  double value = 0.0;
  double wall_time = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

}  // namespace fedsim
