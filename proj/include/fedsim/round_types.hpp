#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/metrics.hpp"
#include "fedsim/parameter_set.hpp"

namespace fedsim {

// Workflow-specific payload carried by a plan; values are opaque byte
// strings written and read through the directive helpers in message.hpp.
using DirectiveMap = std::map<std::string, std::vector<std::uint8_t>>;

struct RoundPlan {
  std::int64_t round_index = 0;
  std::vector<int> selected_client_ids;  // distinct
  // One entry normally; one per cluster for the clustered workflow; empty
  // for directive-only plans (setup, evaluation).
  std::vector<ParameterSet> global_parameters;
  DirectiveMap task_directives;
};

struct UploadEnvelope {
  int client_id = 0;
  std::int64_t round_index = 0;
  ParameterSet parameters;
  // Count of samples the client actually trained on this round.
  std::int64_t num_samples = 0;
  double train_loss = 0.0;
  std::vector<MetricRecord> metrics;
  std::optional<int> cluster_id;
};

}  // namespace fedsim
