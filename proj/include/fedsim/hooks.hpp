#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedsim/aggregation.hpp"
#include "fedsim/config.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/message.hpp"
#include "fedsim/round_types.hpp"
#include "fedsim/tracker.hpp"

namespace fedsim {

struct ClientTrainContext {
  int client_id = 0;
  std::int64_t round = 0;
  const TaskConfig* config = nullptr;
  const ModelSpec* spec = nullptr;
  const ParameterSet* start_params = nullptr;
  const FeatureMatrix* x = nullptr;
  const std::vector<int>* y = nullptr;
  std::uint64_t seed = 0;
};

struct ClientEvalContext {
  int client_id = 0;
  const TaskConfig* config = nullptr;
  const ModelSpec* spec = nullptr;
  const ParameterSet* params = nullptr;
  const FeatureMatrix* x = nullptr;
  const std::vector<int>* y = nullptr;
};

struct UploadContext {
  int client_id = 0;
  std::int64_t round = 0;
  const TaskConfig* config = nullptr;
  double train_seconds = 0.0;
};

struct ServerRoundContext {
  std::uint64_t task_id = 0;
  std::int64_t round = 0;
  const TaskConfig* config = nullptr;
  const ModelSpec* spec = nullptr;
  ParameterSet* global = nullptr;
  AggregatorState* aggregator = nullptr;
  Tracker* tracker = nullptr;
  std::uint64_t run_seed = 0;
  // Server-held labeled data (semi-supervised workflow); null otherwise.
  const FeatureMatrix* server_x = nullptr;
  const std::vector<int>* server_y = nullptr;
};

// The workflow customization points. Unset hooks fall through to the
// running workflow's defaults, so an empty struct reproduces the stock
// behavior bit for bit.
struct WorkflowHooks {
  std::function<void(ServerRoundContext&)> on_round_start;
  std::function<TrainResult(const ClientTrainContext&)> client_train;
  std::function<EvalResult(const ClientEvalContext&)> client_test;
  std::function<ParameterSet(ServerRoundContext&, const std::vector<UploadEnvelope>&)> aggregate;
  std::function<void(ServerRoundContext&)> post_aggregate;
  std::function<UploadBody(const UploadContext&, const TrainResult&, const ParameterSet&)>
      construct_upload;
};

// The stock behaviors behind the hooks, exposed so callers can set hooks
// "explicitly to the defaults".
TrainResult default_client_train(const ClientTrainContext& ctx);
EvalResult default_client_test(const ClientEvalContext& ctx);
UploadBody default_construct_upload(const UploadContext& ctx, const TrainResult& result,
                                    const ParameterSet& upload_params);
ParameterSet default_aggregate(ServerRoundContext& ctx, const std::vector<UploadEnvelope>& uploads);
void default_on_round_start(ServerRoundContext& ctx);
void default_post_aggregate(ServerRoundContext& ctx);

WorkflowHooks default_hooks();

}  // namespace fedsim
