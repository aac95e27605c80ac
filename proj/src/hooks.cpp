#include "fedsim/hooks.hpp"

#include "fedsim/client_runtime_keys.hpp"
#include "fedsim/drift.hpp"
#include "fedsim/heterogeneity.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

TrainResult default_client_train(const ClientTrainContext& ctx) {
  LocalObjective objective;
  objective.loss = LossKind::cross_entropy;
  objective.proximal_mu = ctx.config->client.proximal_mu;
  if (objective.proximal_mu > 0) objective.anchor = *ctx.start_params;
  return local_train(*ctx.spec, *ctx.start_params, *ctx.x, *ctx.y, objective,
                     ctx.config->client.optimizer, ctx.config->client.local_epoch,
                     ctx.config->client.batch_size, ctx.seed);
}

EvalResult default_client_test(const ClientEvalContext& ctx) {
  return evaluate(*ctx.spec, *ctx.params, *ctx.x, *ctx.y);
}

UploadBody default_construct_upload(const UploadContext& ctx, const TrainResult& result,
                                    const ParameterSet& upload_params) {
  UploadBody body;
  body.client_id = static_cast<std::uint32_t>(ctx.client_id);
  body.num_samples = result.num_samples;
  body.train_loss = result.mean_loss;
  body.parameters = upload_params;
  body.metrics.push_back({0, ctx.round, "", "train_loss", result.mean_loss, ctx.train_seconds});
  body.metrics.push_back({0, ctx.round, "", "train_seconds", ctx.train_seconds, ctx.train_seconds});
  return body;
}

ParameterSet default_aggregate(ServerRoundContext& ctx, const std::vector<UploadEnvelope>& uploads) {
  return aggregate_round(*ctx.aggregator, *ctx.global, uploads, ctx.config->model.partial_blocks);
}

void default_on_round_start(ServerRoundContext&) {}

void default_post_aggregate(ServerRoundContext&) {}

WorkflowHooks default_hooks() {
  WorkflowHooks hooks;
  hooks.on_round_start = default_on_round_start;
  hooks.client_train = default_client_train;
  hooks.client_test = default_client_test;
  hooks.aggregate = default_aggregate;
  hooks.post_aggregate = default_post_aggregate;
  hooks.construct_upload = default_construct_upload;
  return hooks;
}

DriftResult detect_drift(const DriftState& state, const Eigen::VectorXd& current) {
  DriftResult result;
  result.divergence = js_divergence(state.reference, current);
  result.drifted = result.divergence > state.threshold;
  return result;
}

}  // namespace fedsim
