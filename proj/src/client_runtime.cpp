#include "fedsim/client_runtime.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fedsim/heterogeneity.hpp"

namespace fedsim {
namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

Eigen::VectorXd normalized_histogram(const std::vector<int>& labels,
                                     const std::vector<std::int64_t>& rows, int n_classes) {
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(n_classes);
  for (std::int64_t row : rows) hist[labels[static_cast<std::size_t>(row)]] += 1.0;
  if (!rows.empty()) hist /= static_cast<double>(rows.size());
  return hist;
}

std::vector<int> labels_from_list(const std::vector<int>& values) { return values; }

}  // namespace

ClientRuntime::ClientRuntime(int client_id, std::shared_ptr<Endpoint> endpoint,
                             const ComponentRegistry* registry)
    : id_(client_id), endpoint_(std::move(endpoint)), registry_(registry) {}

void ClientRuntime::start(std::uint64_t task_id) {
  task_id_ = task_id;
  Message message;
  message.kind = MsgKind::Register;
  message.task_id = task_id;
  message.round_index = 0;
  message.body = encode_body(RegisterBody{static_cast<std::uint32_t>(id_), endpoint_->peer_address()});
  endpoint_->send(message);
}

bool ClientRuntime::pump_one() {
  if (stopped_) return false;
  auto message = endpoint_->recv(0.0);
  if (!message) return false;
  handle(*message);
  return true;
}

void ClientRuntime::run_loop() {
  while (!stopped_ && !endpoint_->closed()) {
    auto message = endpoint_->recv(3600.0);
    if (!message) {
      if (endpoint_->closed()) break;
      continue;
    }
    handle(*message);
  }
}

void ClientRuntime::handle(const Message& message) {
  switch (message.kind) {
    case MsgKind::Stop:
      stopped_ = true;
      return;
    case MsgKind::Plan: {
      if (message.round_index == 0) {
        handle_setup(message);
        return;
      }
      const PlanBody plan = decode_plan(message.body);
      const auto phase = dir_str(plan.directives, dirkey::kPhase).value_or("train");
      if (phase == "eval") {
        handle_eval_plan(message);
      } else {
        handle_train_plan(message);
      }
      return;
    }
    case MsgKind::ActGrads:
      handle_act_grads(message);
      return;
    default:
      throw std::runtime_error(std::string("client: unexpected message kind ") +
                               to_string(message.kind));
  }
}

void ClientRuntime::handle_setup(const Message& message) {
  const PlanBody plan = decode_plan(message.body);
  const auto config_text = dir_str(plan.directives, dirkey::kConfig);
  if (!config_text) throw std::runtime_error("client: setup plan missing config");
  config_ = parse_config(*config_text);

  const auto widths = dir_i32_list(plan.directives, dirkey::kModelWidths);
  const auto kind = dir_i64(plan.directives, dirkey::kModelKind);
  if (!widths || !kind) throw std::runtime_error("client: setup plan missing model layout");
  spec_.kind = *kind == 0 ? ModelKind::linear_softmax : ModelKind::mlp;
  spec_.layer_widths = *widths;
  spec_.n_classes = spec_.layer_widths.back();
  spec_.validate();

  const auto train_x = dir_matrix(plan.directives, dirkey::kTrainX);
  const auto train_y = dir_i32_list(plan.directives, dirkey::kTrainY);
  const auto test_x = dir_matrix(plan.directives, dirkey::kTestX);
  const auto test_y = dir_i32_list(plan.directives, dirkey::kTestY);
  if (!train_x || !train_y || !test_x || !test_y) {
    throw std::runtime_error("client: setup plan missing data slices");
  }
  train_x_ = *train_x;
  train_y_ = labels_from_list(*train_y);
  test_x_ = *test_x;
  test_y_ = labels_from_list(*test_y);

  if (plan.models.size() != 1) throw std::runtime_error("client: setup plan must carry the initial model");
  local_params_ = plan.models[0];
  check_params(spec_, local_params_);

  if (const auto component = dir_str(plan.directives, dirkey::kClientComponent)) {
    if (!hooks_.train && !hooks_.test && !hooks_.construct_upload) {
      if (!registry_) throw std::runtime_error("client: no registry to resolve component '" + *component + "'");
      hooks_ = registry_->client_component(*component);
    }
  }

  current_task_ = -1;
  replay_rows_.clear();
  active_rows_ = all_train_rows();
  ready_ = true;
}

std::vector<std::int64_t> ClientRuntime::all_train_rows() const {
  std::vector<std::int64_t> rows(static_cast<std::size_t>(train_x_.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::int64_t>(i);
  return rows;
}

FeatureMatrix ClientRuntime::gather(const std::vector<std::int64_t>& rows) const {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), train_x_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = train_x_.row(rows[i]);
  return out;
}

std::vector<int> ClientRuntime::gather_labels(const std::vector<std::int64_t>& rows) const {
  std::vector<int> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = train_y_[static_cast<std::size_t>(rows[i])];
  return out;
}

void ClientRuntime::apply_continual_directives(const DirectiveMap& directives, std::uint64_t) {
  const auto task_index = dir_i64(directives, dirkey::kTaskIndex);
  if (!task_index || *task_index == current_task_) return;

  const auto classes = dir_i32_list(directives, dirkey::kTaskClasses);
  if (!classes) throw std::runtime_error("client: continual plan missing task classes");

  std::vector<std::int64_t> next_active;
  for (std::int64_t row = 0; row < train_x_.rows(); ++row) {
    const int label = train_y_[static_cast<std::size_t>(row)];
    if (std::find(classes->begin(), classes->end(), label) != classes->end()) {
      next_active.push_back(row);
    }
  }

  if (current_task_ >= 0 && !active_rows_.empty() && !next_active.empty()) {
    const Eigen::VectorXd current = normalized_histogram(train_y_, next_active, spec_.n_classes);
    const DriftState state{drift_reference_, config_->drift.threshold};
    const DriftResult drift = detect_drift(state, current);
    if (drift.drifted) {
      Message notice;
      notice.kind = MsgKind::DriftNotice;
      notice.task_id = task_id_;
      notice.round_index = 0;
      notice.body = encode_body(DriftNoticeBody{static_cast<std::uint32_t>(id_), drift.divergence});
      endpoint_->send(notice);

      // Cache part of the outgoing task's data for replay.
      const double fraction = config_->continual.replay_fraction;
      if (fraction > 0.0) {
        const auto count = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(active_rows_.size())));
        Rng rng(derive_seed(config_->data.seed, salt::kReplay, static_cast<std::uint64_t>(id_),
                            static_cast<std::uint64_t>(*task_index)));
        replay_rows_ = rng.sample_without_replacement(active_rows_, count);
      }
    }
  }

  active_rows_ = std::move(next_active);
  drift_reference_ = normalized_histogram(train_y_, active_rows_, spec_.n_classes);
  current_task_ = *task_index;
}

ParameterSet ClientRuntime::merge_received(const ParameterSet& received) const {
  if (config_->model.exchange == ExchangeMode::full) return received;
  // Partial exchange: replace only the listed blocks in the persistent
  // local model.
  std::vector<ParameterBlock> merged;
  for (const auto& block : local_params_.blocks()) {
    if (received.has_block(block.name)) {
      merged.push_back(received.block(block.name));
    } else {
      merged.push_back(block);
    }
  }
  return ParameterSet(std::move(merged));
}

TrainResult ClientRuntime::run_training(const ParameterSet& start, const FeatureMatrix& x,
                                        const std::vector<int>& y, std::uint64_t round) {
  const std::uint64_t seed = derive_seed(config_->data.seed, salt::kTrain, round,
                                         static_cast<std::uint64_t>(id_));
  ClientTrainContext ctx;
  ctx.client_id = id_;
  ctx.round = static_cast<std::int64_t>(round);
  ctx.config = &*config_;
  ctx.spec = &spec_;
  ctx.start_params = &start;
  ctx.x = &x;
  ctx.y = &y;
  ctx.seed = seed;
  if (hooks_.train) return hooks_.train(ctx);
  return default_client_train(ctx);
}

void ClientRuntime::send_upload(std::uint64_t round, const TrainResult& result,
                                double train_seconds, std::optional<int> cluster_id) {
  UploadContext ctx;
  ctx.client_id = id_;
  ctx.round = static_cast<std::int64_t>(round);
  ctx.config = &*config_;
  ctx.train_seconds = train_seconds;

  ParameterSet upload_params = result.params;
  if (config_->model.exchange == ExchangeMode::partial) {
    upload_params = result.params.restricted_to(config_->model.partial_blocks);
  }
  UploadBody body = hooks_.construct_upload
                        ? hooks_.construct_upload(ctx, result, upload_params)
                        : default_construct_upload(ctx, result, upload_params);
  body.cluster_id = cluster_id;

  Message message;
  message.kind = MsgKind::Upload;
  message.task_id = task_id_;
  message.round_index = round;
  message.body = encode_body(body);
  endpoint_->send(message);
}

void ClientRuntime::handle_train_plan(const Message& message) {
  if (!ready_) throw std::runtime_error("client: train plan before setup");
  const PlanBody plan = decode_plan(message.body);
  const std::uint64_t round = message.round_index;
  const double started = now_seconds();

  apply_continual_directives(plan.directives, round);

  // Training rows for this round: the active task slice plus any replay
  // cache.
  std::vector<std::int64_t> rows = active_rows_;
  rows.insert(rows.end(), replay_rows_.begin(), replay_rows_.end());
  if (rows.empty()) return;  // nothing to train on; skip the round

  if (config_->workflow == WorkflowKind::split) {
    if (plan.models.size() != 1) throw std::runtime_error("client: split plan needs the front model");
    SplitProgress progress;
    progress.layout = split_layout(spec_, *config_->model.split_layer);
    progress.front = plan.models[0];
    check_params(progress.layout.front, progress.front);
    progress.optimizer = OptimizerState::init(config_->client.optimizer, progress.front);
    progress.rng = Rng(derive_seed(config_->data.seed, salt::kTrain, round,
                                   static_cast<std::uint64_t>(id_)));
    progress.rows = rows;
    progress.order = progress.rng.permutation(static_cast<std::int64_t>(rows.size()));
    progress.started_at = started;
    split_ = std::move(progress);
    split_send_next(round);
    return;
  }

  std::optional<int> cluster_id;
  ParameterSet start;
  if (config_->workflow == WorkflowKind::clustered) {
    if (plan.models.empty()) throw std::runtime_error("client: clustered plan without models");
    const FeatureMatrix x = gather(rows);
    const std::vector<int> y = gather_labels(rows);
    ClusterBook book;
    book.clusters = plan.models;
    std::vector<double> losses;
    for (const auto& model : plan.models) {
      losses.push_back(evaluate(spec_, model, x, y).mean_loss);
    }
    const int chosen = assign_cluster(book, losses);
    cluster_id = chosen;
    start = merge_received(plan.models[static_cast<std::size_t>(chosen)]);
  } else {
    if (plan.models.size() != 1) throw std::runtime_error("client: train plan needs one model");
    start = merge_received(plan.models[0]);
  }
  local_params_ = start;

  FeatureMatrix x;
  std::vector<int> y;
  if (config_->workflow == WorkflowKind::semi_server) {
    // Pseudo-label the unlabeled slice with the received model; train only
    // on confidently labeled samples.
    const double threshold = config_->semi.pseudo_label_threshold;
    const FeatureMatrix all_x = gather(rows);
    const FeatureMatrix logits = forward(spec_, start, all_x);
    std::vector<std::int64_t> confident;
    std::vector<int> pseudo;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      double zmax = logits(i, 0);
      int best = 0;
      for (Eigen::Index c = 1; c < logits.cols(); ++c) {
        if (logits(i, c) > zmax) {
          zmax = logits(i, c);
          best = static_cast<int>(c);
        }
      }
      double sum = 0.0;
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        sum += std::exp(static_cast<double>(logits(i, c)) - zmax);
      }
      const double confidence = 1.0 / sum;  // softmax probability of the argmax
      if (confidence >= threshold) {
        confident.push_back(i);
        pseudo.push_back(best);
      }
    }
    if (confident.empty()) return;  // no confident pseudo-labels: skip, upload nothing
    x.resize(static_cast<Eigen::Index>(confident.size()), all_x.cols());
    for (std::size_t i = 0; i < confident.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = all_x.row(confident[i]);
    }
    y = std::move(pseudo);
  } else {
    x = gather(rows);
    y = gather_labels(rows);
  }

  const TrainResult result = run_training(start, x, y, round);
  local_params_ = result.params;
  send_upload(round, result, now_seconds() - started, cluster_id);
}

void ClientRuntime::handle_eval_plan(const Message& message) {
  if (!ready_) throw std::runtime_error("client: eval plan before setup");
  const PlanBody plan = decode_plan(message.body);
  const std::uint64_t round = message.round_index;

  ParameterSet params;
  if (plan.models.size() > 1) {
    // Clustered evaluation: pick the best-fitting cluster on local training
    // data, then score its model.
    const FeatureMatrix x = gather(active_rows_.empty() ? all_train_rows() : active_rows_);
    const std::vector<int> y =
        gather_labels(active_rows_.empty() ? all_train_rows() : active_rows_);
    ClusterBook book;
    book.clusters = plan.models;
    std::vector<double> losses;
    for (const auto& model : plan.models) {
      losses.push_back(evaluate(spec_, model, x, y).mean_loss);
    }
    params = plan.models[static_cast<std::size_t>(assign_cluster(book, losses))];
  } else if (plan.models.size() == 1) {
    params = merge_received(plan.models[0]);
  } else {
    params = local_params_;
  }

  if (dir_i64(plan.directives, dirkey::kFinetune).value_or(0) == 1 && !active_rows_.empty()) {
    const FeatureMatrix x = gather(active_rows_);
    const std::vector<int> y = gather_labels(active_rows_);
    LocalObjective objective;
    objective.proximal_mu = config_->client.proximal_mu;
    if (objective.proximal_mu > 0) objective.anchor = params;
    params = local_train(spec_, params, x, y, objective, config_->client.optimizer,
                         config_->client.local_epoch, config_->client.batch_size,
                         derive_seed(config_->data.seed, salt::kFinetune,
                                     static_cast<std::uint64_t>(id_)))
                 .params;
  }

  EvalResult result;
  if (test_x_.rows() > 0) {
    ClientEvalContext ctx;
    ctx.client_id = id_;
    ctx.config = &*config_;
    ctx.spec = &spec_;
    ctx.params = &params;
    ctx.x = &test_x_;
    ctx.y = &test_y_;
    result = hooks_.test ? hooks_.test(ctx) : default_client_test(ctx);
  }

  Message reply;
  reply.kind = MsgKind::EvalResult;
  reply.task_id = task_id_;
  reply.round_index = round;
  reply.body = encode_body(EvalResultBody{static_cast<std::uint32_t>(id_), result.accuracy,
                                          result.mean_loss,
                                          static_cast<std::uint64_t>(test_x_.rows())});
  endpoint_->send(reply);
}

void ClientRuntime::split_send_next(std::uint64_t round) {
  auto& s = *split_;
  const std::size_t n = s.rows.size();
  const std::size_t batch = static_cast<std::size_t>(config_->client.batch_size);

  if (s.cursor >= n) {
    s.epoch_loss = s.loss_sum / static_cast<double>(n);
    s.loss_sum = 0.0;
    s.cursor = 0;
    ++s.epoch;
    if (s.epoch >= config_->client.local_epoch) {
      TrainResult result;
      result.params = s.front;
      result.num_samples = static_cast<std::int64_t>(n);
      result.mean_loss = s.epoch_loss;
      const double seconds = now_seconds() - s.started_at;
      split_.reset();
      send_upload(round, result, seconds, std::nullopt);
      return;
    }
    s.order = s.rng.permutation(static_cast<std::int64_t>(n));
  }

  const std::size_t end = std::min(n, s.cursor + batch);
  std::vector<std::int64_t> batch_rows;
  batch_rows.reserve(end - s.cursor);
  for (std::size_t i = s.cursor; i < end; ++i) batch_rows.push_back(s.rows[s.order[i]]);
  s.batch_rows = batch_rows.size();

  const FeatureMatrix xb = gather(batch_rows);
  s.trace = front_forward(s.layout.front, s.front, xb);

  ActivationsBody body;
  body.client_id = static_cast<std::uint32_t>(id_);
  body.activations = s.trace.cut_output();
  body.labels = gather_labels(batch_rows);

  Message message;
  message.kind = MsgKind::Activations;
  message.task_id = task_id_;
  message.round_index = round;
  message.body = encode_body(body);
  endpoint_->send(message);
}

void ClientRuntime::handle_act_grads(const Message& message) {
  if (!split_) throw std::runtime_error("client: ACT_GRADS without an active split round");
  const ActGradsBody body = decode_act_grads(message.body);
  auto& s = *split_;

  const ParameterSet front_grad = front_backward(s.layout.front, s.front, s.trace,
                                                 body.activation_grads);
  s.front = sgd_step(s.optimizer, s.front, front_grad);
  s.loss_sum += body.loss * static_cast<double>(s.batch_rows);
  s.cursor += s.batch_rows;
  split_send_next(message.round_index);
}

}  // namespace fedsim
