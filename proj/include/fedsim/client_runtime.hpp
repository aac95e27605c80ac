#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/client_runtime_keys.hpp"
#include "fedsim/config.hpp"
#include "fedsim/hooks.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/registry.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/transport.hpp"

namespace fedsim {

// The client executor. Fully message-driven: everything it knows (config,
// data slices, model, round directives) arrives through its endpoint, so the
// same code runs in-process and in a remote join process. State persists for
// the task: local parameters (partial exchange), replay cache and drift
// reference (continual), optimizer/batch progress mid-conversation (split).
class ClientRuntime {
 public:
  ClientRuntime(int client_id, std::shared_ptr<Endpoint> endpoint,
                const ComponentRegistry* registry = nullptr);

  // Sends REGISTER.
  void start(std::uint64_t task_id);

  // Handles one pending message, if any. Driven by the in-process server.
  bool pump_one();

  // Blocking loop for remote mode; returns when STOP arrives or the
  // connection drops.
  void run_loop();

  bool stopped() const { return stopped_; }
  int client_id() const { return id_; }

  // Direct hook injection for in-process runs (overrides any registered
  // component named in the setup directives).
  void set_hooks(ClientComponent hooks) { hooks_ = std::move(hooks); }

 private:
  void handle(const Message& message);
  void handle_setup(const Message& message);
  void handle_train_plan(const Message& message);
  void handle_eval_plan(const Message& message);
  void handle_act_grads(const Message& message);

  void apply_continual_directives(const DirectiveMap& directives, std::uint64_t round);
  ParameterSet merge_received(const ParameterSet& received) const;
  TrainResult run_training(const ParameterSet& start, const FeatureMatrix& x,
                           const std::vector<int>& y, std::uint64_t round);
  void send_upload(std::uint64_t round, const TrainResult& result, double train_seconds,
                   std::optional<int> cluster_id);
  void split_send_next(std::uint64_t round);

  FeatureMatrix gather(const std::vector<std::int64_t>& rows) const;
  std::vector<int> gather_labels(const std::vector<std::int64_t>& rows) const;
  std::vector<std::int64_t> all_train_rows() const;

  int id_;
  std::shared_ptr<Endpoint> endpoint_;
  const ComponentRegistry* registry_;
  std::uint64_t task_id_ = 0;
  bool stopped_ = false;

  // Materialized by the setup plan.
  std::optional<TaskConfig> config_;
  ModelSpec spec_;
  bool ready_ = false;
  FeatureMatrix train_x_;
  std::vector<int> train_y_;
  FeatureMatrix test_x_;
  std::vector<int> test_y_;
  ParameterSet local_params_;
  ClientComponent hooks_;

  // Continual state.
  std::int64_t current_task_ = -1;
  std::vector<std::int64_t> active_rows_;
  std::vector<std::int64_t> replay_rows_;
  Eigen::VectorXd drift_reference_;

  // Split conversation state.
  struct SplitProgress {
    SplitLayout layout;
    ParameterSet front;
    OptimizerState optimizer;
    Rng rng{0};
    std::vector<std::int64_t> rows;   // training rows, fixed for the round
    std::vector<std::int64_t> order;  // current epoch permutation of rows
    std::size_t cursor = 0;
    int epoch = 0;
    FrontTrace trace;                 // outstanding batch
    std::size_t batch_rows = 0;
    double loss_sum = 0.0;
    double epoch_loss = 0.0;
    double started_at = 0.0;
  };
  std::optional<SplitProgress> split_;
};

}  // namespace fedsim
