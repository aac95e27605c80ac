#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/hooks.hpp"
#include "fedsim/learner.hpp"
#include "fedsim/partition.hpp"

namespace fedsim {

// What a dataset component hands the engine. When the factory fixes the
// partitions itself (natural splits, planted populations), the engine skips
// split_type partitioning.
struct FederatedData {
  Dataset train;
  Dataset test;
  std::optional<Partition> train_partition;
  std::optional<Partition> test_partition;
};

using DatasetFactory = std::function<FederatedData(const TaskConfig&)>;
using ModelFactory = std::function<ModelSpec(const TaskConfig&, const Dataset& train)>;

// Client/server components are hook bundles registered under a name; a task
// referencing the name picks them up at start.
struct ClientComponent {
  std::function<TrainResult(const ClientTrainContext&)> train;
  std::function<EvalResult(const ClientEvalContext&)> test;
  std::function<UploadBody(const UploadContext&, const TrainResult&, const ParameterSet&)>
      construct_upload;
};

struct ServerComponent {
  std::function<void(ServerRoundContext&)> on_round_start;
  std::function<ParameterSet(ServerRoundContext&, const std::vector<UploadEnvelope>&)> aggregate;
  std::function<void(ServerRoundContext&)> post_aggregate;
};

// Named plugin registry. Built-ins: dataset "blobs", models "linear_softmax"
// and "mlp". Registering an already-taken name is an error; resolution
// failures surface at first use (task start).
class ComponentRegistry {
 public:
  ComponentRegistry();

  void register_dataset(const std::string& name, DatasetFactory factory);
  void register_model(const std::string& name, ModelFactory factory);
  void register_client(const std::string& name, ClientComponent component);
  void register_server(const std::string& name, ServerComponent component);

  FederatedData make_dataset(const TaskConfig& config) const;
  ModelSpec make_model(const TaskConfig& config, const Dataset& train) const;
  const ClientComponent& client_component(const std::string& name) const;
  const ServerComponent& server_component(const std::string& name) const;
  bool has_client_component(const std::string& name) const;

 private:
  std::map<std::string, DatasetFactory> datasets_;
  std::map<std::string, ModelFactory> models_;
  std::map<std::string, ClientComponent> clients_;
  std::map<std::string, ServerComponent> servers_;
};

}  // namespace fedsim
