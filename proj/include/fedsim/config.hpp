#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsim {

enum class SplitType { iid, dir, shard, hdir };
enum class AggregatorKind { fedavg, fedyogi };
enum class ExchangeMode { full, partial };
enum class WorkflowKind { standard, semi_server, continual, split, clustered };
enum class TestMode { test_in_client, test_in_server };
enum class OptimizerType { sgd };

std::string to_string(SplitType v);
std::string to_string(AggregatorKind v);
std::string to_string(ExchangeMode v);
std::string to_string(WorkflowKind v);
std::string to_string(TestMode v);
std::string to_string(OptimizerType v);

struct DataConfig {
  std::string dataset = "blobs";
  SplitType split_type = SplitType::iid;
  int num_of_clients = 10;
  double alpha = 0.5;
  int shards_per_client = 2;
  // Grouping key for the dir split and stage one of hdir. Empty means group
  // by label; otherwise names an attribute.
  std::string main_attribute;
  std::uint64_t seed = 0;
  // Synthetic generator sizing.
  int classes = 2;
  int samples_per_class = 100;
  int features = 2;
  int domains = 1;

  bool operator==(const DataConfig&) const = default;
};

struct OptimizerConfig {
  OptimizerType type = OptimizerType::sgd;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;

  bool operator==(const OptimizerConfig&) const = default;
};

struct ClientConfig {
  int local_epoch = 5;
  int batch_size = 32;
  OptimizerConfig optimizer;
  double proximal_mu = 0.0;

  bool operator==(const ClientConfig&) const = default;
};

struct ServerConfig {
  int rounds = 10;
  // Unset means every client participates each round.
  std::optional<int> clients_per_round;
  AggregatorKind aggregator = AggregatorKind::fedavg;
  int test_every = 1;
  // FedYogi server optimizer.
  double server_lr = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
  // Seconds a round waits for uploads; 0 means unlimited.
  double round_deadline = 0.0;

  bool operator==(const ServerConfig&) const = default;
};

struct ModelConfig {
  std::string name = "linear_softmax";
  ExchangeMode exchange = ExchangeMode::full;
  std::vector<std::string> partial_blocks;
  std::optional<int> split_layer;
  std::vector<int> hidden_layers{32};

  bool operator==(const ModelConfig&) const = default;
};

struct SemiConfig {
  double pseudo_label_threshold = 0.95;
  int warmup_rounds = 5;
  int server_labels_per_class = 10;
  int finetune_epochs = 1;

  bool operator==(const SemiConfig&) const = default;
};

struct ContinualConfig {
  int num_tasks = 2;
  // 0 means use server.rounds for every task.
  int rounds_per_task = 0;
  double replay_fraction = 0.0;

  bool operator==(const ContinualConfig&) const = default;
};

struct DriftConfig {
  double threshold = 0.2;

  bool operator==(const DriftConfig&) const = default;
};

struct ClusteredConfig {
  // Fine-tune each client's model locally before the final evaluation.
  bool finetune_eval = false;

  bool operator==(const ClusteredConfig&) const = default;
};

struct TaskConfig {
  DataConfig data;
  ServerConfig server;
  ClientConfig client;
  ModelConfig model;
  SemiConfig semi;
  ContinualConfig continual;
  DriftConfig drift;
  ClusteredConfig clustered;
  WorkflowKind workflow = WorkflowKind::standard;
  int num_clusters = 1;
  TestMode test_mode = TestMode::test_in_client;

  int clients_per_round() const {
    return server.clients_per_round.value_or(data.num_of_clients);
  }

  bool operator==(const TaskConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { syntax, semantic };

  ConfigError(Kind kind, std::string message, int line = 0, int column = 0)
      : std::runtime_error(std::move(message)), kind(kind), line(line), column(column) {}

  Kind kind;
  int line;
  int column;
};

// Parses the key/value config document (grammar in the README). Unknown
// keys and sections are semantic errors; missing keys take the documented
// defaults. The returned config has passed validate_config.
TaskConfig parse_config(std::string_view source);

// Canonical full rendering; parse(serialize_config(c)) == c.
std::string serialize_config(const TaskConfig& config);

// Throws ConfigError{semantic} naming the violated invariant.
void validate_config(const TaskConfig& config);

}  // namespace fedsim
