#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"

namespace fedsim {

struct ClientPartition {
  int client_id = 0;
  std::vector<std::int64_t> sample_indices;  // strictly increasing
  std::vector<std::int64_t> label_histogram;
  std::vector<std::vector<std::int64_t>> attribute_histograms;  // [attribute][category]
};

struct PartitionSpec {
  SplitType split_type = SplitType::iid;
  int num_clients = 1;
  double alpha = 0.5;
  int shards_per_client = 2;
  std::string main_attribute;  // empty: group by label
  std::uint64_t seed = 0;

  static PartitionSpec from_config(const TaskConfig& config) {
    return {config.data.split_type,      config.data.num_of_clients, config.data.alpha,
            config.data.shards_per_client, config.data.main_attribute, config.data.seed};
  }
};

struct Partition {
  PartitionSpec spec;
  std::vector<ClientPartition> clients;
  // Times the empty-client repair rule fired (Dirichlet splits only).
  int empty_client_repairs = 0;
};

// Seeded permutation cut into near-equal contiguous chunks; sizes differ by
// at most one, earlier clients take the remainder.
Partition partition_iid(const Dataset& d, const PartitionSpec& spec);

// Per group (label, or main-attribute category when named), proportions are
// drawn from Dir(alpha) over clients and converted to counts by largest
// remainder. Empty clients trigger up to 100 redraws, then one sample moves
// from the largest client per empty one.
Partition partition_dirichlet(const Dataset& d, const PartitionSpec& spec);

// Label-sorted samples cut into num_clients * shards_per_client equal
// shards, dealt shards_per_client to each client. Requires the sample count
// to divide evenly. With class counts that are multiples of the shard size
// each client sees at most shards_per_client distinct classes.
Partition partition_shard(const Dataset& d, const PartitionSpec& spec);

// Two-stage hierarchical Dirichlet allocation: stage one Dir(alpha) over
// clients per main-attribute category; stage two, inside every (client,
// category) cell, Dir over the joint categories of the two remaining
// attributes with per-category concentration alpha * prior / mean-prior.
// Requests are clamped to availability; leftovers are dealt back so every
// sample is assigned exactly once.
Partition partition_hdir(const Dataset& d, const PartitionSpec& spec);

// Dispatch on spec.split_type.
Partition make_partition(const Dataset& d, const PartitionSpec& spec);

// Text mapping file: spec header, then one line per client with its index
// list and histograms. Byte-deterministic.
std::string render_partition(const Partition& partition);
void save_partition(const std::string& path, const Partition& partition);

}  // namespace fedsim
