#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/parameter_set.hpp"
#include "fedsim/round_types.hpp"

namespace fedsim {

// Sample-count weighted average of the uploaded parameters. Uploads are
// summed in client_id order so arrival order never changes the result.
ParameterSet fedavg(const std::vector<UploadEnvelope>& uploads);

struct AggregatorState {
  AggregatorKind kind = AggregatorKind::fedavg;
  double server_lr = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
  ParameterSet first_moment;
  ParameterSet second_moment;  // strictly positive element-wise

  static AggregatorState make(const TaskConfig& config, const ParameterSet& global);
};

// Adaptive server step on the pseudo-gradient delta = fedavg(uploads) -
// global:
//   m <- b1 m + (1-b1) delta
//   v <- v - (1-b2) delta^2 (.) sign(v - delta^2)
//   global' = global + lr * m / (sqrt(v) + tau)
// Moments start at m = 0, v = tau^2.
std::pair<ParameterSet, AggregatorState> fedyogi_step(AggregatorState state,
                                                      const ParameterSet& global,
                                                      const std::vector<UploadEnvelope>& uploads);

// fedavg over exactly the listed blocks; every other block of `global` is
// carried over untouched. Uploads must contain exactly partial_blocks.
ParameterSet merge_partial(const ParameterSet& global, const std::vector<UploadEnvelope>& uploads,
                           const std::vector<std::string>& partial_blocks);

// One model per cluster plus the latest client -> cluster assignment.
struct ClusterBook {
  std::vector<ParameterSet> clusters;
  std::map<int, int> assignment;
};

// Index of the smallest loss; ties resolve to the lowest cluster id.
int assign_cluster(const ClusterBook& book, const std::vector<double>& losses);

// Per-cluster fedavg; clusters without uploads keep their parameters.
ClusterBook aggregate_clusters(const ClusterBook& book,
                               const std::vector<UploadEnvelope>& uploads);

// Single round step shared by the standard-shaped workflows: fedavg or
// fedyogi per the aggregator state, honoring partial exchange.
ParameterSet aggregate_round(AggregatorState& state, const ParameterSet& global,
                             const std::vector<UploadEnvelope>& uploads,
                             const std::vector<std::string>& partial_blocks);

}  // namespace fedsim
