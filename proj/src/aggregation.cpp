#include "fedsim/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedsim {
namespace {

std::vector<const UploadEnvelope*> sorted_by_client(const std::vector<UploadEnvelope>& uploads) {
  std::vector<const UploadEnvelope*> order;
  order.reserve(uploads.size());
  for (const auto& upload : uploads) order.push_back(&upload);
  std::sort(order.begin(), order.end(),
            [](const UploadEnvelope* a, const UploadEnvelope* b) { return a->client_id < b->client_id; });
  return order;
}

}  // namespace

ParameterSet fedavg(const std::vector<UploadEnvelope>& uploads) {
  if (uploads.empty()) throw std::invalid_argument("fedavg: no uploads");
  std::int64_t total = 0;
  for (const auto& upload : uploads) {
    if (upload.num_samples < 0) throw std::invalid_argument("fedavg: negative sample count");
    total += upload.num_samples;
  }
  if (total == 0) throw std::invalid_argument("fedavg: zero total samples");

  const auto order = sorted_by_client(uploads);
  std::vector<LinearTerm> terms;
  terms.reserve(order.size());
  for (const UploadEnvelope* upload : order) {
    terms.push_back({static_cast<double>(upload->num_samples) / static_cast<double>(total),
                     &upload->parameters});
  }
  return linear_combine(terms);
}

AggregatorState AggregatorState::make(const TaskConfig& config, const ParameterSet& global) {
  AggregatorState state;
  state.kind = config.server.aggregator;
  state.server_lr = config.server.server_lr;
  state.beta1 = config.server.beta1;
  state.beta2 = config.server.beta2;
  state.tau = config.server.tau;
  if (state.kind == AggregatorKind::fedyogi) {
    std::vector<ParameterBlock> zeros;
    std::vector<ParameterBlock> tau_sq;
    const float v0 = static_cast<float>(state.tau * state.tau);
    for (const auto& block : global.blocks()) {
      zeros.push_back({block.name, block.shape, Eigen::VectorXf::Zero(block.values.size())});
      tau_sq.push_back({block.name, block.shape,
                        Eigen::VectorXf::Constant(block.values.size(), v0)});
    }
    state.first_moment = ParameterSet(std::move(zeros));
    state.second_moment = ParameterSet(std::move(tau_sq));
  }
  return state;
}

std::pair<ParameterSet, AggregatorState> fedyogi_step(AggregatorState state,
                                                      const ParameterSet& global,
                                                      const std::vector<UploadEnvelope>& uploads) {
  const ParameterSet average = fedavg(uploads);
  if (!congruent(average, global)) throw std::invalid_argument("fedyogi: incongruent uploads");
  if (!congruent(state.first_moment, global) || !congruent(state.second_moment, global)) {
    throw std::invalid_argument("fedyogi: moments not congruent with global model");
  }

  std::vector<ParameterBlock> next_global;
  std::vector<ParameterBlock> next_m;
  std::vector<ParameterBlock> next_v;
  for (std::size_t b = 0; b < global.block_count(); ++b) {
    const auto& g = global.block(b);
    const Eigen::Index n = g.values.size();
    Eigen::VectorXf m_out(n);
    Eigen::VectorXf v_out(n);
    Eigen::VectorXf g_out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double delta = static_cast<double>(average.block(b).values[i]) -
                           static_cast<double>(g.values[i]);
      const double delta_sq = delta * delta;
      const double m = state.beta1 * static_cast<double>(state.first_moment.block(b).values[i]) +
                       (1.0 - state.beta1) * delta;
      const double v_prev = static_cast<double>(state.second_moment.block(b).values[i]);
      const double sign = v_prev > delta_sq ? 1.0 : (v_prev < delta_sq ? -1.0 : 0.0);
      const double v = v_prev - (1.0 - state.beta2) * delta_sq * sign;
      m_out[i] = static_cast<float>(m);
      v_out[i] = static_cast<float>(v);
      g_out[i] = static_cast<float>(static_cast<double>(g.values[i]) +
                                    state.server_lr * m / (std::sqrt(v) + state.tau));
    }
    next_global.push_back({g.name, g.shape, std::move(g_out)});
    next_m.push_back({g.name, g.shape, std::move(m_out)});
    next_v.push_back({g.name, g.shape, std::move(v_out)});
  }
  state.first_moment = ParameterSet(std::move(next_m));
  state.second_moment = ParameterSet(std::move(next_v));
  return {ParameterSet(std::move(next_global)), std::move(state)};
}

ParameterSet merge_partial(const ParameterSet& global, const std::vector<UploadEnvelope>& uploads,
                           const std::vector<std::string>& partial_blocks) {
  if (partial_blocks.empty()) throw std::invalid_argument("merge_partial: empty block list");
  for (const auto& upload : uploads) {
    if (upload.parameters.block_count() != partial_blocks.size()) {
      throw std::invalid_argument("merge_partial: upload does not carry exactly the listed blocks");
    }
    for (const auto& name : partial_blocks) {
      if (!upload.parameters.has_block(name)) {
        throw std::invalid_argument("merge_partial: upload missing block '" + name + "'");
      }
    }
  }
  const ParameterSet averaged = fedavg(uploads);

  std::vector<ParameterBlock> merged;
  for (const auto& block : global.blocks()) {
    const bool listed =
        std::find(partial_blocks.begin(), partial_blocks.end(), block.name) != partial_blocks.end();
    if (listed) {
      const auto& replacement = averaged.block(block.name);
      if (replacement.shape != block.shape) {
        throw std::invalid_argument("merge_partial: shape mismatch for block '" + block.name + "'");
      }
      merged.push_back(replacement);
    } else {
      merged.push_back(block);
    }
  }
  return ParameterSet(std::move(merged));
}

int assign_cluster(const ClusterBook& book, const std::vector<double>& losses) {
  if (losses.size() != book.clusters.size() || losses.empty()) {
    throw std::invalid_argument("assign_cluster: need one loss per cluster");
  }
  int best = 0;
  for (std::size_t k = 0; k < losses.size(); ++k) {
    if (!std::isfinite(losses[k])) throw std::invalid_argument("assign_cluster: non-finite loss");
    if (losses[k] < losses[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

ClusterBook aggregate_clusters(const ClusterBook& book,
                               const std::vector<UploadEnvelope>& uploads) {
  std::vector<std::vector<UploadEnvelope>> grouped(book.clusters.size());
  ClusterBook next = book;
  for (const auto& upload : uploads) {
    if (!upload.cluster_id || *upload.cluster_id < 0 ||
        *upload.cluster_id >= static_cast<int>(book.clusters.size())) {
      throw std::invalid_argument("aggregate_clusters: upload carries an invalid cluster id");
    }
    grouped[static_cast<std::size_t>(*upload.cluster_id)].push_back(upload);
    next.assignment[upload.client_id] = *upload.cluster_id;
  }
  for (std::size_t k = 0; k < grouped.size(); ++k) {
    if (!grouped[k].empty()) next.clusters[k] = fedavg(grouped[k]);
  }
  return next;
}

ParameterSet aggregate_round(AggregatorState& state, const ParameterSet& global,
                             const std::vector<UploadEnvelope>& uploads,
                             const std::vector<std::string>& partial_blocks) {
  if (!partial_blocks.empty()) return merge_partial(global, uploads, partial_blocks);
  if (state.kind == AggregatorKind::fedyogi) {
    auto [next, next_state] = fedyogi_step(std::move(state), global, uploads);
    state = std::move(next_state);
    return next;
  }
  return fedavg(uploads);
}

}  // namespace fedsim
