#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/parameter_set.hpp"

namespace fedsim {

enum class ModelKind { linear_softmax, mlp };
enum class LossKind { cross_entropy, mse };

// Fully connected classifier stack. layer_widths runs input -> hidden... ->
// classes; every layer except the last is followed by a rectifier.
// Parameters are blocks "l<i>.w" [in, out] (row-major) and "l<i>.b" [out],
// in layer order.
struct ModelSpec {
  ModelKind kind = ModelKind::linear_softmax;
  std::vector<int> layer_widths;
  int n_classes = 0;

  static ModelSpec linear(int n_features, int n_classes);
  static ModelSpec mlp(int n_features, const std::vector<int>& hidden, int n_classes);
  static ModelSpec from_config(const TaskConfig& config, int n_features, int n_classes);

  int layer_count() const { return static_cast<int>(layer_widths.size()) - 1; }
  void validate() const;
};

// Glorot-uniform weights, zero biases.
ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed);

// Throws if the block layout does not match the spec.
void check_params(const ModelSpec& spec, const ParameterSet& params);

// Logits, batch x n_classes.
FeatureMatrix forward(const ModelSpec& spec, const ParameterSet& params,
                      const Eigen::Ref<const FeatureMatrix>& x);

struct LocalObjective {
  LossKind loss = LossKind::cross_entropy;
  double proximal_mu = 0.0;
  // Required (and congruent with the trained parameters) iff proximal_mu > 0.
  std::optional<ParameterSet> anchor;
};

struct LossGrad {
  double loss = 0.0;
  ParameterSet grad;
};

// Mean loss over the batch plus the proximal term mu/2 * |w - anchor|^2;
// gradient is congruent with params.
LossGrad loss_and_grad(const LocalObjective& objective, const ModelSpec& spec,
                       const ParameterSet& params, const Eigen::Ref<const FeatureMatrix>& x,
                       const std::vector<int>& y);

struct OptimizerState {
  double lr = 0.01;
  double momentum = 0.0;
  double weight_decay = 0.0;
  ParameterSet velocity;

  static OptimizerState init(const OptimizerConfig& config, const ParameterSet& like);
};

// g = grad + weight_decay * params; v = momentum * v + g; params - lr * v.
ParameterSet sgd_step(OptimizerState& state, const ParameterSet& params, const ParameterSet& grad);

struct TrainResult {
  ParameterSet params;
  std::int64_t num_samples = 0;
  double mean_loss = 0.0;
};

// local_epoch passes over seeded shuffled mini-batches (last partial batch
// kept); reports the final-epoch sample-mean loss. local_epoch == 0 returns
// the parameters untouched with a single evaluation-pass loss.
TrainResult local_train(const ModelSpec& spec, const ParameterSet& params,
                        const Eigen::Ref<const FeatureMatrix>& x, const std::vector<int>& y,
                        const LocalObjective& objective, const OptimizerConfig& optimizer,
                        int local_epoch, int batch_size, std::uint64_t seed);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// Argmax accuracy (ties resolve to the lowest class index) and mean loss.
EvalResult evaluate(const ModelSpec& spec, const ParameterSet& params,
                    const Eigen::Ref<const FeatureMatrix>& x, const std::vector<int>& y,
                    LossKind loss = LossKind::cross_entropy);

// --- split model -----------------------------------------------------------

struct SplitLayout {
  ModelSpec front;  // layers [0, split_layer), rectifier after every layer
  ModelSpec back;   // layers [split_layer, L), standard semantics
  int cut_width = 0;
};

// Valid for 1 <= split_layer < layer count.
SplitLayout split_layout(const ModelSpec& spec, int split_layer);

// Disjoint block subsets whose union is params; block names keep their
// full-model layer indices so the halves recombine exactly.
std::pair<ParameterSet, ParameterSet> split_model(const ModelSpec& spec, const ParameterSet& params,
                                                  int split_layer);
ParameterSet join_model(const ParameterSet& front, const ParameterSet& back);

// Client-side forward to the cut. The trace is needed for front_backward.
struct FrontTrace {
  std::vector<FeatureMatrix> activations;  // [0] = input ... [layers] = cut output
  const FeatureMatrix& cut_output() const { return activations.back(); }
};
FrontTrace front_forward(const ModelSpec& front, const ParameterSet& front_params,
                         const Eigen::Ref<const FeatureMatrix>& x);

// Server-side step: forward from the cut activations, loss, gradients for
// the back half and for the activations.
struct BackResult {
  double loss = 0.0;
  ParameterSet back_grad;
  FeatureMatrix activation_grad;
};
BackResult back_forward_backward(const ModelSpec& back, const ParameterSet& back_params,
                                 const Eigen::Ref<const FeatureMatrix>& activations,
                                 const std::vector<int>& y, LossKind loss);

// Client-side backward from the activation gradient.
ParameterSet front_backward(const ModelSpec& front, const ParameterSet& front_params,
                            const FrontTrace& trace,
                            const Eigen::Ref<const FeatureMatrix>& activation_grad);

struct SplitStep {
  double loss = 0.0;
  ParameterSet front_grad;
  ParameterSet back_grad;
  std::int64_t activation_bytes = 0;  // batch * cut_width * 4
};

// One full split-model pass; gradients equal the unsplit loss_and_grad.
// A proximal objective contributes per half against the matching anchor
// slice.
SplitStep split_forward_backward(const ModelSpec& spec, int split_layer,
                                 const ParameterSet& front_params, const ParameterSet& back_params,
                                 const Eigen::Ref<const FeatureMatrix>& x, const std::vector<int>& y,
                                 const LocalObjective& objective);

}  // namespace fedsim
