#include "fedsim/learner.hpp"

#include <cmath>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {
namespace {

using WeightMap = Eigen::Map<const FeatureMatrix>;

WeightMap weight(const ParameterSet& params, int layer, int in, int out) {
  return WeightMap(params.block(2 * static_cast<std::size_t>(layer)).values.data(), in, out);
}

Eigen::Map<const Eigen::VectorXf> bias(const ParameterSet& params, int layer, int out) {
  return Eigen::Map<const Eigen::VectorXf>(
      params.block(2 * static_cast<std::size_t>(layer) + 1).values.data(), out);
}

struct Trace {
  std::vector<FeatureMatrix> acts;  // acts[0] = input, acts[l] = output of layer l
};

// relu_after_last distinguishes a front half (true) from a full model or a
// back half (false).
Trace forward_core(const ModelSpec& spec, const ParameterSet& params,
                   const Eigen::Ref<const FeatureMatrix>& x, bool relu_after_last) {
  const int layers = spec.layer_count();
  Trace trace;
  trace.acts.reserve(layers + 1);
  trace.acts.emplace_back(x);
  for (int l = 0; l < layers; ++l) {
    const int in = spec.layer_widths[l];
    const int out = spec.layer_widths[l + 1];
    FeatureMatrix z = trace.acts.back() * weight(params, l, in, out);
    z.rowwise() += bias(params, l, out).transpose();
    if (l + 1 < layers || relu_after_last) z = z.cwiseMax(0.0f);
    trace.acts.push_back(std::move(z));
  }
  return trace;
}

struct BackwardCoreResult {
  std::vector<ParameterBlock> grad_blocks;
  FeatureMatrix input_grad;
};

BackwardCoreResult backward_core(const ModelSpec& spec, const ParameterSet& params,
                                 const Trace& trace, const FeatureMatrix& output_grad,
                                 bool relu_after_last, bool want_input_grad) {
  const int layers = spec.layer_count();
  BackwardCoreResult result;
  result.grad_blocks.resize(2 * static_cast<std::size_t>(layers));

  FeatureMatrix dz = output_grad;
  if (relu_after_last) {
    dz = dz.cwiseProduct((trace.acts[layers].array() > 0.0f).cast<float>().matrix());
  }
  for (int l = layers - 1; l >= 0; --l) {
    const int in = spec.layer_widths[l];
    const int out = spec.layer_widths[l + 1];
    FeatureMatrix dw = trace.acts[l].transpose() * dz;
    Eigen::VectorXf db = dz.colwise().sum();
    const auto& wb = params.block(2 * static_cast<std::size_t>(l));
    const auto& bb = params.block(2 * static_cast<std::size_t>(l) + 1);
    result.grad_blocks[2 * static_cast<std::size_t>(l)] = {
        wb.name, wb.shape, Eigen::Map<const Eigen::VectorXf>(dw.data(), dw.size())};
    result.grad_blocks[2 * static_cast<std::size_t>(l) + 1] = {bb.name, bb.shape, std::move(db)};
    if (l > 0 || want_input_grad) {
      FeatureMatrix da = dz * weight(params, l, in, out).transpose();
      if (l > 0) {
        dz = da.cwiseProduct((trace.acts[l].array() > 0.0f).cast<float>().matrix());
      } else {
        result.input_grad = std::move(da);
      }
    }
  }
  return result;
}

void check_labels(const std::vector<int>& y, int n_classes) {
  for (int label : y) {
    if (label < 0 || label >= n_classes) {
      throw std::invalid_argument("learner: label out of range");
    }
  }
}

// Mean loss over the batch (double accumulation) and its gradient at the
// logits.
double loss_and_dlogits(LossKind kind, const FeatureMatrix& logits, const std::vector<int>& y,
                        FeatureMatrix* dlogits) {
  const Eigen::Index batch = logits.rows();
  const Eigen::Index classes = logits.cols();
  check_labels(y, static_cast<int>(classes));
  dlogits->resize(batch, classes);

  double total = 0.0;
  if (kind == LossKind::cross_entropy) {
    for (Eigen::Index i = 0; i < batch; ++i) {
      const double zmax = logits.row(i).maxCoeff();
      double sum = 0.0;
      for (Eigen::Index c = 0; c < classes; ++c) {
        sum += std::exp(static_cast<double>(logits(i, c)) - zmax);
      }
      const double lse = std::log(sum) + zmax;
      total += lse - static_cast<double>(logits(i, y[static_cast<std::size_t>(i)]));
      for (Eigen::Index c = 0; c < classes; ++c) {
        const double p = std::exp(static_cast<double>(logits(i, c)) - lse);
        (*dlogits)(i, c) = static_cast<float>(p / static_cast<double>(batch));
      }
      (*dlogits)(i, y[static_cast<std::size_t>(i)]) -= 1.0f / static_cast<float>(batch);
    }
    return total / static_cast<double>(batch);
  }

  // MSE against one-hot targets, mean over batch * classes elements.
  const double scale = 1.0 / (static_cast<double>(batch) * static_cast<double>(classes));
  for (Eigen::Index i = 0; i < batch; ++i) {
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double target = y[static_cast<std::size_t>(i)] == static_cast<int>(c) ? 1.0 : 0.0;
      const double diff = static_cast<double>(logits(i, c)) - target;
      total += diff * diff * scale;
      (*dlogits)(i, c) = static_cast<float>(2.0 * diff * scale);
    }
  }
  return total;
}

// Adds mu/2 |w - anchor|^2 to the loss and mu (w - anchor) to the gradient,
// matching grad blocks to `params` blocks by name.
double add_proximal(const LocalObjective& objective, const ParameterSet& params,
                    std::vector<ParameterBlock>& grad_blocks) {
  if (objective.proximal_mu <= 0.0) return 0.0;
  if (!objective.anchor) {
    throw std::invalid_argument("learner: proximal_mu > 0 requires an anchor");
  }
  if (!congruent(*objective.anchor, params)) {
    throw std::invalid_argument("learner: proximal anchor not congruent with parameters");
  }
  const float mu = static_cast<float>(objective.proximal_mu);
  double penalty = 0.0;
  for (std::size_t b = 0; b < params.block_count(); ++b) {
    const Eigen::VectorXf diff = params.block(b).values - objective.anchor->block(b).values;
    penalty += 0.5 * objective.proximal_mu * static_cast<double>(diff.squaredNorm());
    grad_blocks[b].values += mu * diff;
  }
  return penalty;
}

FeatureMatrix gather_rows(const Eigen::Ref<const FeatureMatrix>& x,
                          const std::vector<std::int64_t>& order, std::size_t begin,
                          std::size_t end) {
  FeatureMatrix out(static_cast<Eigen::Index>(end - begin), x.cols());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = x.row(order[i]);
  }
  return out;
}

}  // namespace

ModelSpec ModelSpec::linear(int n_features, int n_classes) {
  ModelSpec spec{ModelKind::linear_softmax, {n_features, n_classes}, n_classes};
  spec.validate();
  return spec;
}

ModelSpec ModelSpec::mlp(int n_features, const std::vector<int>& hidden, int n_classes) {
  ModelSpec spec{ModelKind::mlp, {n_features}, n_classes};
  spec.layer_widths.insert(spec.layer_widths.end(), hidden.begin(), hidden.end());
  spec.layer_widths.push_back(n_classes);
  spec.validate();
  return spec;
}

ModelSpec ModelSpec::from_config(const TaskConfig& config, int n_features, int n_classes) {
  if (config.model.name == "linear_softmax") return linear(n_features, n_classes);
  if (config.model.name == "mlp") return mlp(n_features, config.model.hidden_layers, n_classes);
  throw std::invalid_argument("unknown built-in model '" + config.model.name + "'");
}

void ModelSpec::validate() const {
  if (layer_widths.size() < 2) throw std::invalid_argument("ModelSpec: need at least two widths");
  for (int w : layer_widths) {
    if (w < 1) throw std::invalid_argument("ModelSpec: widths must be positive");
  }
  if (kind == ModelKind::linear_softmax && layer_widths.size() != 2) {
    throw std::invalid_argument("ModelSpec: linear_softmax is exactly input -> classes");
  }
  if (kind == ModelKind::mlp && layer_widths.size() < 3) {
    throw std::invalid_argument("ModelSpec: mlp needs at least one hidden layer");
  }
  if (n_classes != layer_widths.back()) {
    throw std::invalid_argument("ModelSpec: n_classes must equal the final width");
  }
}

ParameterSet init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, 0x696e6974ULL));
  std::vector<ParameterBlock> blocks;
  for (int l = 0; l < spec.layer_count(); ++l) {
    const int in = spec.layer_widths[l];
    const int out = spec.layer_widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    ParameterBlock w;
    w.name = "l" + std::to_string(l) + ".w";
    w.shape = {in, out};
    w.values.resize(static_cast<Eigen::Index>(in) * out);
    for (Eigen::Index i = 0; i < w.values.size(); ++i) {
      w.values[i] = static_cast<float>(rng.uniform(-limit, limit));
    }
    blocks.push_back(std::move(w));
    ParameterBlock b;
    b.name = "l" + std::to_string(l) + ".b";
    b.shape = {out};
    b.values = Eigen::VectorXf::Zero(out);
    blocks.push_back(std::move(b));
  }
  return ParameterSet(std::move(blocks));
}

void check_params(const ModelSpec& spec, const ParameterSet& params) {
  const int layers = spec.layer_count();
  if (params.block_count() != 2 * static_cast<std::size_t>(layers)) {
    throw std::invalid_argument("learner: parameter block count does not match model");
  }
  for (int l = 0; l < layers; ++l) {
    const std::int64_t in = spec.layer_widths[l];
    const std::int64_t out = spec.layer_widths[l + 1];
    const auto& w = params.block(2 * static_cast<std::size_t>(l));
    const auto& b = params.block(2 * static_cast<std::size_t>(l) + 1);
    if (w.shape != std::vector<std::int64_t>{in, out} ||
        b.shape != std::vector<std::int64_t>{out}) {
      throw std::invalid_argument("learner: parameter shapes do not match model layer " +
                                  std::to_string(l));
    }
  }
}

FeatureMatrix forward(const ModelSpec& spec, const ParameterSet& params,
                      const Eigen::Ref<const FeatureMatrix>& x) {
  check_params(spec, params);
  if (x.cols() != spec.layer_widths.front()) {
    throw std::invalid_argument("learner: feature width does not match model input");
  }
  return forward_core(spec, params, x, false).acts.back();
}

LossGrad loss_and_grad(const LocalObjective& objective, const ModelSpec& spec,
                       const ParameterSet& params, const Eigen::Ref<const FeatureMatrix>& x,
                       const std::vector<int>& y) {
  if (x.rows() == 0) throw std::invalid_argument("loss_and_grad: empty batch");
  if (x.rows() != static_cast<Eigen::Index>(y.size())) {
    throw std::invalid_argument("loss_and_grad: feature/label count mismatch");
  }
  check_params(spec, params);

  const Trace trace = forward_core(spec, params, x, false);
  FeatureMatrix dlogits;
  double loss = loss_and_dlogits(objective.loss, trace.acts.back(), y, &dlogits);
  auto backward = backward_core(spec, params, trace, dlogits, false, false);
  loss += add_proximal(objective, params, backward.grad_blocks);
  return {loss, ParameterSet(std::move(backward.grad_blocks))};
}

OptimizerState OptimizerState::init(const OptimizerConfig& config, const ParameterSet& like) {
  OptimizerState state;
  state.lr = config.lr;
  state.momentum = config.momentum;
  state.weight_decay = config.weight_decay;
  std::vector<ParameterBlock> zeros;
  for (const auto& block : like.blocks()) {
    zeros.push_back({block.name, block.shape, Eigen::VectorXf::Zero(block.values.size())});
  }
  state.velocity = ParameterSet(std::move(zeros));
  return state;
}

ParameterSet sgd_step(OptimizerState& state, const ParameterSet& params, const ParameterSet& grad) {
  if (!congruent(params, grad) || !congruent(params, state.velocity)) {
    throw std::invalid_argument("sgd_step: incongruent parameters, gradient or velocity");
  }
  const float lr = static_cast<float>(state.lr);
  const float momentum = static_cast<float>(state.momentum);
  const float weight_decay = static_cast<float>(state.weight_decay);

  std::vector<ParameterBlock> next_params;
  std::vector<ParameterBlock> next_velocity;
  for (std::size_t b = 0; b < params.block_count(); ++b) {
    const auto& p = params.block(b);
    const Eigen::VectorXf g = grad.block(b).values + weight_decay * p.values;
    Eigen::VectorXf v = momentum * state.velocity.block(b).values + g;
    next_params.push_back({p.name, p.shape, p.values - lr * v});
    next_velocity.push_back({p.name, p.shape, std::move(v)});
  }
  state.velocity = ParameterSet(std::move(next_velocity));
  return ParameterSet(std::move(next_params));
}

TrainResult local_train(const ModelSpec& spec, const ParameterSet& params,
                        const Eigen::Ref<const FeatureMatrix>& x, const std::vector<int>& y,
                        const LocalObjective& objective, const OptimizerConfig& optimizer,
                        int local_epoch, int batch_size, std::uint64_t seed) {
  const std::int64_t n = x.rows();
  if (n == 0) throw std::invalid_argument("local_train: empty partition");
  if (batch_size < 1) throw std::invalid_argument("local_train: batch_size must be positive");

  if (local_epoch == 0) {
    const double loss = loss_and_grad(objective, spec, params, x, y).loss;
    return {params, n, loss};
  }

  Rng rng(seed);
  ParameterSet current = params;
  OptimizerState state = OptimizerState::init(optimizer, params);
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < local_epoch; ++epoch) {
    const auto order = rng.permutation(n);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(batch_size));
      const FeatureMatrix xb = gather_rows(x, order, begin, end);
      std::vector<int> yb(end - begin);
      for (std::size_t i = begin; i < end; ++i) yb[i - begin] = y[static_cast<std::size_t>(order[i])];
      const LossGrad lg = loss_and_grad(objective, spec, current, xb, yb);
      loss_sum += lg.loss * static_cast<double>(end - begin);
      current = sgd_step(state, current, lg.grad);
    }
    epoch_loss = loss_sum / static_cast<double>(n);
  }
  return {std::move(current), n, epoch_loss};
}

EvalResult evaluate(const ModelSpec& spec, const ParameterSet& params,
                    const Eigen::Ref<const FeatureMatrix>& x, const std::vector<int>& y,
                    LossKind loss) {
  const std::int64_t n = x.rows();
  if (n == 0) throw std::invalid_argument("evaluate: empty data");
  if (n != static_cast<std::int64_t>(y.size())) {
    throw std::invalid_argument("evaluate: feature/label count mismatch");
  }
  const FeatureMatrix logits = forward(spec, params, x);
  FeatureMatrix unused;
  const double mean_loss = loss_and_dlogits(loss, logits, y, &unused);

  std::int64_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = static_cast<int>(c);
    }
    if (best == y[static_cast<std::size_t>(i)]) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(n), mean_loss};
}

SplitLayout split_layout(const ModelSpec& spec, int split_layer) {
  spec.validate();
  if (split_layer < 1 || split_layer >= spec.layer_count()) {
    throw std::invalid_argument("split_layout: split_layer must be in [1, layer_count)");
  }
  SplitLayout layout;
  layout.front.layer_widths.assign(spec.layer_widths.begin(),
                                   spec.layer_widths.begin() + split_layer + 1);
  layout.front.kind = layout.front.layer_widths.size() > 2 ? ModelKind::mlp : ModelKind::linear_softmax;
  layout.front.n_classes = layout.front.layer_widths.back();
  layout.back.layer_widths.assign(spec.layer_widths.begin() + split_layer, spec.layer_widths.end());
  layout.back.kind = layout.back.layer_widths.size() > 2 ? ModelKind::mlp : ModelKind::linear_softmax;
  layout.back.n_classes = spec.n_classes;
  layout.cut_width = spec.layer_widths[split_layer];
  return layout;
}

std::pair<ParameterSet, ParameterSet> split_model(const ModelSpec& spec, const ParameterSet& params,
                                                  int split_layer) {
  check_params(spec, params);
  split_layout(spec, split_layer);  // validates the cut
  std::vector<ParameterBlock> front(params.blocks().begin(),
                                    params.blocks().begin() + 2 * split_layer);
  std::vector<ParameterBlock> back(params.blocks().begin() + 2 * split_layer,
                                   params.blocks().end());
  return {ParameterSet(std::move(front)), ParameterSet(std::move(back))};
}

ParameterSet join_model(const ParameterSet& front, const ParameterSet& back) {
  std::vector<ParameterBlock> blocks = front.blocks();
  blocks.insert(blocks.end(), back.blocks().begin(), back.blocks().end());
  return ParameterSet(std::move(blocks));
}

FrontTrace front_forward(const ModelSpec& front, const ParameterSet& front_params,
                         const Eigen::Ref<const FeatureMatrix>& x) {
  check_params(front, front_params);
  if (x.cols() != front.layer_widths.front()) {
    throw std::invalid_argument("front_forward: feature width does not match the cut stack");
  }
  FrontTrace trace;
  trace.activations = forward_core(front, front_params, x, true).acts;
  return trace;
}

BackResult back_forward_backward(const ModelSpec& back, const ParameterSet& back_params,
                                 const Eigen::Ref<const FeatureMatrix>& activations,
                                 const std::vector<int>& y, LossKind loss) {
  check_params(back, back_params);
  if (activations.cols() != back.layer_widths.front()) {
    throw std::invalid_argument("back_forward_backward: activation width does not match the cut");
  }
  const Trace trace = forward_core(back, back_params, activations, false);
  FeatureMatrix dlogits;
  BackResult result;
  result.loss = loss_and_dlogits(loss, trace.acts.back(), y, &dlogits);
  auto backward = backward_core(back, back_params, trace, dlogits, false, true);
  result.back_grad = ParameterSet(std::move(backward.grad_blocks));
  result.activation_grad = std::move(backward.input_grad);
  return result;
}

ParameterSet front_backward(const ModelSpec& front, const ParameterSet& front_params,
                            const FrontTrace& trace,
                            const Eigen::Ref<const FeatureMatrix>& activation_grad) {
  check_params(front, front_params);
  Trace core;
  core.acts = trace.activations;
  auto backward = backward_core(front, front_params, core, activation_grad, true, false);
  return ParameterSet(std::move(backward.grad_blocks));
}

SplitStep split_forward_backward(const ModelSpec& spec, int split_layer,
                                 const ParameterSet& front_params, const ParameterSet& back_params,
                                 const Eigen::Ref<const FeatureMatrix>& x, const std::vector<int>& y,
                                 const LocalObjective& objective) {
  const SplitLayout layout = split_layout(spec, split_layer);
  SplitStep step;

  FrontTrace trace = front_forward(layout.front, front_params, x);
  step.activation_bytes = static_cast<std::int64_t>(x.rows()) * layout.cut_width *
                          static_cast<std::int64_t>(sizeof(float));
  BackResult back = back_forward_backward(layout.back, back_params, trace.cut_output(), y,
                                          objective.loss);
  step.loss = back.loss;
  step.back_grad = std::move(back.back_grad);
  step.front_grad = front_backward(layout.front, front_params, trace, back.activation_grad);

  if (objective.proximal_mu > 0.0) {
    if (!objective.anchor) throw std::invalid_argument("split: proximal requires an anchor");
    auto [front_anchor, back_anchor] = split_model(spec, *objective.anchor, split_layer);
    LocalObjective front_obj{objective.loss, objective.proximal_mu, std::move(front_anchor)};
    LocalObjective back_obj{objective.loss, objective.proximal_mu, std::move(back_anchor)};
    // Reuse the shared proximal accumulation by patching each half's blocks.
    std::vector<ParameterBlock> fg = step.front_grad.blocks();
    std::vector<ParameterBlock> bg = step.back_grad.blocks();
    double penalty = 0.0;
    {
      const float mu = static_cast<float>(objective.proximal_mu);
      for (std::size_t b = 0; b < front_params.block_count(); ++b) {
        const Eigen::VectorXf diff =
            front_params.block(b).values - front_obj.anchor->block(b).values;
        penalty += 0.5 * objective.proximal_mu * static_cast<double>(diff.squaredNorm());
        fg[b].values += mu * diff;
      }
      for (std::size_t b = 0; b < back_params.block_count(); ++b) {
        const Eigen::VectorXf diff = back_params.block(b).values - back_obj.anchor->block(b).values;
        penalty += 0.5 * objective.proximal_mu * static_cast<double>(diff.squaredNorm());
        bg[b].values += mu * diff;
      }
    }
    step.loss += penalty;
    step.front_grad = ParameterSet(std::move(fg));
    step.back_grad = ParameterSet(std::move(bg));
  }
  return step;
}

}  // namespace fedsim
