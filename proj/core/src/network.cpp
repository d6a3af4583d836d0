#include "ivt/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "ivt/rng.hpp"

namespace ivt {
namespace {

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    throw PreconditionError("network dimensions overflow the parameter index space");
  }
  return a * b;
}

std::string weight_name(std::size_t layer) { return "hidden" + std::to_string(layer) + ".weight"; }
std::string bias_name(std::size_t layer) { return "hidden" + std::to_string(layer) + ".bias"; }

std::size_t hidden_layer_count(const ParamLayout& layout) {
  std::size_t n = 0;
  while (layout.find(weight_name(n)) != nullptr) ++n;
  return n;
}

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::relu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

// d(act)/dz expressed through the post-activation value.
Eigen::MatrixXd activation_derivative(Activation act, const Eigen::MatrixXd& post) {
  if (act == Activation::relu) {
    return (post.array() > 0.0).cast<double>().matrix();
  }
  return (1.0 - post.array().square()).matrix();
}

struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;  // input, then each hidden output
  Eigen::MatrixXd logits;
};

ForwardTrace run_forward(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  const ParamLayout& layout = params.layout();
  if (static_cast<std::size_t>(inputs.cols()) != input_dim(layout)) {
    throw ShapeError("forward: input width " + std::to_string(inputs.cols()) +
                     " != network input_dim " + std::to_string(input_dim(layout)));
  }
  ForwardTrace trace;
  trace.activations.emplace_back(inputs);
  const std::size_t layers = hidden_layer_count(layout);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto w = params.matrix(weight_name(l));
    const auto b = params.matrix(bias_name(l));
    Eigen::MatrixXd z = trace.activations.back() * w.transpose();
    z.rowwise() += b.col(0).transpose();
    apply_activation(layout.activation(), z);
    trace.activations.push_back(std::move(z));
  }
  const auto hw = params.matrix("head.weight");
  const auto hb = params.matrix("head.bias");
  trace.logits = trace.activations.back() * hw.transpose();
  trace.logits.rowwise() += hb.col(0).transpose();
  return trace;
}

std::vector<std::size_t> active_columns(const ParamLayout& layout, const ClassMask& mask) {
  std::vector<std::size_t> cols;
  if (!mask) {
    cols.resize(layout.num_classes());
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
    return cols;
  }
  std::set<int> seen;
  for (const int cls : *mask) {
    if (!seen.insert(cls).second) continue;
    cols.push_back(layout.column_of(cls));
  }
  std::sort(cols.begin(), cols.end());
  if (cols.empty()) throw PreconditionError("class mask is empty");
  return cols;
}

std::vector<std::size_t> label_columns(const ParamLayout& layout, std::span<const int> labels,
                                       const ClassMask& mask) {
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (!layout.has_class(y)) {
      throw PreconditionError("label " + std::to_string(y) + " has no head column");
    }
    if (mask && std::find(mask->begin(), mask->end(), y) == mask->end()) {
      throw PreconditionError("label " + std::to_string(y) + " is outside the class mask");
    }
    out[i] = layout.column_of(y);
  }
  return out;
}

void check_batch(const Eigen::Ref<const Eigen::MatrixXd>& inputs, std::span<const int> labels) {
  if (labels.empty()) throw PreconditionError("empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw ShapeError("batch has " + std::to_string(inputs.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
}

// Fills `dlogits` with d(mean loss)/d(logits) when requested; returns mean loss.
double softmax_cross_entropy(const Eigen::MatrixXd& logits, const std::vector<std::size_t>& active,
                             const std::vector<std::size_t>& targets, Eigen::MatrixXd* dlogits) {
  const auto n = logits.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (dlogits != nullptr) dlogits->setZero(logits.rows(), logits.cols());
  double total = 0.0;
  std::vector<double> expz(active.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (const std::size_t c : active) peak = std::max(peak, logits(i, static_cast<Eigen::Index>(c)));
    double sum = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      expz[k] = std::exp(logits(i, static_cast<Eigen::Index>(active[k])) - peak);
      sum += expz[k];
    }
    const auto y = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(i)]);
    total += std::log(sum) - (logits(i, y) - peak);
    if (dlogits != nullptr) {
      for (std::size_t k = 0; k < active.size(); ++k) {
        (*dlogits)(i, static_cast<Eigen::Index>(active[k])) = expz[k] / sum * inv_n;
      }
      (*dlogits)(i, y) -= inv_n;
    }
  }
  return total * inv_n;
}

}  // namespace

std::size_t input_dim(const ParamLayout& layout) {
  if (const Segment* w0 = layout.find(weight_name(0))) return w0->cols;
  return layout.segment("head.weight").cols;
}

ParamVector build_network(const NetworkSpec& spec, std::uint64_t seed) {
  std::vector<int> ids(spec.num_classes);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return build_network(spec, ids, seed);
}

ParamVector build_network(const NetworkSpec& spec, std::span<const int> class_ids,
                          std::uint64_t seed) {
  if (spec.input_dim == 0) throw PreconditionError("input_dim must be >= 1");
  if (class_ids.empty()) throw PreconditionError("network needs at least one class");
  if (spec.num_classes != class_ids.size()) {
    throw PreconditionError("num_classes disagrees with the class id list");
  }
  auto layout = std::make_shared<ParamLayout>(spec.activation);
  std::size_t fan_in = spec.input_dim;
  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    const std::size_t width = spec.hidden_dims[l];
    if (width == 0) throw PreconditionError("hidden widths must be >= 1");
    checked_mul(width, fan_in + 1);
    layout->add_segment(weight_name(l), width, fan_in);
    layout->add_segment(bias_name(l), width, 1);
    fan_in = width;
  }
  checked_mul(class_ids.size(), fan_in + 1);
  layout->add_segment("head.weight", 0, fan_in, true);
  layout->add_segment("head.bias", 0, 1, true);
  for (const int cls : class_ids) layout->add_class(cls);
  layout->validate();

  ParamVector params = ParamVector::zeros(layout);
  Rng rng(mix_seed(seed, 0x1417));
  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    auto w = params.matrix(weight_name(l));
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    }
  }
  return params;
}

Eigen::MatrixXd forward(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs) {
  return run_forward(params, inputs).logits;
}

LossAndGrad loss_and_grad(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                          std::span<const int> labels, const ClassMask& mask) {
  check_batch(inputs, labels);
  const ParamLayout& layout = params.layout();
  const auto active = active_columns(layout, mask);
  const auto targets = label_columns(layout, labels, mask);
  const ForwardTrace trace = run_forward(params, inputs);

  Eigen::MatrixXd delta;
  LossAndGrad out;
  out.loss = softmax_cross_entropy(trace.logits, active, targets, &delta);
  out.grad = GradientVector::zeros(params.layout_ptr());

  out.grad.matrix("head.weight") = delta.transpose() * trace.activations.back();
  out.grad.matrix("head.bias") = delta.colwise().sum().transpose();
  Eigen::MatrixXd upstream = delta * params.matrix("head.weight");

  const std::size_t layers = hidden_layer_count(layout);
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& post = trace.activations[l + 1];
    const Eigen::MatrixXd dz =
        (upstream.array() * activation_derivative(layout.activation(), post).array()).matrix();
    out.grad.matrix(weight_name(l)) = dz.transpose() * trace.activations[l];
    out.grad.matrix(bias_name(l)) = dz.colwise().sum().transpose();
    if (l > 0) upstream = dz * params.matrix(weight_name(l));
  }
  return out;
}

double mean_loss(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                 std::span<const int> labels, const ClassMask& mask) {
  check_batch(inputs, labels);
  const auto active = active_columns(params.layout(), mask);
  const auto targets = label_columns(params.layout(), labels, mask);
  return softmax_cross_entropy(forward(params, inputs), active, targets, nullptr);
}

std::vector<GradientVector> per_example_grads(const ParamVector& params,
                                              const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                              std::span<const int> labels,
                                              const ClassMask& mask) {
  check_batch(inputs, labels);
  std::vector<GradientVector> grads;
  grads.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    grads.push_back(
        loss_and_grad(params, inputs.row(static_cast<Eigen::Index>(i)), labels.subspan(i, 1), mask)
            .grad);
  }
  return grads;
}

ParamVector expand_head(const ParamVector& params, std::span<const int> new_classes,
                        std::uint64_t seed, double init_scale) {
  auto layout = std::make_shared<ParamLayout>(params.layout());
  for (const int cls : new_classes) layout->add_class(cls);
  layout->validate();
  ParamVector out(layout, reconcile_values(params.values(), params.layout(), *layout, 0.0));
  if (init_scale > 0.0) {
    Rng rng(mix_seed(seed, 0x4ead));
    for (const char* name : {"head.weight", "head.bias"}) {
      auto m = out.matrix(name);
      for (const int cls : new_classes) {
        const auto row = static_cast<Eigen::Index>(layout->column_of(cls));
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(row, c) = rng.uniform(-init_scale, init_scale);
      }
    }
  }
  return out;
}

std::vector<int> predict(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                         std::span<const int> scope) {
  if (scope.empty()) throw PreconditionError("evaluation scope is empty");
  std::vector<int> classes(scope.begin(), scope.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<Eigen::Index> cols(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    cols[k] = static_cast<Eigen::Index>(params.layout().column_of(classes[k]));
  }
  const Eigen::MatrixXd logits = forward(params, inputs);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < cols.size(); ++k) {
      if (logits(i, cols[k]) > logits(i, cols[best])) best = k;
    }
    out[static_cast<std::size_t>(i)] = classes[best];
  }
  return out;
}

AccuracyCount count_correct(const ParamVector& params, const LabeledDataset& data,
                            std::span<const int> scope) {
  if (data.empty()) throw PreconditionError("empty test set");
  const auto predictions = predict(params, data.features, scope);
  AccuracyCount count;
  count.total = data.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == data.labels[i]) ++count.correct;
  }
  return count;
}

double evaluate_accuracy(const ParamVector& params, const LabeledDataset& data,
                         std::span<const int> scope) {
  return count_correct(params, data, scope).fraction();
}

}  // namespace ivt
