#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "ivt/dataset.hpp"
#include "ivt/param_layout.hpp"

namespace ivt {

/// Dense MLP description. Hidden layers use `activation`; the head is linear.
struct NetworkSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  Activation activation = Activation::relu;
  std::size_t num_classes = 1;
};

/// Builds and initializes a network with classes 0..num_classes-1.
///
/// Hidden weights are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), hidden
/// biases and all head columns start at zero. The layout is
///   hidden<k>.weight (out x in), hidden<k>.bias (out), head.weight (classes x width),
///   head.bias (classes)
/// with the two head segments stored one row per class.
ParamVector build_network(const NetworkSpec& spec, std::uint64_t seed);

// Same, with an explicit list of head class ids (column order follows the list).
ParamVector build_network(const NetworkSpec& spec, std::span<const int> class_ids,
                          std::uint64_t seed);

std::size_t input_dim(const ParamLayout& layout);

// Logits in head-column order, one row per input row.
Eigen::MatrixXd forward(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs);

struct LossAndGrad {
  double loss = 0.0;
  GradientVector grad;
};

// Active class ids for a masked softmax; nullopt means the whole head.
using ClassMask = std::optional<std::vector<int>>;

/// Mean softmax cross-entropy over the batch, softmax restricted to the
/// masked classes, and its exact gradient. Masked-out head rows receive a
/// gradient of exactly zero.
LossAndGrad loss_and_grad(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                          std::span<const int> labels, const ClassMask& mask = std::nullopt);

// Loss only; same arithmetic as loss_and_grad without the backward pass.
double mean_loss(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                 std::span<const int> labels, const ClassMask& mask = std::nullopt);

// One gradient per example (batches of one through loss_and_grad).
std::vector<GradientVector> per_example_grads(const ParamVector& params,
                                              const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                                              std::span<const int> labels,
                                              const ClassMask& mask = std::nullopt);

/// Appends head columns for `new_classes`. All pre-existing coordinates keep
/// their values. New columns are zero unless `init_scale` > 0, in which case
/// they are drawn from U(-init_scale, init_scale) with `seed`.
ParamVector expand_head(const ParamVector& params, std::span<const int> new_classes,
                        std::uint64_t seed, double init_scale = 0.0);

struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t total = 0;
  double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

/// Argmax over the scoped classes, ties to the lowest class id.
AccuracyCount count_correct(const ParamVector& params, const LabeledDataset& data,
                            std::span<const int> scope);
double evaluate_accuracy(const ParamVector& params, const LabeledDataset& data,
                         std::span<const int> scope);

// Predicted class id per row under the same argmax rule.
std::vector<int> predict(const ParamVector& params, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                         std::span<const int> scope);

}  // namespace ivt
