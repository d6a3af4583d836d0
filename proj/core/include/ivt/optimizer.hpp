#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

#include "ivt/fisher.hpp"
#include "ivt/param_layout.hpp"

namespace ivt {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(std::string_view name);

// Which epoch Fisher the IVT step uses: the last finalized epoch, or the
// mean of all epochs finalized so far in the current task.
enum class FisherSource { last_epoch, running_mean };

struct TrainConfig {
  std::size_t epochs = 20;  // M
  std::size_t batch_size = 32;
  double learning_rate = 0.1;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  std::size_t ivt_interval = 10;  // I
  double regularizer_strength = 0.0;
  OptimizerKind optimizer = OptimizerKind::sgd;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  bool shuffle = true;
  bool reset_optimizer_per_task = true;
  bool reset_optimizer_on_ivt = true;
  FisherMode fisher_mode = FisherMode::batch_mean_sq;
  FisherSource fisher_source = FisherSource::last_epoch;

  // Throws PreconditionError on out-of-range fields.
  void validate() const;
};

/// Optimizer memory carried between steps. Empty vectors mean "fresh".
struct OptimizerState {
  Eigen::VectorXd velocity;
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  std::uint64_t steps = 0;

  void reset() { *this = OptimizerState{}; }
  bool fresh() const { return steps == 0; }
};

/// Momentum SGD in the heavy-ball form v <- momentum*v + g, theta <- theta - lr*v.
void sgd_step(ParamVector& params, const GradientVector& grad, const TrainConfig& config,
              OptimizerState& state);

/// Adam with bias correction.
void adam_step(ParamVector& params, const GradientVector& grad, const TrainConfig& config,
               OptimizerState& state);

void optimizer_step(ParamVector& params, const GradientVector& grad, const TrainConfig& config,
                    OptimizerState& state);

// Zero-pads optimizer vectors from layout `from` into `to` (head growth).
OptimizerState reconcile_state(const OptimizerState& state, const ParamLayout& from,
                               const ParamLayout& to);

}  // namespace ivt
