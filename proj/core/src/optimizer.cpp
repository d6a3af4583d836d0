#include "ivt/optimizer.hpp"

#include <cmath>
#include <string>

namespace ivt {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
  }
  return "sgd";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw PreconditionError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw PreconditionError("epochs must be positive");
  if (batch_size == 0) throw PreconditionError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw PreconditionError("learning_rate must be positive and finite");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw PreconditionError("momentum must be in [0, 1)");
  if (ivt_interval == 0) throw PreconditionError("ivt_interval must be positive");
  if (!(regularizer_strength >= 0.0) || !std::isfinite(regularizer_strength)) {
    throw PreconditionError("regularizer_strength must be nonnegative and finite");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw PreconditionError("adam betas must be in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw PreconditionError("adam_epsilon must be positive");
}

namespace {

void check_step_inputs(const ParamVector& params, const GradientVector& grad) {
  if (!same_layout(params.layout_ptr(), grad.layout_ptr())) {
    throw ShapeError("optimizer step: gradient layout differs from parameters");
  }
  if (!all_finite(grad.values())) throw NumericError("optimizer step: non-finite gradient");
}

void ensure_size(Eigen::VectorXd& v, Eigen::Index n) {
  if (v.size() == 0) {
    v = Eigen::VectorXd::Zero(n);
  } else if (v.size() != n) {
    throw ShapeError("optimizer state has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(n));
  }
}

}  // namespace

void sgd_step(ParamVector& params, const GradientVector& grad, const TrainConfig& config,
              OptimizerState& state) {
  check_step_inputs(params, grad);
  if (config.momentum == 0.0) {
    params.values() -= config.learning_rate * grad.values();
  } else {
    ensure_size(state.velocity, grad.values().size());
    state.velocity = config.momentum * state.velocity + grad.values();
    params.values() -= config.learning_rate * state.velocity;
  }
  ++state.steps;
}

void adam_step(ParamVector& params, const GradientVector& grad, const TrainConfig& config,
               OptimizerState& state) {
  check_step_inputs(params, grad);
  const Eigen::Index n = grad.values().size();
  ensure_size(state.first_moment, n);
  ensure_size(state.second_moment, n);
  ++state.steps;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  state.first_moment = b1 * state.first_moment + (1.0 - b1) * grad.values();
  state.second_moment =
      b2 * state.second_moment + (1.0 - b2) * grad.values().array().square().matrix();
  const double k = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(b1, k);
  const double c2 = 1.0 - std::pow(b2, k);
  params.values().array() -= config.learning_rate * (state.first_moment.array() / c1) /
                             ((state.second_moment.array() / c2).sqrt() + config.adam_epsilon);
}

void optimizer_step(ParamVector& params, const GradientVector& grad, const TrainConfig& config,
                    OptimizerState& state) {
  switch (config.optimizer) {
    case OptimizerKind::sgd: sgd_step(params, grad, config, state); break;
    case OptimizerKind::adam: adam_step(params, grad, config, state); break;
  }
}

OptimizerState reconcile_state(const OptimizerState& state, const ParamLayout& from,
                               const ParamLayout& to) {
  OptimizerState out;
  out.steps = state.steps;
  auto pad = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    if (v.size() == 0) return v;
    return reconcile_values(v, from, to, 0.0);
  };
  out.velocity = pad(state.velocity);
  out.first_moment = pad(state.first_moment);
  out.second_moment = pad(state.second_moment);
  return out;
}

}  // namespace ivt
