#include "ivt/transform.hpp"

#include <cmath>

namespace ivt {

double transform_coefficient(double prior, double current) {
  if (!(prior >= 0.0) || !(current >= 0.0) || !std::isfinite(prior) || !std::isfinite(current)) {
    throw PreconditionError("transform_coefficient: inputs must be finite and nonnegative");
  }
  if (prior == 0.0) return 1.0;
  return (prior + current) / (2.0 * prior + current);
}

IncrementTransform build_transform(const FisherDiagonal& prior_cumulative,
                                   const FisherDiagonal& current_task, const ParamVector& anchor) {
  if (!same_layout(current_task.layout_ptr(), anchor.layout_ptr())) {
    throw ShapeError("build_transform: current Fisher and anchor layouts differ");
  }
  const FisherDiagonal prior = reconcile(prior_cumulative, current_task.layout_ptr(), 0.0);
  const Eigen::Index n = anchor.values().size();
  IncrementTransform t{Eigen::VectorXd(n), anchor};
  for (Eigen::Index j = 0; j < n; ++j) {
    t.coefficients[j] = transform_coefficient(prior.values()[j], current_task.values()[j]);
  }
  return t;
}

ParamVector apply_transform(const IncrementTransform& transform, const ParamVector& current) {
  if (!same_layout(transform.anchor.layout_ptr(), current.layout_ptr())) {
    throw ShapeError("apply_transform: layout differs from the transform anchor");
  }
  if (transform.coefficients.size() != current.values().size()) {
    throw ShapeError("apply_transform: coefficient count differs from parameter count");
  }
  const Eigen::VectorXd& a = transform.anchor.values();
  const Eigen::VectorXd& x = current.values();
  const Eigen::VectorXd& c = transform.coefficients;
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    out[j] = c[j] == 1.0 ? x[j] : a[j] + c[j] * (x[j] - a[j]);
  }
  return ParamVector(current.layout_ptr(), std::move(out));
}

bool schedule_hook(std::size_t epoch, std::size_t interval) {
  if (interval == 0) throw PreconditionError("IVT interval must be positive");
  if (epoch == 0) throw PreconditionError("epochs are numbered from 1");
  return epoch % interval == 0;
}

}  // namespace ivt
