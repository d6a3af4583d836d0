#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "ivt/fisher.hpp"
#include "ivt/param_layout.hpp"

namespace ivt {

/// Diagonal increment-vector transform around an anchor.
///
/// Applying it maps `current` to anchor + coefficients .* (current - anchor).
/// Coefficients are the per-coordinate ratio of the updated cumulative
/// Fisher to the sum of the previous and updated cumulative Fisher.
struct IncrementTransform {
  Eigen::VectorXd coefficients;
  ParamVector anchor;
};

/// Scalar rule for one coordinate.
///
///   c = (prior + current) / (2 * prior + current)   if prior > 0
///   c = 1                                           if prior == 0
///
/// so c lies in [1/2, 1] and only reaches 1 when the coordinate carries no
/// prior importance.
double transform_coefficient(double prior, double current);

/// `prior_cumulative` may be on an older (smaller-head) layout; it is padded
/// with zeros. `current_task` and `anchor` must share the target layout.
IncrementTransform build_transform(const FisherDiagonal& prior_cumulative,
                                   const FisherDiagonal& current_task, const ParamVector& anchor);

// Coordinates with coefficient exactly 1 are copied from `current` bit for bit.
ParamVector apply_transform(const IncrementTransform& transform, const ParamVector& current);

/// True on 1-based epochs that are multiples of `interval`.
bool schedule_hook(std::size_t epoch, std::size_t interval);

}  // namespace ivt
