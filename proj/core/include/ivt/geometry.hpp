#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivt/dataset.hpp"
#include "ivt/network.hpp"

namespace ivt {

/// Named evaluation set (usually one task's test split).
struct EvalScope {
  std::string name;
  const LabeledDataset* data = nullptr;
};

struct ScopeResult {
  AccuracyCount count;
  double accuracy = 0.0;
  double loss = 0.0;
};

// Accuracy and mean cross-entropy with the softmax restricted to `classes`.
ScopeResult evaluate_scope(const ParamVector& params, const LabeledDataset& data,
                           std::span<const int> classes);

/// Unit direction from an anchor to a target.
///
/// The anchor is first re-expressed in the target layout: head columns that
/// only exist in the target take `head_fill`, the value new columns receive at
/// initialization.
struct Direction {
  ParamVector anchor;  // reconciled
  ParamVector unit;
  double lambda_hat = 0.0;  // ||target - anchor||_2
};

Direction build_direction(const ParamVector& anchor, const ParamVector& target,
                          double head_fill = 0.0);

// anchor + lambda * unit. lambda == 0 and lambda == lambda_hat return the
// stored endpoints exactly.
ParamVector interpolate(const Direction& direction, const ParamVector& target, double lambda);

// `points` evenly spaced values on [0, reach * lambda_hat], merged with the
// exact endpoints {0, lambda_hat}, sorted and de-duplicated.
std::vector<double> default_lambda_grid(double lambda_hat, std::size_t points = 41,
                                        double reach = 1.25);

struct ScanPoint {
  double lambda = 0.0;
  std::string scope;
  ScopeResult result;
};

struct InterpolationScan {
  Direction direction;
  ParamVector target;
  std::vector<int> classes;  // softmax scope used for every evaluation
  std::vector<double> lambda_grid;
  std::vector<std::string> scopes;
  std::vector<ScanPoint> points;  // lambda-major, scope order within lambda

  const ScanPoint& at(std::size_t lambda_index, std::size_t scope_index) const;
  std::size_t scope_index(const std::string& name) const;
};

/// Evaluates anchor + lambda * U on every scope for every lambda.
///
/// An empty grid means default_lambda_grid(lambda_hat). The grid must contain
/// 0 and lambda_hat so endpoint rows coincide with direct evaluations.
InterpolationScan lmc_scan(const ParamVector& anchor, const ParamVector& target,
                           std::vector<double> lambda_grid, std::span<const EvalScope> scopes,
                           double head_fill = 0.0);

struct CurvePoint {
  double lambda = 0.0;
  double old_accuracy = 0.0;
  double new_accuracy = 0.0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  bool degenerate = false;  // no spread in x; slope reported as 0
};

// Least-squares y = slope * x + intercept. Needs at least two points.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

struct StabilityPlasticity {
  std::vector<CurvePoint> points;
  LinearFit fit;  // new accuracy as a function of old accuracy
};

/// Pairs pooled old-task accuracy with new-task accuracy at every lambda.
StabilityPlasticity stability_plasticity_curve(const InterpolationScan& scan,
                                               const std::vector<std::string>& old_scopes,
                                               const std::string& new_scope);

struct GridExtents {
  double a_min = -1.0, a_max = 1.0;
  double b_min = -1.0, b_max = 1.0;
};

struct GridResolution {
  std::size_t a = 11, b = 11;
};

struct GridPoint {
  double a = 0.0;
  double b = 0.0;
  ScopeResult result;
};

struct PlaneProjection {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double residual = 0.0;  // norm of the out-of-plane component
};

/// 2-D slice of the loss surface through `origin`.
///
/// basis_u = dir_a / |dir_a|, basis_v = Gram-Schmidt of dir_b against u.
struct LandscapeGrid {
  ParamVector origin;
  ParamVector basis_u;
  ParamVector basis_v;
  std::vector<int> classes;
  std::vector<GridPoint> points;  // a-major
  std::vector<PlaneProjection> projections;
};

LandscapeGrid landscape_grid(const ParamVector& origin, const ParamVector& dir_a,
                             const ParamVector& dir_b, const GridExtents& extents,
                             const GridResolution& resolution, const LabeledDataset& eval);

// Coordinates of `model` in the grid plane; `model` is reconciled to the
// grid layout first.
PlaneProjection project_onto(const LandscapeGrid& grid, const std::string& name,
                             const ParamVector& model, double head_fill = 0.0);

// Long-format CSV writers. Every row carries the config digest.
void write_scan_csv(std::ostream& out, const InterpolationScan& scan, const std::string& digest);
void write_grid_csv(std::ostream& out, const LandscapeGrid& grid, const std::string& digest);

nlohmann::json scan_manifest(const InterpolationScan& scan);
nlohmann::json grid_manifest(const LandscapeGrid& grid);

}  // namespace ivt
