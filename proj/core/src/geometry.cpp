#include "ivt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace ivt {

ScopeResult evaluate_scope(const ParamVector& params, const LabeledDataset& data,
                           std::span<const int> classes) {
  ScopeResult r;
  r.count = count_correct(params, data, classes);
  r.accuracy = r.count.fraction();
  if (!data.empty()) {
    r.loss = mean_loss(params, data.features, data.labels,
                       std::vector<int>(classes.begin(), classes.end()));
  }
  return r;
}

Direction build_direction(const ParamVector& anchor, const ParamVector& target, double head_fill) {
  Direction d{reconcile(anchor, target.layout_ptr(), head_fill), ParamVector{}, 0.0};
  const Eigen::VectorXd diff = target.values() - d.anchor.values();
  d.lambda_hat = diff.norm();
  if (!(d.lambda_hat > 0.0)) throw PreconditionError("build_direction: zero displacement");
  if (!std::isfinite(d.lambda_hat)) throw NumericError("build_direction: non-finite displacement");
  d.unit = ParamVector(target.layout_ptr(), diff / d.lambda_hat);
  return d;
}

ParamVector interpolate(const Direction& direction, const ParamVector& target, double lambda) {
  if (lambda == 0.0) return direction.anchor;
  if (lambda == direction.lambda_hat) return target;
  return ParamVector(direction.anchor.layout_ptr(),
                     direction.anchor.values() + lambda * direction.unit.values());
}

std::vector<double> default_lambda_grid(double lambda_hat, std::size_t points, double reach) {
  if (points < 2) throw PreconditionError("lambda grid needs at least two points");
  std::vector<double> grid{0.0, lambda_hat};
  const double top = reach * lambda_hat;
  for (std::size_t i = 0; i < points; ++i) {
    grid.push_back(top * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

const ScanPoint& InterpolationScan::at(std::size_t lambda_index, std::size_t scope_idx) const {
  if (lambda_index >= lambda_grid.size() || scope_idx >= scopes.size()) {
    throw PreconditionError("scan index out of range");
  }
  return points[lambda_index * scopes.size() + scope_idx];
}

std::size_t InterpolationScan::scope_index(const std::string& name) const {
  const auto it = std::find(scopes.begin(), scopes.end(), name);
  if (it == scopes.end()) throw PreconditionError("scan has no scope '" + name + "'");
  return static_cast<std::size_t>(it - scopes.begin());
}

InterpolationScan lmc_scan(const ParamVector& anchor, const ParamVector& target,
                           std::vector<double> lambda_grid, std::span<const EvalScope> scopes,
                           double head_fill) {
  if (scopes.empty()) throw PreconditionError("lmc_scan: no evaluation scopes");
  InterpolationScan scan;
  scan.direction = build_direction(anchor, target, head_fill);
  scan.target = target;
  scan.classes = target.layout().class_ids();
  std::sort(scan.classes.begin(), scan.classes.end());
  if (lambda_grid.empty()) lambda_grid = default_lambda_grid(scan.direction.lambda_hat);
  const auto has = [&](double v) {
    return std::find(lambda_grid.begin(), lambda_grid.end(), v) != lambda_grid.end();
  };
  if (!has(0.0) || !has(scan.direction.lambda_hat)) {
    throw PreconditionError("lmc_scan: grid must contain 0 and lambda_hat");
  }
  scan.lambda_grid = lambda_grid;
  for (const EvalScope& s : scopes) {
    if (s.data == nullptr) throw PreconditionError("lmc_scan: scope '" + s.name + "' has no data");
    scan.scopes.push_back(s.name);
  }
  for (double lambda : scan.lambda_grid) {
    const ParamVector model = interpolate(scan.direction, target, lambda);
    for (const EvalScope& s : scopes) {
      try {
        scan.points.push_back({lambda, s.name, evaluate_scope(model, *s.data, scan.classes)});
      } catch (const Error& e) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%.17g", lambda);
        throw PreconditionError(std::string("lmc_scan at lambda ") + buf + ", scope '" + s.name +
                                "': " + e.what());
      }
    }
  }
  return scan;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("fit_line: x and y lengths differ");
  if (x.size() < 2) throw PreconditionError("fit_line: needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit fit;
  if (sxx <= 1e-300) {
    fit.degenerate = true;
    fit.intercept = my;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

StabilityPlasticity stability_plasticity_curve(const InterpolationScan& scan,
                                               const std::vector<std::string>& old_scopes,
                                               const std::string& new_scope) {
  if (old_scopes.empty()) throw PreconditionError("stability-plasticity curve needs old scopes");
  std::vector<std::size_t> old_idx;
  for (const auto& s : old_scopes) old_idx.push_back(scan.scope_index(s));
  const std::size_t new_idx = scan.scope_index(new_scope);
  StabilityPlasticity out;
  std::vector<double> xs, ys;
  for (std::size_t l = 0; l < scan.lambda_grid.size(); ++l) {
    std::size_t correct = 0, total = 0;
    for (std::size_t i : old_idx) {
      correct += scan.at(l, i).result.count.correct;
      total += scan.at(l, i).result.count.total;
    }
    CurvePoint p{scan.lambda_grid[l], AccuracyCount{correct, total}.fraction(),
                 scan.at(l, new_idx).result.accuracy};
    out.points.push_back(p);
    xs.push_back(p.old_accuracy);
    ys.push_back(p.new_accuracy);
  }
  out.fit = fit_line(xs, ys);
  return out;
}

namespace {

std::vector<double> axis(double lo, double hi, std::size_t count) {
  if (count == 0) throw PreconditionError("grid resolution must be positive");
  if (!(lo <= hi)) throw PreconditionError("grid extents must satisfy min <= max");
  std::vector<double> v;
  for (std::size_t i = 0; i < count; ++i) {
    v.push_back(count == 1 ? lo
                           : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return v;
}

}  // namespace

LandscapeGrid landscape_grid(const ParamVector& origin, const ParamVector& dir_a,
                             const ParamVector& dir_b, const GridExtents& extents,
                             const GridResolution& resolution, const LabeledDataset& eval) {
  if (!same_layout(origin.layout_ptr(), dir_a.layout_ptr()) ||
      !same_layout(origin.layout_ptr(), dir_b.layout_ptr())) {
    throw ShapeError("landscape_grid: directions must share the origin layout");
  }
  const double na = dir_a.values().norm();
  const double nb = dir_b.values().norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw PreconditionError("landscape_grid: zero direction");
  const Eigen::VectorXd u = dir_a.values() / na;
  Eigen::VectorXd v = dir_b.values() - dir_b.values().dot(u) * u;
  const double nv = v.norm();
  if (nv <= 1e-10 * nb) throw PreconditionError("landscape_grid: directions are parallel");
  v /= nv;

  LandscapeGrid grid;
  grid.origin = origin;
  grid.basis_u = ParamVector(origin.layout_ptr(), u);
  grid.basis_v = ParamVector(origin.layout_ptr(), v);
  grid.classes = origin.layout().class_ids();
  std::sort(grid.classes.begin(), grid.classes.end());
  for (double a : axis(extents.a_min, extents.a_max, resolution.a)) {
    for (double b : axis(extents.b_min, extents.b_max, resolution.b)) {
      const ParamVector model =
          (a == 0.0 && b == 0.0)
              ? origin
              : ParamVector(origin.layout_ptr(), origin.values() + a * u + b * v);
      grid.points.push_back({a, b, evaluate_scope(model, eval, grid.classes)});
    }
  }
  return grid;
}

PlaneProjection project_onto(const LandscapeGrid& grid, const std::string& name,
                             const ParamVector& model, double head_fill) {
  const Eigen::VectorXd d =
      reconcile(model, grid.origin.layout_ptr(), head_fill).values() - grid.origin.values();
  PlaneProjection p;
  p.name = name;
  p.a = d.dot(grid.basis_u.values());
  p.b = d.dot(grid.basis_v.values());
  p.residual = (d - p.a * grid.basis_u.values() - p.b * grid.basis_v.values()).norm();
  return p;
}

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_scan_csv(std::ostream& out, const InterpolationScan& scan, const std::string& digest) {
  out << "config_digest,lambda,scope,correct,total,accuracy,loss\n";
  for (const ScanPoint& p : scan.points) {
    out << digest << ',' << g17(p.lambda) << ',' << p.scope << ',' << p.result.count.correct << ','
        << p.result.count.total << ',' << g17(p.result.accuracy) << ',' << g17(p.result.loss)
        << '\n';
  }
}

void write_grid_csv(std::ostream& out, const LandscapeGrid& grid, const std::string& digest) {
  out << "config_digest,a,b,accuracy,loss\n";
  for (const GridPoint& p : grid.points) {
    out << digest << ',' << g17(p.a) << ',' << g17(p.b) << ',' << g17(p.result.accuracy) << ','
        << g17(p.result.loss) << '\n';
  }
}

nlohmann::json scan_manifest(const InterpolationScan& scan) {
  return {{"lambda_hat", scan.direction.lambda_hat},
          {"lambda_grid", scan.lambda_grid},
          {"scopes", scan.scopes},
          {"classes", scan.classes},
          {"parameters", scan.target.size()},
          {"endpoints",
           {{"anchor", {{"lambda", 0.0}}}, {"target", {{"lambda", scan.direction.lambda_hat}}}}}};
}

nlohmann::json grid_manifest(const LandscapeGrid& grid) {
  nlohmann::json projections = nlohmann::json::array();
  for (const auto& p : grid.projections) {
    projections.push_back({{"name", p.name}, {"a", p.a}, {"b", p.b}, {"residual", p.residual}});
  }
  double a_min = 0, a_max = 0, b_min = 0, b_max = 0;
  if (!grid.points.empty()) {
    a_min = a_max = grid.points.front().a;
    b_min = b_max = grid.points.front().b;
    for (const auto& p : grid.points) {
      a_min = std::min(a_min, p.a);
      a_max = std::max(a_max, p.a);
      b_min = std::min(b_min, p.b);
      b_max = std::max(b_max, p.b);
    }
  }
  return {{"origin", "grid point (0, 0)"},
          {"extents", {{"a", {a_min, a_max}}, {"b", {b_min, b_max}}}},
          {"points", grid.points.size()},
          {"classes", grid.classes},
          {"projections", projections}};
}

}  // namespace ivt
