#include "ivt/quadlab.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ivt/error.hpp"
#include "ivt/rng.hpp"

namespace ivt::quad {

double QuadraticTask::loss(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd d = theta - mu;
  return 0.5 * d.dot(A * d);
}

Eigen::VectorXd QuadraticTask::gradient(const Eigen::VectorXd& theta) const {
  return A * (theta - mu);
}

namespace {

void check_symmetric_psd(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + " is not square");
  if (!m.allFinite()) throw NumericError(std::string(what) + " has non-finite entries");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw PreconditionError(std::string(what) + " is not symmetric");
  }
  if (m.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigen solve failed");
  if (es.eigenvalues().minCoeff() < -1e-10) {
    throw PreconditionError(std::string(what) + " has a negative eigenvalue");
  }
}

void check_vector(const Eigen::VectorXd& v, Eigen::Index dim, const char* what) {
  if (v.size() != dim) throw ShapeError(std::string(what) + " has the wrong dimension");
}

}  // namespace

void QuadraticTask::validate() const {
  check_symmetric_psd(A, "task curvature");
  check_vector(mu, A.rows(), "task minimizer");
}

namespace {

using VectorXld = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
using MatrixXld = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

constexpr int kRefinementSteps = 3;

// Cholesky solve followed by iterative refinement with residuals in long double.
Eigen::VectorXd solve_refined(const Eigen::MatrixXd& matrix, const VectorXld& rhs) {
  if (matrix.rows() != matrix.cols() || matrix.rows() != rhs.size()) {
    throw ShapeError("solve_spd: dimension mismatch");
  }
  const auto attempt = [&](const Eigen::MatrixXd& m, Eigen::VectorXd& out) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return false;
    out = llt.solve(rhs.cast<double>());
    if (!out.allFinite()) return false;
    const MatrixXld m_ld = m.cast<long double>();
    for (int step = 0; step < kRefinementSteps; ++step) {
      const VectorXld r = rhs - m_ld * out.cast<long double>();
      const Eigen::VectorXd dx = llt.solve(r.cast<double>());
      if (!dx.allFinite()) break;
      out += dx;
    }
    return true;
  };
  Eigen::VectorXd x;
  if (attempt(matrix, x)) return x;
  const Eigen::MatrixXd reg =
      matrix + 1e-12 * Eigen::MatrixXd::Identity(matrix.rows(), matrix.cols());
  if (attempt(reg, x)) return x;
  throw NumericError("solve_spd: system is singular beyond regularization");
}

VectorXld times(const Eigen::MatrixXd& m, const VectorXld& v) { return m.cast<long double>() * v; }

VectorXld widen(const Eigen::VectorXd& v) { return v.cast<long double>(); }

}  // namespace

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& rhs) {
  if (matrix.rows() != matrix.cols() || matrix.rows() != rhs.size()) {
    throw ShapeError("solve_spd: dimension mismatch");
  }
  return solve_refined(matrix, widen(rhs));
}

Eigen::VectorXd solve_incremental(const QuadraticTask& task, const Eigen::VectorXd& anchor,
                                  const Eigen::MatrixXd& h_bar_prev) {
  task.validate();
  check_symmetric_psd(h_bar_prev, "anchor curvature");
  check_vector(anchor, task.A.rows(), "anchor");
  if (h_bar_prev.rows() != task.A.rows()) throw ShapeError("anchor curvature dimension mismatch");
  return solve_refined(task.A + h_bar_prev,
                       times(task.A, widen(task.mu)) + times(h_bar_prev, widen(anchor)));
}

Eigen::VectorXd solve_oracle(std::span<const QuadraticTask> tasks, const Eigen::VectorXd& anchor,
                             const Eigen::MatrixXd& h_bar_prev) {
  if (tasks.empty()) throw PreconditionError("solve_oracle: no tasks");
  const Eigen::Index d = tasks.front().A.rows();
  check_symmetric_psd(h_bar_prev, "anchor curvature");
  check_vector(anchor, d, "anchor");
  if (h_bar_prev.rows() != d) throw ShapeError("anchor curvature dimension mismatch");
  Eigen::MatrixXd m = h_bar_prev;
  VectorXld b = times(h_bar_prev, widen(anchor));
  for (const QuadraticTask& task : tasks) {
    task.validate();
    if (task.A.rows() != d) throw ShapeError("solve_oracle: tasks differ in dimension");
    m += task.A;
    b += times(task.A, widen(task.mu));
  }
  return solve_refined(m, b);
}

double incremental_residual(const QuadraticTask& task, const Eigen::VectorXd& anchor,
                            const Eigen::MatrixXd& h_bar_prev, const Eigen::VectorXd& theta) {
  return (task.gradient(theta) + h_bar_prev * (theta - anchor)).norm();
}

double oracle_residual(std::span<const QuadraticTask> tasks, const Eigen::VectorXd& anchor,
                       const Eigen::MatrixXd& h_bar_prev, const Eigen::VectorXd& theta) {
  Eigen::VectorXd g = h_bar_prev * (theta - anchor);
  for (const QuadraticTask& task : tasks) g += task.gradient(theta);
  return g.norm();
}

Eigen::VectorXd proposition1_predict(const Eigen::VectorXd& anchor, const Eigen::VectorXd& theta_t,
                                     const Eigen::MatrixXd& h_bar_prev,
                                     const Eigen::MatrixXd& h_bar_t) {
  check_vector(theta_t, anchor.size(), "theta_t");
  if (h_bar_prev.rows() != anchor.size() || h_bar_t.rows() != anchor.size()) {
    throw ShapeError("proposition1_predict: curvature dimension mismatch");
  }
  return anchor + solve_refined(h_bar_prev + h_bar_t,
                                times(h_bar_t, widen(theta_t) - widen(anchor)));
}

Eigen::VectorXd proposition1_predict_diagonal(const Eigen::VectorXd& anchor,
                                              const Eigen::VectorXd& theta_t,
                                              const Eigen::MatrixXd& h_bar_prev,
                                              const Eigen::MatrixXd& h_bar_t) {
  check_vector(theta_t, anchor.size(), "theta_t");
  if (h_bar_prev.rows() != anchor.size() || h_bar_t.rows() != anchor.size()) {
    throw ShapeError("proposition1_predict_diagonal: curvature dimension mismatch");
  }
  Eigen::VectorXd out(anchor.size());
  for (Eigen::Index j = 0; j < anchor.size(); ++j) {
    const double denom = h_bar_prev(j, j) + h_bar_t(j, j);
    const double c = denom > 0.0 ? h_bar_t(j, j) / denom : 1.0;
    out[j] = anchor[j] + c * (theta_t[j] - anchor[j]);
  }
  return out;
}

QuadraticTask random_psd_task(std::uint64_t seed, std::size_t dim) {
  if (dim == 0 || dim > kMaxDim) {
    throw PreconditionError("quadratic dimension must be in 1.." + std::to_string(kMaxDim));
  }
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  }
  QuadraticTask task;
  task.A = g.transpose() * g + 1e-6 * Eigen::MatrixXd::Identity(d, d);
  task.A = 0.5 * (task.A + task.A.transpose()).eval();
  task.mu.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) task.mu[i] = rng.normal();
  return task;
}

Instance generate_instance(const GeneratorConfig& config, std::size_t trial, std::size_t tasks) {
  if (tasks == 0) throw PreconditionError("generate_instance: no tasks requested");
  if (config.min_dim == 0 || config.min_dim > config.max_dim || config.max_dim > kMaxDim) {
    throw PreconditionError("generate_instance: invalid dimension range");
  }
  const std::uint64_t base = mix_seed(config.seed, trial);
  Rng rng(base);
  const std::size_t dim = config.min_dim + rng.below(config.max_dim - config.min_dim + 1);
  Instance inst;
  for (std::size_t k = 0; k < tasks; ++k) inst.tasks.push_back(random_psd_task(mix_seed(base, k + 1), dim));
  if (config.inject_negative_eigenvalue) {
    Eigen::MatrixXd& a = inst.tasks.front().A;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const Eigen::VectorXd v = es.eigenvectors().col(0);
    a -= (es.eigenvalues()[0] + 1.0) * v * v.transpose();
    a = 0.5 * (a + a.transpose()).eval();
  }
  return inst;
}

OracleChain oracle_chain(const Instance& instance, std::size_t upto) {
  if (upto == 0 || upto > instance.tasks.size()) throw PreconditionError("oracle_chain: bad length");
  const auto d = static_cast<Eigen::Index>(instance.dim());
  OracleChain chain;
  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t k = 1; k <= upto; ++k) {
    const std::span<const QuadraticTask> prefix(instance.tasks.data(), k);
    anchor = solve_oracle(prefix, anchor, h_prev);
    h_prev = h_prev + instance.tasks[k - 1].A;
    chain.theta_star.push_back(anchor);
    chain.h_bar.push_back(h_prev);
  }
  return chain;
}

StepComparison compare_step(const Instance& instance, std::size_t t,
                            const Eigen::VectorXd* anchor_offset) {
  if (t < 2 || t > instance.tasks.size()) throw PreconditionError("compare_step: t must be in 2..T");
  const OracleChain chain = oracle_chain(instance, t - 1);
  Eigen::VectorXd anchor = chain.theta_star.back();
  if (anchor_offset != nullptr) {
    check_vector(*anchor_offset, anchor.size(), "anchor offset");
    anchor += *anchor_offset;
  }
  const Eigen::MatrixXd& h_prev = chain.h_bar.back();
  const QuadraticTask& task = instance.tasks[t - 1];
  const Eigen::MatrixXd h_t = h_prev + task.A;
  const std::span<const QuadraticTask> prefix(instance.tasks.data(), t);

  StepComparison s;
  s.incremental = solve_incremental(task, anchor, h_prev);
  s.oracle = solve_oracle(prefix, anchor, h_prev);
  s.predict_full = proposition1_predict(anchor, s.incremental, h_prev, h_t);
  s.predict_diag = proposition1_predict_diagonal(anchor, s.incremental, h_prev, h_t);
  s.gap_full = (s.predict_full - s.oracle).lpNorm<Eigen::Infinity>();
  s.gap_diag = (s.predict_diag - s.oracle).lpNorm<Eigen::Infinity>();
  s.residual_incremental = incremental_residual(task, anchor, h_prev, s.incremental);
  s.residual_oracle = oracle_residual(prefix, anchor, h_prev, s.oracle);
  s.anchor_gradient_norm = instance.tasks[t - 2].gradient(anchor).norm();
  return s;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

GapStudy proposition1_gap(const GeneratorConfig& config, std::size_t t, std::size_t trials) {
  if (trials == 0) throw PreconditionError("proposition1_gap: no trials");
  GapStudy study;
  std::vector<double> full, diag;
  for (std::size_t k = 0; k < trials; ++k) {
    const Instance inst = generate_instance(config, k, t);
    const StepComparison s = compare_step(inst, t);
    study.trials.push_back({k, t, inst.dim(), s.gap_full, s.gap_diag, s.residual_incremental,
                            s.residual_oracle});
    full.push_back(s.gap_full);
    diag.push_back(s.gap_diag);
    study.max_residual =
        std::max({study.max_residual, s.residual_incremental, s.residual_oracle});
  }
  study.max_gap_full = *std::max_element(full.begin(), full.end());
  study.max_gap_diag = *std::max_element(diag.begin(), diag.end());
  study.median_gap_full = median(full);
  study.median_gap_diag = median(diag);
  return study;
}

DiagonalComparison diagonalized_comparison(const Instance& instance, std::size_t t) {
  const StepComparison s = compare_step(instance, t);
  return {s.gap_full, s.gap_diag};
}

SpectralBound top_eigenpair(const Eigen::MatrixXd& matrix, double rel_tol, std::uint64_t seed) {
  check_symmetric_psd(matrix, "curvature");
  if (!(rel_tol > 0.0)) throw PreconditionError("top_eigenpair: tolerance must be positive");
  const Eigen::Index d = matrix.rows();
  SpectralBound out;
  if (d == 0) throw ShapeError("top_eigenpair: empty matrix");
  Rng rng(seed);
  Eigen::VectorXd x(d);
  for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.normal();
  x.normalize();
  for (std::size_t k = 1; k <= kPowerIterationMaxSteps; ++k) {
    const Eigen::VectorXd y = matrix * x;
    const double rho = x.dot(y);
    const double ny = y.norm();
    out.iterations = k;
    if (ny == 0.0) {
      out.max_eigenvalue = 0.0;
      out.attained_direction = x;
      return out;
    }
    if ((y - rho * x).norm() <= rel_tol * std::abs(rho)) {
      out.max_eigenvalue = rho;
      out.attained_direction = x;
      return out;
    }
    x = y / ny;
  }
  throw NumericError("power iteration did not converge in " +
                     std::to_string(kPowerIterationMaxSteps) + " steps");
}

ForgettingReport forgetting_and_bound(const Eigen::MatrixXd& h1, const Eigen::VectorXd& theta,
                                      const Eigen::VectorXd& theta1, double l1_min) {
  check_vector(theta, h1.rows(), "theta");
  check_vector(theta1, h1.rows(), "theta1");
  ForgettingReport r;
  r.bound = top_eigenpair(h1);
  const Eigen::VectorXd delta = theta - theta1;
  r.forgetting = 0.5 * delta.dot(h1 * delta);
  r.loss = l1_min + r.forgetting;
  r.bound.bound_value = 0.5 * r.bound.max_eigenvalue * delta.squaredNorm();
  return r;
}

}  // namespace ivt::quad
