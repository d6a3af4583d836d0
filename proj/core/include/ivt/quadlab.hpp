#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ivt::quad {

/// L(theta) = 1/2 (theta - mu)^T A (theta - mu) with A symmetric PSD.
struct QuadraticTask {
  Eigen::MatrixXd A;
  Eigen::VectorXd mu;

  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
  double loss(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;

  // Throws PreconditionError unless A is square, symmetric to 1e-12 and has
  // no eigenvalue below -1e-10.
  void validate() const;
};

inline constexpr std::size_t kMaxDim = 64;

// Cholesky solve; retries with +1e-12 I when the matrix is not numerically
// positive definite. Throws NumericError if that also fails.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& rhs);

/// argmin L_t(theta) + 1/2 |theta - anchor|^2_{Hbar_prev}
Eigen::VectorXd solve_incremental(const QuadraticTask& task, const Eigen::VectorXd& anchor,
                                  const Eigen::MatrixXd& h_bar_prev);

/// argmin sum_i L_i(theta) + 1/2 |theta - anchor|^2_{Hbar_prev}
Eigen::VectorXd solve_oracle(std::span<const QuadraticTask> tasks, const Eigen::VectorXd& anchor,
                             const Eigen::MatrixXd& h_bar_prev);

// Gradient norms of the two objectives at a candidate point.
double incremental_residual(const QuadraticTask& task, const Eigen::VectorXd& anchor,
                            const Eigen::MatrixXd& h_bar_prev, const Eigen::VectorXd& theta);
double oracle_residual(std::span<const QuadraticTask> tasks, const Eigen::VectorXd& anchor,
                       const Eigen::MatrixXd& h_bar_prev, const Eigen::VectorXd& theta);

/// anchor + (Hbar_prev + Hbar_t)^{-1} Hbar_t (theta_t - anchor), full matrices.
Eigen::VectorXd proposition1_predict(const Eigen::VectorXd& anchor, const Eigen::VectorXd& theta_t,
                                     const Eigen::MatrixXd& h_bar_prev,
                                     const Eigen::MatrixXd& h_bar_t);

// Same prediction using only the diagonals of the two curvature sums.
Eigen::VectorXd proposition1_predict_diagonal(const Eigen::VectorXd& anchor,
                                              const Eigen::VectorXd& theta_t,
                                              const Eigen::MatrixXd& h_bar_prev,
                                              const Eigen::MatrixXd& h_bar_t);

struct GeneratorConfig {
  std::uint64_t seed = 7;
  std::size_t min_dim = 2;
  std::size_t max_dim = 20;
  // Debug hook: replaces one eigenvalue of the first task's A by -1 so the
  // PSD precondition must fire.
  bool inject_negative_eigenvalue = false;
};

// A = G^T G + 1e-6 I with G standard normal, mu standard normal.
QuadraticTask random_psd_task(std::uint64_t seed, std::size_t dim);

struct Instance {
  std::vector<QuadraticTask> tasks;
  std::size_t dim() const { return tasks.front().dim(); }
};

Instance generate_instance(const GeneratorConfig& config, std::size_t trial, std::size_t tasks);

/// Converged anchors: theta*_k from recursive oracle solves and the matching
/// cumulative curvatures Hbar_k = sum_{i<=k} A_i (index 0 holds k = 1).
struct OracleChain {
  std::vector<Eigen::VectorXd> theta_star;
  std::vector<Eigen::MatrixXd> h_bar;
};

OracleChain oracle_chain(const Instance& instance, std::size_t upto);

struct StepComparison {
  Eigen::VectorXd incremental;   // theta_t
  Eigen::VectorXd oracle;        // theta*_t
  Eigen::VectorXd predict_full;  // full-matrix prediction
  Eigen::VectorXd predict_diag;  // diagonal prediction
  double gap_full = 0.0;         // inf-norm distance to the oracle
  double gap_diag = 0.0;
  double residual_incremental = 0.0;
  double residual_oracle = 0.0;
  double anchor_gradient_norm = 0.0;  // |grad L_{t-1}(anchor)|, zero when converged at t=2
};

/// Compares the prediction with the exact oracle at task t >= 2. The anchor is
/// theta*_{t-1} from the oracle chain, displaced by `anchor_offset` when given.
StepComparison compare_step(const Instance& instance, std::size_t t,
                            const Eigen::VectorXd* anchor_offset = nullptr);

struct GapTrial {
  std::size_t trial = 0;
  std::size_t t = 0;
  std::size_t dim = 0;
  double gap_full = 0.0;
  double gap_diag = 0.0;
  double residual_incremental = 0.0;
  double residual_oracle = 0.0;
};

struct GapStudy {
  std::vector<GapTrial> trials;
  double max_gap_full = 0.0;
  double median_gap_full = 0.0;
  double max_gap_diag = 0.0;
  double median_gap_diag = 0.0;
  double max_residual = 0.0;
};

GapStudy proposition1_gap(const GeneratorConfig& config, std::size_t t, std::size_t trials);

struct DiagonalComparison {
  double gap_full = 0.0;
  double gap_diag = 0.0;
};

DiagonalComparison diagonalized_comparison(const Instance& instance, std::size_t t);

struct SpectralBound {
  double max_eigenvalue = 0.0;
  double bound_value = 0.0;
  Eigen::VectorXd attained_direction;
  std::size_t iterations = 0;
};

inline constexpr std::size_t kPowerIterationMaxSteps = 200000;

/// Largest eigenvalue of a symmetric PSD matrix by power iteration on the
/// Rayleigh quotient. Stops once the quotient changes by less than
/// `rel_tol` relative; throws NumericError after kPowerIterationMaxSteps.
SpectralBound top_eigenpair(const Eigen::MatrixXd& matrix, double rel_tol = 1e-9,
                            std::uint64_t seed = 1);

struct ForgettingReport {
  double forgetting = 0.0;  // L1(theta) - L1(theta1) = 1/2 d^T H1 d
  double loss = 0.0;        // l1_min + forgetting
  SpectralBound bound;      // 1/2 lambda_max |d|^2
};

ForgettingReport forgetting_and_bound(const Eigen::MatrixXd& h1, const Eigen::VectorXd& theta,
                                      const Eigen::VectorXd& theta1, double l1_min = 0.0);

}  // namespace ivt::quad
