// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "golden_walk.hpp"
#include "ivt/geometry.hpp"
#include "ivt/metrics.hpp"
#include "ivt/quadlab.hpp"
#include "ivt/transform.hpp"
#include "ivtlab/commands.hpp"
#include "test_support.hpp"

namespace {

using namespace ivt;
using Clock = std::chrono::steady_clock;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double inf_norm(const VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

MethodSpec bench_method(Archetype archetype, bool ivt, double lambda, std::uint64_t seed) {
  MethodSpec m;
  m.archetype = archetype;
  m.use_ivt = ivt;
  m.network.hidden_dims = {32};
  m.train.epochs = 20;
  m.train.batch_size = 32;
  m.train.learning_rate = 0.05;
  m.train.ivt_interval = 10;
  m.train.regularizer_strength = lambda;
  m.train.seed = seed;
  return m;
}

Outcome two_task_exactness() {
  const auto start = Clock::now();
  const auto study = quad::proposition1_gap({}, 2, 100);
  const double secs = seconds_since(start);
  std::size_t max_dim = 0;
  for (const auto& t : study.trials) max_dim = std::max(max_dim, t.dim);
  const bool ok = study.trials.size() == 100 && max_dim <= 20 && study.max_gap_full <= 1e-10 &&
                  secs < 5.0;
  return {ok, "max gap " + fmt("%.3g", study.max_gap_full) + " over 100 instances (max dim " +
                  std::to_string(max_dim) + "), " + fmt("%.2f", secs) + " s"};
}

Outcome scalar_example() {
  const std::vector<quad::QuadraticTask> tasks{{MatrixXd::Constant(1, 1, 1.0), VectorXd::Zero(1)},
                                               {MatrixXd::Constant(1, 1, 1.0), VectorXd::Ones(1)}};
  const VectorXd anchor = VectorXd::Zero(1);
  const MatrixXd h1 = tasks[0].A;
  const double theta2 = quad::solve_incremental(tasks[1], anchor, h1)[0];
  const double oracle = quad::solve_oracle(tasks, anchor, h1)[0];
  const double c = transform_coefficient(1.0, 1.0);
  const double transformed = anchor[0] + c * (theta2 - anchor[0]);
  const double err = std::max({std::abs(theta2 - 0.5), std::abs(oracle - 1.0 / 3.0),
                               std::abs(c - 2.0 / 3.0), std::abs(transformed - 1.0 / 3.0)});
  return {err <= 1e-12, "theta2 " + fmt("%.15g", theta2) + ", oracle " + fmt("%.15g", oracle) +
                            ", c " + fmt("%.15g", c) + ", max error " + fmt("%.3g", err)};
}

Outcome midpoint() {
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 100; ++trial) {
    const auto inst = quad::generate_instance({}, trial, 2);
    const VectorXd& anchor = inst.tasks[0].mu;
    const VectorXd& theta = inst.tasks[1].mu;
    const MatrixXd& h = inst.tasks[1].A;
    const VectorXd got = quad::proposition1_predict(anchor, theta, h, h);
    worst = std::max(worst, inf_norm(got - 0.5 * (theta + anchor)));
  }
  return {worst <= 1e-12, "max deviation from midpoint " + fmt("%.3g", worst) + " over 100 instances"};
}

Outcome forgetting_bound() {
  bool dominated = true;
  double worst_eq = 0.0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const auto inst = quad::generate_instance({}, 500 + trial, 1);
    const auto& task = inst.tasks.front();
    Rng rng(mix_seed(77, trial));
    VectorXd theta(task.mu.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = task.mu[i] + rng.normal();
    const auto r = quad::forgetting_and_bound(task.A, theta, task.mu);
    if (r.forgetting > r.bound.bound_value * (1.0 + 1e-12)) dominated = false;

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(task.A);
    const VectorXd top = es.eigenvectors().col(task.A.rows() - 1);
    const auto e = quad::forgetting_and_bound(task.A, task.mu + 1.3 * top, task.mu);
    worst_eq = std::max(worst_eq, std::abs(e.forgetting - e.bound.bound_value) /
                                      std::max(1.0, e.bound.bound_value));
  }
  return {dominated && worst_eq <= 1e-9,
          std::string(dominated ? "bound held on 50 instances" : "bound violated") +
              ", top-eigenvector equality gap " + fmt("%.3g", worst_eq)};
}

Outcome gradient_check() {
  double worst = 0.0;
  std::size_t max_params = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NetworkSpec spec{2 + seed % 3, {3 + seed % 4}, seed % 2 == 0 ? Activation::tanh : Activation::relu,
                     3 + seed % 3};
    const auto params = testing::randomized(build_network(spec, seed), seed + 100);
    const auto anchor = testing::randomized(params, seed + 300);
    const auto fisher = make_fisher(params.layout_ptr(),
                                    testing::randomized(params, seed + 400).values().cwiseAbs2());
    max_params = std::max(max_params, params.size());
    std::vector<int> classes(spec.num_classes);
    for (std::size_t c = 0; c < classes.size(); ++c) classes[c] = static_cast<int>(c);
    const auto d = testing::random_batch(6, spec.input_dim, classes, seed + 200);
    const double lambda = 3.0;

    const auto objective = [&](const ParamVector& q) {
      return mean_loss(q, d.features, d.labels) + anchor_penalty(q, anchor, fisher, lambda).value;
    };
    const VectorXd analytic = loss_and_grad(params, d.features, d.labels).grad.values() +
                              anchor_penalty(params, anchor, fisher, lambda).grad.values();
    const VectorXd fd = testing::finite_difference(objective, params);
    worst = std::max(worst, testing::max_relative_error(analytic, fd));
  }
  return {worst <= 1e-5 && max_params <= 200,
          "max relative error " + fmt("%.3g", worst) + " over 20 seeds (largest net " +
              std::to_string(max_params) + " parameters)"};
}

Outcome coefficient_properties() {
  bool ok = true;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    NetworkSpec spec{3, {5}, Activation::relu, 4};
    const auto layout = build_network(spec, seed).layout_ptr();
    const auto n = static_cast<Eigen::Index>(layout->total_len());
    VectorXd prior(n), current(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      prior[j] = rng.below(4) == 0 ? 0.0 : std::pow(10.0, rng.uniform(-8.0, 2.0));
      current[j] = rng.below(4) == 0 ? 0.0 : std::pow(10.0, rng.uniform(-8.0, 2.0));
    }
    const auto anchor = testing::randomized(build_network(spec, seed), seed + 1);
    const auto cur = testing::randomized(build_network(spec, seed), seed + 2);
    const auto t = build_transform(make_fisher(layout, prior), make_fisher(layout, current), anchor);
    const auto out = apply_transform(t, cur);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = t.coefficients[j];
      if (prior[j] > 0.0) {
        ok = ok && c >= 0.5 && c <= 1.0;
      } else {
        ok = ok && c == 1.0 && out.values()[j] == cur.values()[j];
      }
      const double lo = std::min(anchor.values()[j], cur.values()[j]);
      const double hi = std::max(anchor.values()[j], cur.values()[j]);
      ok = ok && out.values()[j] >= lo && out.values()[j] <= hi;
      ++checked;
    }
  }
  return {ok, std::to_string(checked) + " coordinates over 50 random ledgers"};
}

Outcome golden_trace() {
  const auto stream = testing::golden_stream();
  const auto method = testing::golden_method();
  const auto expected = testing::golden_walk(stream, method);
  TrainerState state;
  bool ok = true;
  for (const auto& task : stream.tasks) {
    train_task(state, task, method);
    const std::size_t i = state.tasks_done - 1;
    ok = ok && state.params->values() == expected.params_after_task[i];
    ok = ok && state.ledger.task(task.task_id).values() == expected.fisher_per_task[i];
  }
  ok = ok && state.ivt_log.size() == expected.ivt_epochs.size();
  for (std::size_t k = 0; ok && k < state.ivt_log.size(); ++k) {
    ok = state.ivt_log[k].epoch == expected.ivt_epochs[k];
  }
  return {ok, "2 tasks x 2 epochs x 3 batches, " + std::to_string(state.ivt_log.size()) +
                  " transforms, bitwise comparison"};
}

Outcome interpolation_findings(const TaskStream& stream) {
  const std::vector<EvalScope> scopes{{"task_1", &stream.tasks[0].test}};
  bool ok = true;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto naive = run_sequence(stream, bench_method(Archetype::naive, false, 0.0, seed));
    const auto& a = naive.checkpoints[0].params;
    const auto& b = naive.checkpoints[1].params;
    const double lh = build_direction(a, b).lambda_hat;
    const auto scan = lmc_scan(a, b, {0.0, 0.5 * lh, lh}, scopes);
    const double a0 = scan.at(0, 0).result.accuracy;
    const double mid = scan.at(1, 0).result.accuracy;
    const bool barrier = mid <= a0 - 0.10;

    const auto oracle =
        run_sequence(stream, bench_method(Archetype::full_replay_oracle, false, 0.0, seed));
    const auto& oa = oracle.checkpoints[0].params;
    const auto& ob = oracle.checkpoints[1].params;
    const auto oscan = lmc_scan(oa, ob, {}, scopes);
    const double o0 = oscan.at(0, 0).result.accuracy;
    double drop = 0.0;
    for (std::size_t k = 0; k < oscan.lambda_grid.size(); ++k) {
      if (oscan.lambda_grid[k] > oscan.direction.lambda_hat) break;
      drop = std::max(drop, o0 - oscan.at(k, 0).result.accuracy);
    }
    const bool stable = drop <= 0.05;
    ok = ok && barrier && stable;
    detail << (seed ? "; " : "") << "seed " << seed << ": naive " << fmt("%.1f", 100 * a0) << "->"
           << fmt("%.1f", 100 * mid) << " at midpoint, oracle max drop " << fmt("%.1f", 100 * drop);
  }
  return {ok, detail.str()};
}

Outcome ivt_benefit(const TaskStream& stream) {
  const auto start = Clock::now();
  double fm_with = 0, fm_without = 0, aa_with = 0, aa_without = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto with = compute_metrics(
        run_sequence(stream, bench_method(Archetype::quad_reg, true, 1e4, seed)).accuracy);
    const auto without = compute_metrics(
        run_sequence(stream, bench_method(Archetype::quad_reg, false, 1e4, seed)).accuracy);
    fm_with += *with.fm / 3;
    fm_without += *without.fm / 3;
    aa_with += with.aa / 3;
    aa_without += without.aa / 3;
  }
  const double secs = seconds_since(start);
  const bool ok = fm_with < fm_without && aa_with > aa_without && secs < 120.0;
  return {ok, "AA " + fmt("%.2f", 100 * aa_with) + " vs " + fmt("%.2f", 100 * aa_without) + ", FM " +
                  fmt("%.2f", 100 * fm_with) + " vs " + fmt("%.2f", 100 * fm_without) +
                  " (with vs without), " + fmt("%.1f", secs) + " s"};
}

Outcome metric_formulas() {
  Rng rng(2024);
  bool ok = true;
  for (int k = 0; k < 200; ++k) {
    const std::size_t T = 2 + rng.below(7);
    AccuracyMatrix m;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> row(t + 1);
      for (auto& v : row) v = static_cast<double>(rng.below(101)) / 100.0;
      m.a.push_back(row);
      m.overall.push_back(rng.uniform());
    }
    double aa = 0.0;
    for (double v : m.overall) aa += v;
    aa /= static_cast<double>(T);
    double fm = 0.0;
    for (std::size_t i = 0; i + 1 < T; ++i) {
      double best = -2.0;
      for (std::size_t t = i; t + 1 < T; ++t) best = std::max(best, m.a[t][i] - m.a[T - 1][i]);
      fm += best;
    }
    fm /= static_cast<double>(T - 1);
    ok = ok && average_accuracy(m) == aa && last_accuracy(m) == m.overall.back() &&
         forgetting_measure(m) == fm;
  }
  AccuracyMatrix hand;
  hand.a = {{0.8}, {0.7, 0.9}};
  hand.overall = {0.8, 0.8};
  const double hand_fm = forgetting_measure(hand);
  ok = ok && std::abs(hand_fm - 0.1) <= 1e-15;
  return {ok, "200 random matrices match brute force; hand example FM " + fmt("%.15g", hand_fm)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome end_to_end_determinism() {
  namespace fs = std::filesystem;
  testing::TempDir tmp("acceptance");
  const fs::path cfg = tmp / "bench.json";
  std::ofstream(cfg) << R"({
  "dataset": {"kind": "gaussian", "dim": 2, "classes": 6, "separation": 5.0,
              "train_per_class": 200, "test_per_class": 100, "seed": 11},
  "stream": {"base_classes": 2, "num_tasks": 3, "class_order_seed": 1993},
  "network": {"hidden": [32], "activation": "relu"},
  "method": {"archetype": "quad_reg", "use_ivt": true, "epochs": 20, "batch_size": 32,
             "learning_rate": 0.05, "ivt_interval": 10, "regularizer_strength": 1e4},
  "seeds": [0]
})";
  std::ostringstream sink;
  std::vector<std::string> matrices, scans;
  for (const char* name : {"first", "second"}) {
    const fs::path out = tmp / name;
    if (ivtlab::run_cli({"run", cfg.string(), "--out", out.string()}, sink, sink) != 0) {
      return {false, std::string("run failed: ") + sink.str()};
    }
    const fs::path ck = out / "seed_0" / "checkpoints";
    const fs::path scan_dir = tmp / (std::string(name) + "_lmc");
    if (ivtlab::run_cli({"lmc", (ck / "task_1.ckpt").string(), (ck / "task_2.ckpt").string(),
                         "--config", cfg.string(), "--out", scan_dir.string()},
                        sink, sink) != 0) {
      return {false, std::string("lmc failed: ") + sink.str()};
    }
    matrices.push_back(slurp(out / "seed_0" / "accuracy_matrix.csv"));
    scans.push_back(slurp(scan_dir / "scan.csv"));
  }
  const bool ok = !matrices[0].empty() && !scans[0].empty() && matrices[0] == matrices[1] &&
                  scans[0] == scans[1];
  return {ok, "accuracy_matrix.csv (" + std::to_string(matrices[0].size()) + " bytes) and scan.csv (" +
                  std::to_string(scans[0].size()) + " bytes) " +
                  (ok ? "byte-identical" : "differ") + " across two invocations"};
}

}  // namespace

int main() {
  const TaskStream bench = testing::gaussian_stream();
  const std::vector<std::function<Outcome()>> criteria{
      two_task_exactness,
      scalar_example,
      midpoint,
      forgetting_bound,
      gradient_check,
      coefficient_properties,
      golden_trace,
      [&] { return interpolation_findings(bench); },
      [&] { return ivt_benefit(bench); },
      metric_formulas,
      end_to_end_determinism,
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu: %s\n", o.pass ? "PASS" : "FAIL", i + 1, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
