#include <benchmark/benchmark.h>

#include <vector>

#include "ivt/quadlab.hpp"

namespace {

using namespace ivt::quad;

void BM_SolveOracle(benchmark::State& st) {
  const auto dim = static_cast<std::size_t>(st.range(0));
  std::vector<QuadraticTask> tasks{random_psd_task(1, dim), random_psd_task(2, dim),
                                   random_psd_task(3, dim)};
  const Eigen::VectorXd anchor = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  const Eigen::MatrixXd h = tasks[0].A;
  for (auto _ : st) benchmark::DoNotOptimize(solve_oracle(tasks, anchor, h));
}
BENCHMARK(BM_SolveOracle)->Arg(5)->Arg(20)->Arg(64);

void BM_Predict(benchmark::State& st) {
  const auto dim = static_cast<std::size_t>(st.range(0));
  const auto a = random_psd_task(1, dim);
  const auto b = random_psd_task(2, dim);
  for (auto _ : st) benchmark::DoNotOptimize(proposition1_predict(a.mu, b.mu, a.A, a.A + b.A));
}
BENCHMARK(BM_Predict)->Arg(5)->Arg(20)->Arg(64);

void BM_TopEigenpair(benchmark::State& st) {
  const auto task = random_psd_task(7, static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(top_eigenpair(task.A));
}
BENCHMARK(BM_TopEigenpair)->Arg(20)->Arg(64);

void BM_GapStudy(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(proposition1_gap({}, 2, 100));
}
BENCHMARK(BM_GapStudy)->Unit(benchmark::kMillisecond);

}  // namespace
