#include <benchmark/benchmark.h>

#include "ivt/fisher.hpp"
#include "ivt/network.hpp"
#include "ivt/rng.hpp"
#include "ivt/transform.hpp"

namespace {

using namespace ivt;

ParamVector filled(ParamVector p, std::uint64_t seed) {
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.values().size(); ++i) p.values()[i] = rng.normal();
  return p;
}

FisherDiagonal random_fisher(const ParamVector& like, std::uint64_t seed) {
  return make_fisher(like.layout_ptr(), filled(like, seed).values().cwiseAbs2());
}

// 784 -> 100 -> 10: 79,510 coordinates.
const NetworkSpec kMlp{784, {100}, Activation::relu, 10};

void BM_BuildTransform(benchmark::State& st) {
  const auto anchor = filled(build_network(kMlp, 0), 1);
  const auto prior = random_fisher(anchor, 2);
  const auto current = random_fisher(anchor, 3);
  for (auto _ : st) benchmark::DoNotOptimize(build_transform(prior, current, anchor));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(anchor.size()));
}
BENCHMARK(BM_BuildTransform);

void BM_ApplyTransform(benchmark::State& st) {
  const auto anchor = filled(build_network(kMlp, 0), 1);
  const auto current = filled(anchor, 4);
  const auto t = build_transform(random_fisher(anchor, 2), random_fisher(anchor, 3), anchor);
  for (auto _ : st) benchmark::DoNotOptimize(apply_transform(t, current));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(anchor.size()));
}
BENCHMARK(BM_ApplyTransform);

void BM_CommitTask(benchmark::State& st) {
  const auto p = build_network(kMlp, 0);
  const auto f = random_fisher(p, 5);
  FisherLedger ledger = commit_task({}, 1, f);
  for (auto _ : st) benchmark::DoNotOptimize(commit_task(ledger, 2, f));
}
BENCHMARK(BM_CommitTask);

}  // namespace
