#include <benchmark/benchmark.h>

#include "ivt/dataset.hpp"
#include "ivt/network.hpp"
#include "ivt/rng.hpp"
#include "ivt/stream.hpp"
#include "ivt/trainer.hpp"

namespace {

using namespace ivt;

LabeledDataset random_rows(std::size_t n, std::size_t dim, int classes, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset d;
  d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < d.features.size(); ++i) d.features.data()[i] = rng.normal();
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng.below(classes)));
  return d;
}

// Batch of 32 through input -> hidden -> 10 classes.
void BM_LossAndGrad(benchmark::State& st) {
  const auto dim = static_cast<std::size_t>(st.range(0));
  const auto hidden = static_cast<std::size_t>(st.range(1));
  const auto params = build_network({dim, {hidden}, Activation::relu, 10}, 0);
  const auto batch = random_rows(32, dim, 10, 1);
  for (auto _ : st) {
    benchmark::DoNotOptimize(loss_and_grad(params, batch.features, batch.labels));
  }
  st.counters["params"] = static_cast<double>(params.size());
}
BENCHMARK(BM_LossAndGrad)->Args({2, 32})->Args({64, 128})->Args({784, 100});

void BM_PerExampleGradients(benchmark::State& st) {
  const auto params = build_network({64, {128}, Activation::relu, 10}, 0);
  const auto batch = random_rows(32, 64, 10, 1);
  for (auto _ : st) {
    benchmark::DoNotOptimize(per_example_grads(params, batch.features, batch.labels));
  }
}
BENCHMARK(BM_PerExampleGradients);

// One task of the synthetic benchmark, with and without the transform.
void BM_TrainSecondTask(benchmark::State& st) {
  GaussianSpec g;
  g.classes = 6;
  g.separation = 5.0;
  g.train_per_class = 200;
  g.test_per_class = 100;
  g.seed = 11;
  const auto data = synth_gaussian_tasks(g);
  const auto stream = make_incremental_stream(data.train, data.test, 2, 3, 1993);
  MethodSpec m;
  m.archetype = Archetype::quad_reg;
  m.use_ivt = st.range(0) != 0;
  m.network.hidden_dims = {32};
  m.train.epochs = 20;
  m.train.batch_size = 32;
  m.train.learning_rate = 0.05;
  m.train.ivt_interval = 10;
  m.train.regularizer_strength = 1e4;
  TrainerState first;
  train_task(first, stream.tasks[0], m);
  for (auto _ : st) {
    TrainerState s = first;
    train_task(s, stream.tasks[1], m);
    benchmark::DoNotOptimize(s.params);
  }
}
BENCHMARK(BM_TrainSecondTask)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
