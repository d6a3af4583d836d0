#include <gtest/gtest.h>

#include "golden_walk.hpp"
#include "ivt/metrics.hpp"
#include "ivt/trainer.hpp"
#include "test_support.hpp"

namespace ivt {
namespace {

MethodSpec bench_method(Archetype archetype, bool ivt = false, double lambda = 1e4,
                        std::uint64_t seed = 0) {
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

TaskStream first_tasks(const TaskStream& s, std::size_t n) {
  TaskStream out = s;
  out.tasks.resize(n);
  out.class_order = out.classes_up_to(n);
  return out;
}

TEST(Trainer, IvtOnFirstTaskChangesNothing) {
  const auto stream = testing::gaussian_stream();
  auto with = bench_method(Archetype::quad_reg, true);
  with.train.ivt_interval = 1;
  const auto without = bench_method(Archetype::quad_reg, false);
  TrainerState a, b;
  train_task(a, stream.tasks[0], with);
  train_task(b, stream.tasks[0], without);
  EXPECT_EQ(a.params->values(), b.params->values());
  EXPECT_TRUE(a.ivt_log.empty());
  EXPECT_EQ(a.ledger.cumulative().values(), b.ledger.cumulative().values());
}

TEST(Trainer, GoldenTraceMatchesHandSteppedWalk) {
  const auto stream = testing::golden_stream();
  const auto method = testing::golden_method();
  const auto expected = testing::golden_walk(stream, method);

  TrainerState state;
  for (const auto& task : stream.tasks) {
    train_task(state, task, method);
    const std::size_t i = state.tasks_done - 1;
    ASSERT_EQ(state.params->values().size(), expected.params_after_task[i].size());
    EXPECT_EQ(state.params->values(), expected.params_after_task[i]) << "task " << task.task_id;
    EXPECT_EQ(state.ledger.task(task.task_id).values(), expected.fisher_per_task[i]);
  }
  ASSERT_EQ(state.ivt_log.size(), expected.ivt_epochs.size());
  for (std::size_t k = 0; k < state.ivt_log.size(); ++k) {
    EXPECT_EQ(state.ivt_log[k].epoch, expected.ivt_epochs[k]);
    EXPECT_EQ(state.ivt_log[k].task_id, 2);
  }
}

TEST(Trainer, AnchorPenaltyGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    NetworkSpec spec{3, {4}, Activation::tanh, 3};
    const auto params = testing::randomized(build_network(spec, seed), seed + 1);
    const auto anchor = testing::randomized(build_network(spec, seed), seed + 2);
    const auto fisher =
        make_fisher(params.layout_ptr(), testing::randomized(params, seed + 3).values().cwiseAbs2());
    const double lambda = 7.5;
    const auto pv = anchor_penalty(params, anchor, fisher, lambda);
    const auto fd = testing::finite_difference(
        [&](const ParamVector& q) { return anchor_penalty(q, anchor, fisher, lambda).value; },
        params, 1e-3);
    EXPECT_LE(testing::max_relative_error(pv.grad.values(), fd), 1e-6);
  }
}

TEST(Trainer, PenaltyPadsAnchorAndFisherOnNewHeadRows) {
  NetworkSpec spec{2, {3}, Activation::relu, 2};
  const auto anchor = testing::randomized(build_network(spec, 0), 1);
  const auto fisher = make_fisher(anchor.layout_ptr(),
                                  Eigen::VectorXd::Ones(static_cast<Eigen::Index>(anchor.size())));
  const std::vector<int> added{2};
  const auto params = testing::randomized(expand_head(anchor, added, 0), 5);
  const auto pv = anchor_penalty(params, anchor, fisher, 2.0);
  const auto col = static_cast<Eigen::Index>(params.layout().column_of(2));
  EXPECT_EQ(pv.grad.matrix("head.weight").row(col).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(pv.grad.size(), params.size());
}

TEST(Trainer, HugePenaltyPinsSharedCoordinatesToAnchor) {
  const auto stream = testing::gaussian_stream();
  auto pinned = bench_method(Archetype::quad_reg, false, 1e9);
  pinned.train.optimizer = OptimizerKind::adam;
  pinned.train.learning_rate = 1e-4;
  auto free = pinned;
  free.archetype = Archetype::naive;

  auto shared_drift = [&](const MethodSpec& m) {
    TrainerState s;
    train_task(s, stream.tasks[0], m);
    const ParamVector anchor = *s.params;
    const FisherDiagonal f1 = s.ledger.cumulative();
    train_task(s, stream.tasks[1], m);
    const auto a = reconcile(anchor, s.params->layout_ptr(), 0.0).values();
    const auto f = reconcile(f1, s.params->layout_ptr(), 0.0).values();
    double drift = 0.0;
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      if (f[j] > 0.0) drift = std::max(drift, std::abs(s.params->values()[j] - a[j]));
    }
    return drift;
  };
  const double pinned_drift = shared_drift(pinned);
  EXPECT_LE(pinned_drift, 1e-3);
  EXPECT_GT(shared_drift(free), 10.0 * pinned_drift);
}

TEST(Trainer, NaiveFineTuningForgetsTheFirstTask) {
  const auto stream = first_tasks(testing::gaussian_stream(), 2);
  const auto record = run_sequence(stream, bench_method(Archetype::naive));
  EXPECT_GE(record.accuracy.a[0][0] - record.accuracy.a[1][0], 0.20);
}

TEST(Trainer, SingleTaskStreamGivesOneByOneMatrix) {
  const auto stream = first_tasks(testing::gaussian_stream(), 1);
  const auto record = run_sequence(stream, bench_method(Archetype::quad_reg, true));
  ASSERT_EQ(record.accuracy.tasks(), 1u);
  EXPECT_EQ(record.accuracy.a[0].size(), 1u);
  EXPECT_EQ(record.checkpoints.size(), 1u);
}

TEST(Trainer, SameSeedSameAccuracyMatrix) {
  const auto stream = testing::gaussian_stream();
  for (const auto arch : {Archetype::quad_reg, Archetype::replay, Archetype::full_replay_oracle}) {
    const auto m = bench_method(arch, true);
    const auto a = run_sequence(stream, m);
    const auto b = run_sequence(stream, m);
    EXPECT_EQ(a.accuracy.a, b.accuracy.a);
    EXPECT_EQ(a.checkpoints.back().params.values(), b.checkpoints.back().params.values());
  }
}

TEST(Trainer, OracleEqualsPenalizedTrainingOnTheUnion) {
  const auto stream = testing::gaussian_stream();
  const auto oracle = bench_method(Archetype::full_replay_oracle, false, 1e3);
  const auto quad = bench_method(Archetype::quad_reg, false, 1e3);

  TrainerState o, q;
  train_task(o, stream.tasks[0], oracle);
  train_task(q, stream.tasks[0], quad);
  ASSERT_EQ(o.params->values(), q.params->values());

  Task uni = stream.tasks[1];
  uni.train = concatenate({&stream.tasks[0].train, &stream.tasks[1].train}, Split::train);
  train_task(o, stream.tasks[1], oracle);
  train_task(q, uni, quad);
  EXPECT_EQ(o.params->values(), q.params->values());
}

TEST(Trainer, OracleOnOneTaskIsPlainTraining) {
  const auto stream = testing::gaussian_stream();
  TrainerState o, n;
  train_full_replay_oracle(o, stream.tasks[0], bench_method(Archetype::naive));
  train_task(n, stream.tasks[0], bench_method(Archetype::naive));
  EXPECT_EQ(o.params->values(), n.params->values());
}

TEST(Trainer, OracleRetainsAtLeastAsMuchAsNaive) {
  const auto stream = first_tasks(testing::gaussian_stream(), 2);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto o = run_sequence(stream, bench_method(Archetype::full_replay_oracle, false, 0.0, seed));
    const auto n = run_sequence(stream, bench_method(Archetype::naive, false, 0.0, seed));
    EXPECT_GE(o.accuracy.a[1][0], n.accuracy.a[1][0]) << "seed " << seed;
  }
}

TEST(Trainer, OracleDiffersFromJointTraining) {
  const auto stream = first_tasks(testing::gaussian_stream(), 2);
  const auto m = bench_method(Archetype::full_replay_oracle, false, 0.0);
  const auto oracle = run_sequence(stream, m);
  const auto joint = train_joint_mtl(stream, m);
  EXPECT_NE(oracle.checkpoints.back().params.values(), joint.values());
}

TEST(Trainer, JointOnOneTaskIsPlainTraining) {
  const auto stream = first_tasks(testing::gaussian_stream(), 1);
  const auto m = bench_method(Archetype::joint_mtl);
  TrainerState plain;
  train_task(plain, stream.tasks[0], bench_method(Archetype::naive));
  EXPECT_EQ(train_joint_mtl(stream, m).values(), plain.params->values());
  EXPECT_EQ(train_joint_mtl(stream, m).values(), train_joint_mtl(stream, m).values());
}

TEST(Trainer, JointBeatsSequentialMethods) {
  const auto stream = first_tasks(testing::gaussian_stream(), 2);
  double joint = 0.0, naive = 0.0, quad = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    joint += last_accuracy(run_sequence(stream, bench_method(Archetype::joint_mtl, false, 0.0, seed)).accuracy);
    naive += average_accuracy(run_sequence(stream, bench_method(Archetype::naive, false, 0.0, seed)).accuracy);
    quad += average_accuracy(run_sequence(stream, bench_method(Archetype::quad_reg, true, 1e4, seed)).accuracy);
  }
  EXPECT_GE(joint, naive);
  EXPECT_GE(joint, quad);
}

TEST(Trainer, ReplayMemoryStaysWithinBudget) {
  const auto stream = testing::gaussian_stream();
  for (const auto policy : {MemoryPolicy::random, MemoryPolicy::herding}) {
    auto m = bench_method(Archetype::quad_reg_replay, true);
    m.memory = MemorySettings{7, policy};
    TrainerState s;
    for (const auto& task : stream.tasks) {
      train_task(s, task, m);
      ASSERT_TRUE(s.memory.has_value());
      for (const auto& [cls, data] : s.memory->store) EXPECT_LE(data.size(), 7u);
      EXPECT_EQ(s.memory->store.size(), s.seen_classes.size());
    }
  }
}

TEST(Trainer, FailureKeepsCompletedTasks) {
  const auto stream = testing::gaussian_stream();
  auto m = bench_method(Archetype::quad_reg, false, 1e12);
  m.train.learning_rate = 0.5;
  try {
    run_sequence(stream, m);
    FAIL() << "expected divergence";
  } catch (const RunFailure& e) {
    EXPECT_EQ(e.partial().accuracy.tasks(), 1u);
    EXPECT_EQ(e.partial().checkpoints.size(), 1u);
    EXPECT_NE(std::string(e.what()).find("task 2"), std::string::npos);
  }
}

TEST(Trainer, ErrorsCarryTaskContext) {
  const auto stream = testing::gaussian_stream();
  Task empty = stream.tasks[0];
  empty.task_id = 4;
  empty.train = LabeledDataset{};
  TrainerState s;
  try {
    train_task(s, empty, bench_method(Archetype::naive));
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("task 4: ", 0), 0u);
  }
}

TEST(Trainer, ValidatesMethod) {
  auto m = bench_method(Archetype::naive);
  m.train.ivt_interval = 0;
  EXPECT_THROW(m.validate(), PreconditionError);
  m = bench_method(Archetype::naive);
  m.train.momentum = 1.0;
  EXPECT_THROW(m.validate(), PreconditionError);
  EXPECT_THROW(archetype_from_string("ewc"), PreconditionError);
}

}  // namespace
}  // namespace ivt
