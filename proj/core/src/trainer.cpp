#include "ivt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <string>

#include "ivt/rng.hpp"
#include "ivt/transform.hpp"

namespace ivt {

std::string_view to_string(Archetype archetype) {
  switch (archetype) {
    case Archetype::naive: return "naive";
    case Archetype::quad_reg: return "quad_reg";
    case Archetype::replay: return "replay";
    case Archetype::quad_reg_replay: return "quad_reg_replay";
    case Archetype::full_replay_oracle: return "full_replay_oracle";
    case Archetype::joint_mtl: return "joint_mtl";
  }
  return "naive";
}

Archetype archetype_from_string(std::string_view name) {
  for (Archetype a : {Archetype::naive, Archetype::quad_reg, Archetype::replay,
                      Archetype::quad_reg_replay, Archetype::full_replay_oracle,
                      Archetype::joint_mtl}) {
    if (to_string(a) == name) return a;
  }
  throw PreconditionError("unknown archetype '" + std::string(name) + "'");
}

bool MethodSpec::uses_penalty() const {
  switch (archetype) {
    case Archetype::quad_reg:
    case Archetype::quad_reg_replay: return true;
    case Archetype::full_replay_oracle: return train.regularizer_strength > 0.0;
    default: return false;
  }
}

bool MethodSpec::uses_replay() const {
  return archetype == Archetype::replay || archetype == Archetype::quad_reg_replay;
}

void MethodSpec::validate() const {
  train.validate();
  if (memory && memory->per_class_budget == 0) {
    throw PreconditionError("replay budget must be at least 1");
  }
  for (std::size_t h : network.hidden_dims) {
    if (h == 0) throw PreconditionError("hidden layer width must be positive");
  }
}

PenaltyValue anchor_penalty(const ParamVector& params, const ParamVector& anchor,
                            const FisherDiagonal& fisher, double strength) {
  const LayoutPtr& layout = params.layout_ptr();
  const Eigen::VectorXd a = reconcile(anchor, layout, 0.0).values();
  const Eigen::VectorXd f = reconcile(fisher, layout, 0.0).values();
  const Eigen::VectorXd diff = params.values() - a;
  const Eigen::VectorXd weighted = f.cwiseProduct(diff);
  PenaltyValue out;
  out.value = 0.5 * strength * weighted.dot(diff);
  out.grad = GradientVector(layout, strength * weighted);
  return out;
}

namespace {

[[noreturn]] void rethrow_with_context(int task_id) {
  const std::string ctx = "task " + std::to_string(task_id) + ": ";
  try {
    throw;
  } catch (const ShapeError& e) {
    throw ShapeError(ctx + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError(ctx + e.what());
  } catch (const NumericError& e) {
    throw NumericError(ctx + e.what());
  } catch (const FormatError& e) {
    throw FormatError(ctx + e.what());
  } catch (const Error& e) {
    throw Error(ctx + e.what());
  }
}

void gather(const LabeledDataset& data, const std::vector<std::size_t>& rows, std::size_t begin,
            std::size_t end, Eigen::MatrixXd& x, std::vector<int>& y) {
  const auto n = static_cast<Eigen::Index>(end - begin);
  x.resize(n, data.features.cols());
  y.resize(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    x.row(static_cast<Eigen::Index>(i - begin)) = data.features.row(r);
    y[i - begin] = data.labels[rows[i]];
  }
}

void prepare_head(TrainerState& state, const Task& task, const MethodSpec& method) {
  const std::uint64_t seed = method.train.seed;
  if (!state.params) {
    NetworkSpec spec = method.network;
    spec.input_dim = task.train.dim();
    spec.num_classes = task.class_ids.size();
    state.params = build_network(spec, task.class_ids, mix_seed(seed, 100));
    state.optimizer.reset();
    return;
  }
  std::vector<int> fresh;
  for (int c : task.class_ids) {
    if (!state.params->layout().has_class(c)) fresh.push_back(c);
  }
  const LayoutPtr before = state.params->layout_ptr();
  if (!fresh.empty()) {
    state.params = expand_head(*state.params, fresh,
                               mix_seed(seed, 500 + static_cast<std::uint64_t>(task.task_id)));
  }
  if (method.train.reset_optimizer_per_task) {
    state.optimizer.reset();
  } else if (!fresh.empty()) {
    state.optimizer = reconcile_state(state.optimizer, *before, state.params->layout());
  }
}

void train_task_impl(TrainerState& state, const Task& task, const MethodSpec& method,
                     bool oracle_data) {
  method.validate();
  if (task.train.empty()) throw PreconditionError("task has no training examples");
  const TrainConfig& cfg = method.train;
  const auto t = static_cast<std::uint64_t>(task.task_id);

  prepare_head(state, task, method);
  {
    std::set<int> seen(state.seen_classes.begin(), state.seen_classes.end());
    seen.insert(task.class_ids.begin(), task.class_ids.end());
    state.seen_classes.assign(seen.begin(), seen.end());
  }
  ParamVector& params = *state.params;
  const LayoutPtr layout = params.layout_ptr();
  const ClassMask mask = state.seen_classes;

  const bool has_prior = state.anchor.has_value() && !state.ledger.empty();
  std::optional<ParamVector> anchor;
  if (has_prior) anchor = reconcile(*state.anchor, layout, 0.0);
  const FisherDiagonal prior_cumulative = state.ledger.cumulative_in(layout);
  const bool penalize = has_prior && method.uses_penalty() && cfg.regularizer_strength > 0.0;
  const bool ivt_active = has_prior && method.use_ivt;

  LabeledDataset pooled;
  const LabeledDataset* data = &task.train;
  if (oracle_data && !state.history.empty()) {
    std::vector<const LabeledDataset*> parts;
    for (const auto& h : state.history) parts.push_back(&h);
    parts.push_back(&task.train);
    pooled = concatenate(parts, Split::train);
    data = &pooled;
  }

  LabeledDataset replay;
  const bool replaying = !oracle_data && method.uses_replay() && state.memory &&
                         state.memory->total() > 0;
  if (replaying) replay = state.memory->as_dataset();
  Rng replay_rng(mix_seed(cfg.seed, 300 + t));

  const std::size_t n = data->size();
  std::vector<std::size_t> order(n);
  std::optional<FisherDiagonal> task_fisher;
  Eigen::VectorXd fisher_sum;
  std::size_t fisher_epochs = 0;
  Eigen::MatrixXd x, rx;
  std::vector<int> y, ry;

  for (std::size_t m = 1; m <= cfg.epochs; ++m) {
    if (cfg.shuffle) {
      order = Rng(mix_seed(mix_seed(cfg.seed, 200 + t), m)).permutation(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
    }
    FisherAccumulator acc = begin_epoch_accumulator(layout);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      gather(*data, order, begin, end, x, y);
      LossAndGrad lg = loss_and_grad(params, x, y, mask);

      if (cfg.fisher_mode == FisherMode::batch_mean_sq) {
        accumulate_batch(acc, std::span<const GradientVector>(&lg.grad, 1), cfg.fisher_mode);
      } else {
        const auto per = per_example_grads(params, x, y, mask);
        accumulate_batch(acc, per, cfg.fisher_mode);
      }

      Eigen::VectorXd g = lg.grad.values();
      if (replaying) {
        std::vector<std::size_t> picks(cfg.batch_size);
        for (auto& p : picks) p = replay_rng.below(replay.size());
        gather(replay, picks, 0, picks.size(), rx, ry);
        g += loss_and_grad(params, rx, ry, mask).grad.values();
      }
      if (penalize) {
        g += anchor_penalty(params, *anchor, prior_cumulative, cfg.regularizer_strength)
                 .grad.values();
      }
      optimizer_step(params, GradientVector(layout, std::move(g)), cfg, state.optimizer);
      if (!all_finite(params.values())) throw NumericError("parameters became non-finite");
    }

    FisherDiagonal epoch_fisher = finalize_epoch(acc);
    if (cfg.fisher_source == FisherSource::running_mean) {
      if (fisher_epochs == 0) {
        fisher_sum = epoch_fisher.values();
      } else {
        fisher_sum += epoch_fisher.values();
      }
      ++fisher_epochs;
      task_fisher = make_fisher(layout, fisher_sum / static_cast<double>(fisher_epochs));
    } else {
      task_fisher = std::move(epoch_fisher);
    }

    if (ivt_active && schedule_hook(m, cfg.ivt_interval)) {
      const IncrementTransform tr = build_transform(prior_cumulative, *task_fisher, *anchor);
      ParamVector moved = apply_transform(tr, params);
      IvtFiring firing;
      firing.task_id = task.task_id;
      firing.epoch = m;
      firing.mean_coefficient = tr.coefficients.mean();
      firing.displacement_norm = (moved.values() - params.values()).norm();
      state.ivt_log.push_back(firing);
      params = std::move(moved);
      if (cfg.reset_optimizer_on_ivt) state.optimizer.reset();
    }
  }

  state.ledger = commit_task(state.ledger, task.task_id, *task_fisher);
  state.anchor = params;
  if (oracle_data) state.history.push_back(task.train);
  if (!oracle_data && method.uses_replay()) {
    if (!state.memory) {
      const MemorySettings ms = method.memory.value_or(MemorySettings{});
      state.memory = ReplayMemory{ms.per_class_budget, ms.policy, mix_seed(cfg.seed, 400), {}};
    }
    state.memory = update_memory(std::move(*state.memory), task.train, task.class_ids);
  }
  ++state.tasks_done;
}

Task merge_tasks(const TaskStream& stream, std::size_t count) {
  Task merged;
  merged.task_id = 1;
  std::vector<const LabeledDataset*> train, test;
  for (std::size_t i = 0; i < count; ++i) {
    const Task& t = stream.tasks[i];
    merged.class_ids.insert(merged.class_ids.end(), t.class_ids.begin(), t.class_ids.end());
    train.push_back(&t.train);
    test.push_back(&t.test);
  }
  merged.train = concatenate(train, Split::train);
  merged.test = concatenate(test, Split::test);
  return merged;
}

TrainerState joint_state(const TaskStream& stream, std::size_t count, const MethodSpec& method) {
  if (count == 0 || count > stream.size()) throw PreconditionError("joint training needs tasks");
  TrainerState state;
  MethodSpec plain = method;
  plain.use_ivt = false;
  try {
    train_task_impl(state, merge_tasks(stream, count), plain, false);
  } catch (const Error&) {
    rethrow_with_context(static_cast<int>(count));
  }
  return state;
}

}  // namespace

void train_task(TrainerState& state, const Task& task, const MethodSpec& method) {
  try {
    train_task_impl(state, task, method, method.archetype == Archetype::full_replay_oracle);
  } catch (const Error&) {
    rethrow_with_context(task.task_id);
  }
}

void train_full_replay_oracle(TrainerState& state, const Task& task, const MethodSpec& method) {
  try {
    train_task_impl(state, task, method, true);
  } catch (const Error&) {
    rethrow_with_context(task.task_id);
  }
}

ParamVector train_joint_mtl(const TaskStream& stream, const MethodSpec& method) {
  return *joint_state(stream, stream.size(), method).params;
}

StepEvaluation evaluate_step(const ParamVector& params, const TaskStream& stream, std::size_t t) {
  if (t == 0 || t > stream.size()) throw PreconditionError("evaluate_step: task index out of range");
  const std::vector<int> scope = stream.classes_up_to(t);
  StepEvaluation out;
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < t; ++i) {
    const AccuracyCount c = count_correct(params, stream.tasks[i].test, scope);
    out.per_task.push_back(c.fraction());
    correct += c.correct;
    total += c.total;
  }
  out.overall = AccuracyCount{correct, total}.fraction();
  return out;
}

RunRecord run_sequence(const TaskStream& stream, const MethodSpec& method,
                       std::string config_digest) {
  stream.validate();
  method.validate();
  RunRecord record;
  record.config_digest = std::move(config_digest);
  TrainerState state;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Task& task = stream.tasks[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      if (method.archetype == Archetype::joint_mtl) {
        state = joint_state(stream, i + 1, method);
      } else {
        train_task(state, task, method);
      }
      const StepEvaluation ev = evaluate_step(*state.params, stream, i + 1);
      record.accuracy.a.push_back(ev.per_task);
      record.accuracy.overall.push_back(ev.overall);
    } catch (const Error& e) {
      record.ivt_log = state.ivt_log;
      throw RunFailure(e.what(), std::move(record));
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    record.seconds_per_task.push_back(elapsed.count());
    record.checkpoints.push_back({task.task_id, *state.params, state.ledger, state.optimizer});
  }
  record.ivt_log = state.ivt_log;
  return record;
}

}  // namespace ivt
