#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ivt/fisher.hpp"
#include "ivt/metrics.hpp"
#include "ivt/network.hpp"
#include "ivt/optimizer.hpp"
#include "ivt/replay_memory.hpp"
#include "ivt/stream.hpp"

namespace ivt {

/// Training recipes for a class-incremental stream.
///
///   naive              fine-tune on the new task only
///   quad_reg           + lambda/2 * sum_j Fbar_j (theta_j - anchor_j)^2
///   replay             + cross-entropy on an exemplar batch per step
///   quad_reg_replay    both of the above
///   full_replay_oracle every batch drawn from all tasks seen so far; the
///                      anchor penalty is kept when regularizer_strength > 0
///   joint_mtl          train from scratch on the union of all tasks
enum class Archetype { naive, quad_reg, replay, quad_reg_replay, full_replay_oracle, joint_mtl };

std::string_view to_string(Archetype archetype);
Archetype archetype_from_string(std::string_view name);

struct MemorySettings {
  std::size_t per_class_budget = 20;
  MemoryPolicy policy = MemoryPolicy::random;
};

struct MethodSpec {
  Archetype archetype = Archetype::naive;
  bool use_ivt = false;
  TrainConfig train;
  std::optional<MemorySettings> memory;
  // input_dim and num_classes are taken from the stream.
  NetworkSpec network;

  bool uses_penalty() const;
  bool uses_replay() const;
  void validate() const;
};

struct IvtFiring {
  int task_id = 0;
  std::size_t epoch = 0;
  double mean_coefficient = 0.0;
  double displacement_norm = 0.0;
};

/// Everything carried from one task to the next.
struct TrainerState {
  std::optional<ParamVector> params;
  std::optional<ParamVector> anchor;  // output of the previous task
  FisherLedger ledger;
  OptimizerState optimizer;
  std::optional<ReplayMemory> memory;
  std::vector<LabeledDataset> history;  // kept for the full-replay oracle
  std::vector<int> seen_classes;
  std::size_t tasks_done = 0;
  std::vector<IvtFiring> ivt_log;
};

struct PenaltyValue {
  double value = 0.0;
  GradientVector grad;
};

/// strength/2 * sum_j fisher_j (params_j - anchor_j)^2 and its gradient.
/// `fisher` and `anchor` are padded to the layout of `params`.
PenaltyValue anchor_penalty(const ParamVector& params, const ParamVector& anchor,
                            const FisherDiagonal& fisher, double strength);

/// Trains one task in place: grows the head, runs the epoch/batch loop,
/// accumulates the epoch Fisher, fires the IVT hook on schedule (never on the
/// first task) and commits the task Fisher to the ledger.
void train_task(TrainerState& state, const Task& task, const MethodSpec& method);

// train_task with the oracle data rule, regardless of method.archetype.
void train_full_replay_oracle(TrainerState& state, const Task& task, const MethodSpec& method);

// Single run on the union of all tasks' training data with the full head.
ParamVector train_joint_mtl(const TaskStream& stream, const MethodSpec& method);

struct TaskCheckpoint {
  int task_id = 0;
  ParamVector params;
  FisherLedger ledger;
  OptimizerState optimizer;
};

struct RunRecord {
  std::vector<TaskCheckpoint> checkpoints;
  AccuracyMatrix accuracy;
  std::string config_digest;
  std::vector<double> seconds_per_task;
  std::vector<IvtFiring> ivt_log;
};

/// Raised by run_sequence; carries the tasks completed before the failure.
class RunFailure : public Error {
 public:
  RunFailure(const std::string& what, RunRecord partial)
      : Error(what), partial_(std::move(partial)) {}
  const RunRecord& partial() const { return partial_; }

 private:
  RunRecord partial_;
};

// Evaluation of one model after task `t` (1-based): a row of the matrix.
struct StepEvaluation {
  std::vector<double> per_task;
  double overall = 0.0;
};

StepEvaluation evaluate_step(const ParamVector& params, const TaskStream& stream, std::size_t t);

RunRecord run_sequence(const TaskStream& stream, const MethodSpec& method,
                       std::string config_digest = {});

}  // namespace ivt
