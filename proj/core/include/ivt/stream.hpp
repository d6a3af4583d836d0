#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivt/dataset.hpp"

namespace ivt {

struct Task {
  int task_id = 0;  // 1-based position in the stream
  std::vector<int> class_ids;
  LabeledDataset train;
  LabeledDataset test;
};

/// Ordered class-incremental tasks with disjoint class sets.
struct TaskStream {
  std::vector<Task> tasks;
  std::vector<int> class_order;
  std::uint64_t class_order_seed = 0;

  std::size_t size() const { return tasks.size(); }
  std::vector<int> classes_up_to(std::size_t task_count) const;

  // Throws PreconditionError when classes overlap or an example's label is
  // outside its task.
  void validate() const;
};

// Class counts per task: base first, the rest split evenly.
std::vector<std::size_t> task_sizes(std::size_t total_classes, std::size_t base_classes,
                                    std::size_t num_tasks);

/// Splits a labelled dataset into an incremental stream.
///
/// The distinct labels are shuffled with `seed`; the first `base_classes`
/// form task 1 and the remainder is divided evenly over the other tasks.
/// Setting base_classes equal to the per-task count gives uniform splits.
TaskStream make_incremental_stream(const LabeledDataset& train, const LabeledDataset& test,
                                   std::size_t base_classes, std::size_t num_tasks,
                                   std::uint64_t seed);

nlohmann::json stream_manifest(const TaskStream& stream);

}  // namespace ivt
