#include "ivt/stream.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "ivt/error.hpp"
#include "ivt/rng.hpp"

namespace ivt {

std::vector<int> TaskStream::classes_up_to(std::size_t task_count) const {
  if (task_count > tasks.size()) throw PreconditionError("classes_up_to: task count out of range");
  std::vector<int> out;
  for (std::size_t t = 0; t < task_count; ++t) {
    out.insert(out.end(), tasks[t].class_ids.begin(), tasks[t].class_ids.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void TaskStream::validate() const {
  std::set<int> seen;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Task& task = tasks[t];
    if (task.task_id != static_cast<int>(t + 1)) {
      throw PreconditionError("task ids must be 1..T in stream order");
    }
    if (task.class_ids.empty()) throw PreconditionError("task with no classes");
    for (int c : task.class_ids) {
      if (!seen.insert(c).second) {
        throw PreconditionError("class " + std::to_string(c) + " appears in more than one task");
      }
    }
    const std::set<int> own(task.class_ids.begin(), task.class_ids.end());
    for (const LabeledDataset* d : {&task.train, &task.test}) {
      d->validate();
      for (int y : d->labels) {
        if (own.count(y) == 0) {
          throw PreconditionError("task " + std::to_string(task.task_id) + " holds label " +
                                  std::to_string(y) + " outside its classes");
        }
      }
    }
  }
  if (!class_order.empty()) {
    const std::set<int> ordered(class_order.begin(), class_order.end());
    if (ordered != seen || ordered.size() != class_order.size()) {
      throw PreconditionError("class order does not match the union of task classes");
    }
  }
}

std::vector<std::size_t> task_sizes(std::size_t total_classes, std::size_t base_classes,
                                    std::size_t num_tasks) {
  if (num_tasks == 0) throw PreconditionError("num_tasks must be positive");
  if (base_classes == 0 || base_classes > total_classes) {
    throw PreconditionError("base_classes must be in 1..total classes");
  }
  const std::size_t rest = total_classes - base_classes;
  if (num_tasks == 1) {
    if (rest != 0) throw PreconditionError("a single task must hold every class");
    return {base_classes};
  }
  const std::size_t steps = num_tasks - 1;
  if (rest == 0 || rest % steps != 0) {
    throw PreconditionError(std::to_string(rest) + " remaining classes cannot be split into " +
                            std::to_string(steps) + " equal non-empty tasks");
  }
  std::vector<std::size_t> sizes(num_tasks, rest / steps);
  sizes[0] = base_classes;
  return sizes;
}

TaskStream make_incremental_stream(const LabeledDataset& train, const LabeledDataset& test,
                                   std::size_t base_classes, std::size_t num_tasks,
                                   std::uint64_t seed) {
  train.validate();
  test.validate();
  if (!test.empty() && train.dim() != test.dim()) {
    throw ShapeError("train and test feature widths differ");
  }
  std::vector<int> classes = train.classes();
  const auto sizes = task_sizes(classes.size(), base_classes, num_tasks);
  for (int c : test.classes()) {
    if (!std::binary_search(classes.begin(), classes.end(), c)) {
      throw PreconditionError("test label " + std::to_string(c) + " has no training examples");
    }
  }
  Rng rng(seed);
  rng.shuffle(classes);

  TaskStream stream;
  stream.class_order = classes;
  stream.class_order_seed = seed;
  std::size_t next = 0;
  for (std::size_t t = 0; t < num_tasks; ++t) {
    Task task;
    task.task_id = static_cast<int>(t + 1);
    task.class_ids.assign(classes.begin() + static_cast<std::ptrdiff_t>(next),
                          classes.begin() + static_cast<std::ptrdiff_t>(next + sizes[t]));
    next += sizes[t];
    task.train = train.filter_classes(task.class_ids);
    task.test = test.filter_classes(task.class_ids);
    task.train.split = Split::train;
    task.test.split = Split::test;
    stream.tasks.push_back(std::move(task));
  }
  stream.validate();
  return stream;
}

nlohmann::json stream_manifest(const TaskStream& stream) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const Task& t : stream.tasks) {
    tasks.push_back({{"task_id", t.task_id},
                     {"class_ids", t.class_ids},
                     {"train_examples", t.train.size()},
                     {"test_examples", t.test.size()}});
  }
  return {{"class_order_seed", stream.class_order_seed},
          {"class_order", stream.class_order},
          {"tasks", tasks}};
}

}  // namespace ivt
