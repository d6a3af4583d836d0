#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ivt/dataset.hpp"

namespace ivt {

enum class MemoryPolicy { random, herding };

std::string_view to_string(MemoryPolicy policy);
MemoryPolicy memory_policy_from_string(std::string_view name);

/// Per-class exemplar store with a fixed budget per class.
struct ReplayMemory {
  std::size_t per_class_budget = 20;
  MemoryPolicy policy = MemoryPolicy::random;
  std::uint64_t seed = 0;
  std::map<int, LabeledDataset> store;

  std::size_t total() const;
  // All exemplars, classes in ascending id order.
  LabeledDataset as_dataset() const;
};

// Maps a raw feature row to the embedding used for herding.
using FeatureExtractor = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Greedy mean matching: at step k pick the unused row whose addition brings
/// the running mean of the picks closest to the mean of all rows. Ties go to
/// the lowest row index. Returns picked row indices in selection order.
std::vector<std::size_t> herding_select(const Eigen::MatrixXd& embeddings, std::size_t budget);

/// Selects exemplars for each of `classes` from `train`.
///
/// Classes already present in the store are re-selected. Herding works on
/// raw features unless an extractor is given.
ReplayMemory update_memory(ReplayMemory memory, const LabeledDataset& train,
                           const std::vector<int>& classes, const FeatureExtractor& extractor = {});

}  // namespace ivt
