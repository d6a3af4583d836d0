#include "ivt/replay_memory.hpp"

#include <limits>
#include <string>

#include "ivt/error.hpp"
#include "ivt/rng.hpp"

namespace ivt {

std::string_view to_string(MemoryPolicy policy) {
  return policy == MemoryPolicy::herding ? "herding" : "random";
}

MemoryPolicy memory_policy_from_string(std::string_view name) {
  if (name == "random") return MemoryPolicy::random;
  if (name == "herding") return MemoryPolicy::herding;
  throw PreconditionError("unknown memory policy '" + std::string(name) + "'");
}

std::size_t ReplayMemory::total() const {
  std::size_t n = 0;
  for (const auto& [c, d] : store) n += d.size();
  return n;
}

LabeledDataset ReplayMemory::as_dataset() const {
  std::vector<const LabeledDataset*> parts;
  for (const auto& [c, d] : store) parts.push_back(&d);
  return concatenate(parts, Split::train);
}

std::vector<std::size_t> herding_select(const Eigen::MatrixXd& embeddings, std::size_t budget) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (n == 0) throw PreconditionError("herding_select: no rows");
  const std::size_t k_max = std::min(budget, n);
  const Eigen::RowVectorXd target = embeddings.colwise().mean();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(embeddings.cols());
  std::vector<bool> used(n, false);
  std::vector<std::size_t> picks;
  picks.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) {
    std::size_t best = n;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double d =
          (target - (sum + embeddings.row(static_cast<Eigen::Index>(i))) / static_cast<double>(k))
              .squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = i;
      }
    }
    used[best] = true;
    sum += embeddings.row(static_cast<Eigen::Index>(best));
    picks.push_back(best);
  }
  return picks;
}

ReplayMemory update_memory(ReplayMemory memory, const LabeledDataset& train,
                           const std::vector<int>& classes, const FeatureExtractor& extractor) {
  if (memory.per_class_budget == 0) throw PreconditionError("replay budget must be at least 1");
  train.validate();
  for (int c : classes) {
    const LabeledDataset members = train.filter_classes({c});
    if (members.empty()) {
      throw PreconditionError("class " + std::to_string(c) + " has no training examples");
    }
    std::vector<std::size_t> rows;
    if (memory.policy == MemoryPolicy::random) {
      Rng rng(mix_seed(memory.seed, static_cast<std::uint64_t>(c)));
      rows = rng.permutation(members.size());
      rows.resize(std::min(memory.per_class_budget, members.size()));
    } else {
      Eigen::MatrixXd emb;
      if (extractor) {
        for (Eigen::Index i = 0; i < members.features.rows(); ++i) {
          const Eigen::VectorXd e = extractor(members.features.row(i).transpose());
          if (i == 0) emb.resize(members.features.rows(), e.size());
          emb.row(i) = e.transpose();
        }
      } else {
        emb = members.features;
      }
      rows = herding_select(emb, memory.per_class_budget);
    }
    memory.store[c] = members.select(rows);
  }
  return memory;
}

}  // namespace ivt
