#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "ivt/param_layout.hpp"

namespace ivt {

struct FisherTag {};

/// Nonnegative per-coordinate curvature estimate aligned to a ParamLayout.
using FisherDiagonal = LayoutVector<FisherTag>;

// Wraps `values`, rejecting negative or non-finite entries.
FisherDiagonal make_fisher(LayoutPtr layout, Eigen::VectorXd values);

/// How one mini-batch contributes to the running diagonal.
///
/// batch_mean_sq squares the batch-mean gradient (the per-batch g_i of the
/// training loop). per_sample_sq averages the squared per-example gradients.
/// The two differ by a batch-size dependent factor and agree exactly when
/// every batch holds one example.
enum class FisherMode { batch_mean_sq, per_sample_sq };

class FisherAccumulator {
 public:
  explicit FisherAccumulator(LayoutPtr layout);

  // For batch_mean_sq pass either the batch-mean gradient alone or the
  // per-example gradients (their mean is squared). For per_sample_sq pass the
  // per-example gradients.
  void accumulate(std::span<const GradientVector> grads, FisherMode mode);

  std::size_t batches() const { return batches_; }
  const LayoutPtr& layout_ptr() const { return layout_; }

  // Mean contribution over accumulated batches. Throws with zero batches.
  FisherDiagonal finalize() const;

 private:
  LayoutPtr layout_;
  Eigen::VectorXd sum_;
  std::size_t batches_ = 0;
};

FisherAccumulator begin_epoch_accumulator(LayoutPtr layout);
void accumulate_batch(FisherAccumulator& acc, std::span<const GradientVector> grads, FisherMode mode);
FisherDiagonal finalize_epoch(const FisherAccumulator& acc);

/// Per-task Fisher diagonals plus their running sum.
///
/// All entries share the layout of the most recent commit; older entries are
/// zero-padded on head columns added since. `cumulative()` is always the
/// left fold of the per-task entries in commit order, so the sum identity
/// holds bit for bit.
class FisherLedger {
 public:
  FisherLedger() = default;

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  bool has_task(int task_id) const;

  // Commit order.
  const std::vector<std::pair<int, FisherDiagonal>>& entries() const { return entries_; }
  const FisherDiagonal& task(int task_id) const;

  // Requires a non-empty ledger.
  const FisherDiagonal& cumulative() const;

  // Cumulative diagonal re-expressed in `layout` (zeros where it has no entry,
  // all zeros for an empty ledger).
  FisherDiagonal cumulative_in(const LayoutPtr& layout) const;

  // Rebuilds a ledger from entries in commit order (used by checkpoint I/O).
  static FisherLedger from_entries(std::vector<std::pair<int, FisherDiagonal>> entries);

  friend FisherLedger commit_task(const FisherLedger& ledger, int task_id, const FisherDiagonal& fisher);

 private:
  std::vector<std::pair<int, FisherDiagonal>> entries_;
  FisherDiagonal cumulative_;
};

FisherLedger commit_task(const FisherLedger& ledger, int task_id, const FisherDiagonal& fisher);

}  // namespace ivt
