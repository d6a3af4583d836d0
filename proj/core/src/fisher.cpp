#include "ivt/fisher.hpp"

#include <algorithm>
#include <string>

namespace ivt {

FisherDiagonal make_fisher(LayoutPtr layout, Eigen::VectorXd values) {
  if (!all_finite(values)) throw NumericError("Fisher diagonal has non-finite entries");
  if (values.size() > 0 && values.minCoeff() < 0.0) {
    throw PreconditionError("Fisher diagonal has negative entries");
  }
  return FisherDiagonal(std::move(layout), std::move(values));
}

FisherAccumulator::FisherAccumulator(LayoutPtr layout) : layout_(std::move(layout)) {
  if (!layout_) throw PreconditionError("FisherAccumulator: null layout");
  sum_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_->total_len()));
}

void FisherAccumulator::accumulate(std::span<const GradientVector> grads, FisherMode mode) {
  if (grads.empty()) throw PreconditionError("FisherAccumulator: empty gradient batch");
  for (const auto& g : grads) {
    if (!same_layout(g.layout_ptr(), layout_)) {
      throw ShapeError("FisherAccumulator: gradient layout differs from accumulator");
    }
    if (!all_finite(g.values())) throw NumericError("FisherAccumulator: non-finite gradient");
  }
  const double n = static_cast<double>(grads.size());
  if (mode == FisherMode::batch_mean_sq) {
    Eigen::VectorXd mean = grads[0].values();
    for (std::size_t i = 1; i < grads.size(); ++i) mean += grads[i].values();
    if (grads.size() > 1) mean /= n;
    sum_.array() += mean.array().square();
  } else {
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(sum_.size());
    for (const auto& g : grads) sq.array() += g.values().array().square();
    sum_ += sq / n;
  }
  ++batches_;
}

FisherDiagonal FisherAccumulator::finalize() const {
  if (batches_ == 0) throw PreconditionError("FisherAccumulator: no batches accumulated");
  return make_fisher(layout_, sum_ / static_cast<double>(batches_));
}

FisherAccumulator begin_epoch_accumulator(LayoutPtr layout) {
  return FisherAccumulator(std::move(layout));
}

void accumulate_batch(FisherAccumulator& acc, std::span<const GradientVector> grads,
                      FisherMode mode) {
  acc.accumulate(grads, mode);
}

FisherDiagonal finalize_epoch(const FisherAccumulator& acc) { return acc.finalize(); }

bool FisherLedger::has_task(int task_id) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == task_id; });
}

const FisherDiagonal& FisherLedger::task(int task_id) const {
  for (const auto& e : entries_) {
    if (e.first == task_id) return e.second;
  }
  throw PreconditionError("Fisher ledger has no task " + std::to_string(task_id));
}

const FisherDiagonal& FisherLedger::cumulative() const {
  if (entries_.empty()) throw PreconditionError("Fisher ledger is empty");
  return cumulative_;
}

FisherDiagonal FisherLedger::cumulative_in(const LayoutPtr& layout) const {
  if (entries_.empty()) return FisherDiagonal::zeros(layout);
  return reconcile(cumulative_, layout, 0.0);
}

FisherLedger FisherLedger::from_entries(std::vector<std::pair<int, FisherDiagonal>> entries) {
  FisherLedger ledger;
  for (auto& [id, f] : entries) ledger = commit_task(ledger, id, f);
  return ledger;
}

FisherLedger commit_task(const FisherLedger& ledger, int task_id, const FisherDiagonal& fisher) {
  if (ledger.has_task(task_id)) {
    throw PreconditionError("Fisher for task " + std::to_string(task_id) + " already committed");
  }
  if (!all_finite(fisher.values()) || (fisher.size() > 0 && fisher.values().minCoeff() < 0.0)) {
    throw NumericError("committed Fisher must be finite and nonnegative");
  }
  LayoutPtr target = fisher.layout_ptr();
  if (!ledger.empty()) {
    const LayoutPtr& current = ledger.cumulative_.layout_ptr();
    if (!extends(*target, *current)) {
      if (extends(*current, *target)) {
        target = current;
      } else {
        throw ShapeError("Fisher layout is not compatible with the ledger");
      }
    }
  }
  FisherLedger out;
  out.entries_.reserve(ledger.entries_.size() + 1);
  for (const auto& [id, f] : ledger.entries_) out.entries_.emplace_back(id, reconcile(f, target, 0.0));
  out.entries_.emplace_back(task_id, reconcile(fisher, target, 0.0));
  Eigen::VectorXd sum = out.entries_.front().second.values();
  for (std::size_t i = 1; i < out.entries_.size(); ++i) sum += out.entries_[i].second.values();
  out.cumulative_ = FisherDiagonal(target, std::move(sum));
  return out;
}

}  // namespace ivt
