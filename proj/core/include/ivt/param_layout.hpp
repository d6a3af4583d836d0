#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ivt/error.hpp"

namespace ivt {

enum class Activation { relu, tanh };

std::string_view to_string(Activation activation);
Activation activation_from_string(std::string_view name);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One named block of the flat parameter vector, stored row-major.
///
/// Segments flagged `per_class` have one row per head column (class-major).
/// Adding a class appends a row to each such segment; everything already
/// present keeps its (segment, row, col) address.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 1;
  bool per_class = false;

  std::size_t length() const { return rows * cols; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Describes how a flat real vector decomposes into network tensors.
///
/// Segments are contiguous and cover [0, total_len()). `head_columns` maps
/// every class id present in the classifier head to its row index inside the
/// per-class segments. The activation is recorded here so a ParamVector is
/// self-describing for the forward pass.
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(Activation activation) : activation_(activation) {}

  void add_segment(std::string name, std::size_t rows, std::size_t cols, bool per_class = false);

  // Appends one head column for `class_id` to every per-class segment.
  void add_class(int class_id);

  std::span<const Segment> segments() const { return segments_; }
  const Segment* find(std::string_view name) const;
  const Segment& segment(std::string_view name) const;

  std::size_t total_len() const { return total_len_; }
  std::size_t num_classes() const { return head_columns_.size(); }
  const std::map<int, std::size_t>& head_columns() const { return head_columns_; }
  bool has_class(int class_id) const { return head_columns_.count(class_id) != 0; }
  std::size_t column_of(int class_id) const;
  // Class ids ordered by head column.
  std::vector<int> class_ids() const;

  Activation activation() const { return activation_; }

  // Throws ShapeError when a structural invariant is broken.
  void validate() const;

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;

 private:
  void recompute_offsets();

  std::vector<Segment> segments_;
  std::map<int, std::size_t> head_columns_;
  std::size_t total_len_ = 0;
  Activation activation_ = Activation::relu;
};

using LayoutPtr = std::shared_ptr<const ParamLayout>;

bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& values);

/// A real vector aligned to a ParamLayout.
///
/// The tag keeps parameters, gradients and Fisher diagonals from being mixed
/// up at compile time while sharing storage and accessors.
template <class Tag>
class LayoutVector {
 public:
  LayoutVector() = default;
  LayoutVector(LayoutPtr layout, Eigen::VectorXd values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (!layout_) throw PreconditionError("LayoutVector: null layout");
    if (static_cast<std::size_t>(values_.size()) != layout_->total_len()) {
      throw ShapeError("LayoutVector: " + std::to_string(values_.size()) +
                       " values for layout of length " + std::to_string(layout_->total_len()));
    }
  }

  static LayoutVector zeros(LayoutPtr layout) {
    const auto n = static_cast<Eigen::Index>(layout->total_len());
    return LayoutVector(std::move(layout), Eigen::VectorXd::Zero(n));
  }

  const ParamLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  Eigen::Map<RowMatrix> matrix(std::string_view name) {
    const Segment& s = layout_->segment(name);
    return {values_.data() + s.offset, static_cast<Eigen::Index>(s.rows),
            static_cast<Eigen::Index>(s.cols)};
  }
  Eigen::Map<const RowMatrix> matrix(std::string_view name) const {
    const Segment& s = layout_->segment(name);
    return {values_.data() + s.offset, static_cast<Eigen::Index>(s.rows),
            static_cast<Eigen::Index>(s.cols)};
  }

  template <class OtherTag>
  LayoutVector<OtherTag> retag() const {
    return LayoutVector<OtherTag>(layout_, values_);
  }

 private:
  LayoutPtr layout_;
  Eigen::VectorXd values_;
};

struct ParamTag {};
struct GradientTag {};

using ParamVector = LayoutVector<ParamTag>;
using GradientVector = LayoutVector<GradientTag>;

bool same_layout(const LayoutPtr& a, const LayoutPtr& b);

/// Re-expresses `values` (laid out by `from`) in layout `to`.
///
/// Non-head segments must match in shape. Head rows are matched by class id;
/// classes only present in `to` are filled with `fill`. Classes present in
/// `from` but missing from `to` make the layouts irreconcilable.
Eigen::VectorXd reconcile_values(const Eigen::VectorXd& values, const ParamLayout& from,
                                 const ParamLayout& to, double fill = 0.0);

template <class Tag>
LayoutVector<Tag> reconcile(const LayoutVector<Tag>& v, const LayoutPtr& to, double fill = 0.0) {
  if (same_layout(v.layout_ptr(), to)) return LayoutVector<Tag>(to, v.values());
  return LayoutVector<Tag>(to, reconcile_values(v.values(), v.layout(), *to, fill));
}

// True when `to` contains every segment of `from` with equal shape, up to
// extra head classes.
bool extends(const ParamLayout& to, const ParamLayout& from);

}  // namespace ivt
