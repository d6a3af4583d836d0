#include "ivt/param_layout.hpp"

#include <algorithm>
#include <cmath>

namespace ivt {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw PreconditionError("unknown activation '" + std::string(name) + "'");
}

void ParamLayout::add_segment(std::string name, std::size_t rows, std::size_t cols,
                              bool per_class) {
  if (find(name) != nullptr) throw PreconditionError("duplicate segment '" + name + "'");
  if (per_class && rows != head_columns_.size()) {
    throw ShapeError("per-class segment '" + name + "' must have one row per head class");
  }
  segments_.push_back(Segment{std::move(name), 0, rows, cols, per_class});
  recompute_offsets();
}

void ParamLayout::add_class(int class_id) {
  if (class_id < 0) throw PreconditionError("class ids must be nonnegative");
  if (has_class(class_id)) {
    throw PreconditionError("class " + std::to_string(class_id) + " already has a head column");
  }
  const std::size_t column = head_columns_.size();
  head_columns_.emplace(class_id, column);
  for (Segment& s : segments_) {
    if (s.per_class) ++s.rows;
  }
  recompute_offsets();
}

void ParamLayout::recompute_offsets() {
  std::size_t offset = 0;
  for (Segment& s : segments_) {
    s.offset = offset;
    offset += s.length();
  }
  total_len_ = offset;
}

const Segment* ParamLayout::find(std::string_view name) const {
  const auto it = std::find_if(segments_.begin(), segments_.end(),
                               [&](const Segment& s) { return s.name == name; });
  return it == segments_.end() ? nullptr : &*it;
}

const Segment& ParamLayout::segment(std::string_view name) const {
  const Segment* s = find(name);
  if (s == nullptr) throw ShapeError("layout has no segment '" + std::string(name) + "'");
  return *s;
}

std::size_t ParamLayout::column_of(int class_id) const {
  const auto it = head_columns_.find(class_id);
  if (it == head_columns_.end()) {
    throw PreconditionError("class " + std::to_string(class_id) + " is not in the head");
  }
  return it->second;
}

std::vector<int> ParamLayout::class_ids() const {
  std::vector<int> ids(head_columns_.size());
  for (const auto& [cls, col] : head_columns_) ids[col] = cls;
  return ids;
}

void ParamLayout::validate() const {
  std::size_t expected = 0;
  for (const Segment& s : segments_) {
    if (s.offset != expected) throw ShapeError("segment '" + s.name + "' is not contiguous");
    if (s.per_class && s.rows != head_columns_.size()) {
      throw ShapeError("segment '" + s.name + "' row count disagrees with head classes");
    }
    expected += s.length();
  }
  if (expected != total_len_) throw ShapeError("segments do not cover the layout");
  std::vector<bool> used(head_columns_.size(), false);
  for (const auto& [cls, col] : head_columns_) {
    if (col >= used.size() || used[col]) throw ShapeError("head columns are not a bijection");
    used[col] = true;
  }
}

bool all_finite(const Eigen::Ref<const Eigen::VectorXd>& values) {
  return values.allFinite();
}

bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

bool extends(const ParamLayout& to, const ParamLayout& from) {
  if (to.activation() != from.activation()) return false;
  for (const Segment& s : from.segments()) {
    const Segment* d = to.find(s.name);
    if (d == nullptr || d->cols != s.cols || d->per_class != s.per_class) return false;
    if (!s.per_class && d->rows != s.rows) return false;
  }
  for (const Segment& d : to.segments()) {
    if (from.find(d.name) == nullptr) return false;
  }
  return std::all_of(from.head_columns().begin(), from.head_columns().end(),
                     [&](const auto& kv) { return to.has_class(kv.first); });
}

Eigen::VectorXd reconcile_values(const Eigen::VectorXd& values, const ParamLayout& from,
                                 const ParamLayout& to, double fill) {
  if (static_cast<std::size_t>(values.size()) != from.total_len()) {
    throw ShapeError("reconcile: value count does not match source layout");
  }
  if (!extends(to, from)) throw ShapeError("reconcile: layouts are irreconcilable");

  Eigen::VectorXd out(static_cast<Eigen::Index>(to.total_len()));
  for (const Segment& d : to.segments()) {
    const Segment& s = from.segment(d.name);
    if (!d.per_class) {
      out.segment(static_cast<Eigen::Index>(d.offset), static_cast<Eigen::Index>(d.length())) =
          values.segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.length()));
      continue;
    }
    for (const auto& [cls, col] : to.head_columns()) {
      const auto dst = static_cast<Eigen::Index>(d.offset + col * d.cols);
      const auto width = static_cast<Eigen::Index>(d.cols);
      if (from.has_class(cls)) {
        const auto src = static_cast<Eigen::Index>(s.offset + from.column_of(cls) * s.cols);
        out.segment(dst, width) = values.segment(src, width);
      } else {
        out.segment(dst, width).setConstant(fill);
      }
    }
  }
  return out;
}

}  // namespace ivt
