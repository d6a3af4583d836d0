#include "ivt/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

#include "ivt/error.hpp"
#include "ivt/rng.hpp"

namespace ivt {

void LabeledDataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw FormatError("dataset has " + std::to_string(features.rows()) + " rows but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (const int y : labels) {
    if (y < 0) throw FormatError("negative label " + std::to_string(y));
  }
}

std::vector<int> LabeledDataset::classes() const {
  std::set<int> unique(labels.begin(), labels.end());
  return {unique.begin(), unique.end()};
}

LabeledDataset LabeledDataset::select(const std::vector<std::size_t>& rows) const {
  LabeledDataset out;
  out.split = split;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels[i] = labels[rows[i]];
  }
  return out;
}

LabeledDataset LabeledDataset::filter_classes(const std::vector<int>& keep) const {
  const std::set<int> wanted(keep.begin(), keep.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (wanted.count(labels[i]) != 0) rows.push_back(i);
  }
  return select(rows);
}

LabeledDataset concatenate(const std::vector<const LabeledDataset*>& parts, Split split) {
  LabeledDataset out;
  out.split = split;
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  for (const LabeledDataset* p : parts) {
    if (p->empty()) continue;
    if (cols >= 0 && p->features.cols() != cols) throw ShapeError("concatenate: feature widths differ");
    cols = p->features.cols();
    rows += p->features.rows();
  }
  out.features.resize(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index at = 0;
  for (const LabeledDataset* p : parts) {
    if (p->empty()) continue;
    out.features.middleRows(at, p->features.rows()) = p->features;
    at += p->features.rows();
    out.labels.insert(out.labels.end(), p->labels.begin(), p->labels.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian clusters

namespace {

Eigen::VectorXd random_unit(Rng& rng, std::size_t dim) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

LabeledDataset sample_split(const std::vector<std::vector<Eigen::VectorXd>>& centres,
                            std::size_t per_class, Rng& rng, Split split) {
  const std::size_t classes = centres.size();
  const auto dim = centres.front().front().size();
  LabeledDataset out;
  out.split = split;
  out.features.resize(static_cast<Eigen::Index>(classes * per_class), dim);
  out.labels.resize(classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      const Eigen::VectorXd& mean = centres[c][k % centres[c].size()];
      for (Eigen::Index j = 0; j < dim; ++j) {
        out.features(static_cast<Eigen::Index>(row), j) = mean[j] + rng.normal();
      }
      out.labels[row] = static_cast<int>(c);
    }
  }
  return out;
}

}  // namespace

TrainTestPair synth_gaussian_tasks(const GaussianSpec& spec) {
  if (spec.dim == 0 || spec.classes == 0 || spec.clusters_per_class == 0) {
    throw PreconditionError("gaussian tasks need dim, classes and clusters >= 1");
  }
  if (!(spec.separation > 0.0) || !std::isfinite(spec.separation)) {
    throw PreconditionError("separation must be positive and finite");
  }
  if (spec.train_per_class == 0 || spec.test_per_class == 0) {
    throw PreconditionError("per-class sample counts must be >= 1");
  }

  Rng layout_rng(mix_seed(spec.seed, 1));
  const auto dim = static_cast<Eigen::Index>(spec.dim);
  Eigen::VectorXd axis_u = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd axis_v = Eigen::VectorXd::Zero(dim);
  if (spec.dim == 1) {
    axis_u[0] = 1.0;
  } else {
    axis_u = random_unit(layout_rng, spec.dim);
    do {
      axis_v = random_unit(layout_rng, spec.dim);
      axis_v -= axis_v.dot(axis_u) * axis_u;
    } while (axis_v.norm() < 1e-6);
    axis_v.normalize();
  }

  const auto classes = static_cast<double>(spec.classes);
  std::vector<std::vector<Eigen::VectorXd>> centres(spec.classes);
  const double phase = 2.0 * std::numbers::pi * layout_rng.uniform();
  for (std::size_t c = 0; c < spec.classes; ++c) {
    Eigen::VectorXd centre;
    if (spec.dim == 1) {
      centre = axis_u * (static_cast<double>(c) - 0.5 * (classes - 1.0)) * spec.separation;
    } else {
      // Neighbouring points on the circle are `separation` apart.
      const double radius = spec.classes == 1   ? 0.0
                            : spec.classes == 2 ? 0.5 * spec.separation
                                                : spec.separation / (2.0 * std::sin(std::numbers::pi / classes));
      const double angle = phase + 2.0 * std::numbers::pi * static_cast<double>(c) / classes;
      centre = radius * (std::cos(angle) * axis_u + std::sin(angle) * axis_v);
    }
    centres[c].push_back(centre);
    for (std::size_t k = 1; k < spec.clusters_per_class; ++k) {
      centres[c].push_back(centre + 0.25 * spec.separation * random_unit(layout_rng, spec.dim));
    }
  }

  Rng train_rng(mix_seed(spec.seed, 2));
  Rng test_rng(mix_seed(spec.seed, 3));
  return {sample_split(centres, spec.train_per_class, train_rng, Split::train),
          sample_split(centres, spec.test_per_class, test_rng, Split::test)};
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct IdxTensor {
  std::vector<std::size_t> dims;
  std::string_view payload;
};

IdxTensor parse_idx(const std::string& bytes, const std::filesystem::path& path) {
  const std::string where = " in '" + path.string() + "'";
  if (bytes.size() < 4) throw FormatError("truncated IDX header" + where);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[0] != 0 || p[1] != 0) throw FormatError("bad IDX magic" + where);
  if (p[2] != 0x08) throw FormatError("unsupported IDX element type (only unsigned byte)" + where);
  const std::size_t ndims = p[3];
  if (ndims == 0) throw FormatError("bad IDX magic: zero dimensions" + where);
  if (bytes.size() < 4 + 4 * ndims) throw FormatError("truncated IDX dimension table" + where);
  IdxTensor t;
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    const unsigned char* q = p + 4 + 4 * d;
    const std::size_t dim = (std::size_t{q[0]} << 24) | (std::size_t{q[1]} << 16) |
                            (std::size_t{q[2]} << 8) | std::size_t{q[3]};
    t.dims.push_back(dim);
    count *= dim;
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header + count) throw FormatError("truncated IDX payload" + where);
  t.payload = std::string_view(bytes).substr(header, count);
  return t;
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        Split split) {
  const std::string image_bytes = read_all(images);
  const std::string label_bytes = read_all(labels);
  const IdxTensor img = parse_idx(image_bytes, images);
  const IdxTensor lab = parse_idx(label_bytes, labels);
  if (lab.dims.size() != 1) throw FormatError("IDX label file must be one-dimensional");
  const std::size_t n = img.dims[0];
  if (lab.dims[0] != n) throw FormatError("IDX image and label counts differ");
  std::size_t width = 1;
  for (std::size_t d = 1; d < img.dims.size(); ++d) width *= img.dims[d];

  LabeledDataset out;
  out.split = split;
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      const auto byte = static_cast<unsigned char>(img.payload[i * width + j]);
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = byte / 255.0;
    }
    out.labels[i] = static_cast<unsigned char>(lab.payload[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    cells.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

double parse_cell(std::string_view cell, std::size_t line_no, const std::filesystem::path& path) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(value)) {
    throw FormatError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                      std::string(cell) + "'");
  }
  return value;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema, Split split) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header row");
  const auto header = split_line(line, schema.delimiter);

  std::size_t label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == schema.label_column) label_col = i;
  }
  if (label_col == header.size()) {
    throw FormatError(path.string() + ": label column '" + schema.label_column + "' not found");
  }
  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i != label_col) feature_cols.push_back(i);
    }
  } else {
    for (const std::string& name : schema.feature_columns) {
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw FormatError(path.string() + ": feature column '" + name + "' not found");
      feature_cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    const double label = parse_cell(cells[label_col], line_no, path);
    if (label < 0 || label != std::floor(label) || label > 2147483647.0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": label must be a nonnegative integer");
    }
    labels.push_back(static_cast<int>(label));
    std::vector<double> row;
    row.reserve(feature_cols.size());
    for (const std::size_t c : feature_cols) row.push_back(parse_cell(cells[c], line_no, path));
    rows.push_back(std::move(row));
  }

  LabeledDataset out;
  out.split = split;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  out.labels = std::move(labels);
  return out;
}

}  // namespace ivt
