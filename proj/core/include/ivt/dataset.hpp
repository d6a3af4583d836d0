#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace ivt {

enum class Split { train, test };

/// Row-per-example feature matrix with integer class labels.
struct LabeledDataset {
  Eigen::MatrixXd features;  // examples x input_dim
  std::vector<int> labels;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool empty() const { return labels.empty(); }

  // Throws FormatError if rows and labels disagree or a label is negative.
  void validate() const;

  // Sorted distinct labels.
  std::vector<int> classes() const;

  LabeledDataset select(const std::vector<std::size_t>& rows) const;
  LabeledDataset filter_classes(const std::vector<int>& keep) const;
};

LabeledDataset concatenate(const std::vector<const LabeledDataset*>& parts, Split split);

struct TrainTestPair {
  LabeledDataset train;
  LabeledDataset test;
};

struct GaussianSpec {
  std::size_t dim = 2;
  std::size_t classes = 6;
  std::size_t clusters_per_class = 1;
  // Distance between neighbouring class centres, in units of the unit cluster
  // standard deviation.
  double separation = 4.0;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  std::uint64_t seed = 0;
};

/// Isotropic unit-variance Gaussian clusters.
///
/// Class centres sit on a circle (in a seeded random 2-D plane when dim > 2)
/// with neighbouring centres `separation` apart, so every class is linearly
/// separable from the rest when the separation is large. Extra clusters of a
/// class are offset from its centre by separation/4 in seeded directions.
TrainTestPair synth_gaussian_tasks(const GaussianSpec& spec);

/// Reads an IDX image file and its IDX label file.
///
/// Only unsigned-byte payloads (type code 0x08) are accepted. Image tensors of
/// any rank >= 1 are flattened per example and scaled by 1/255.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        Split split = Split::train);

struct CsvSchema {
  std::string label_column = "label";
  // Feature columns; empty means every column except the label.
  std::vector<std::string> feature_columns;
  char delimiter = ',';
};

// Headered CSV. Row order is preserved.
LabeledDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                        Split split = Split::train);

}  // namespace ivt
