#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ivt/dataset.hpp"
#include "ivt/stream.hpp"
#include "ivt/trainer.hpp"

namespace ivtlab {

struct DatasetConfig {
  std::string kind = "gaussian";  // gaussian | idx | csv
  ivt::GaussianSpec gaussian;
  std::filesystem::path train_images, train_labels, test_images, test_labels;  // idx
  std::filesystem::path train_csv, test_csv;                                   // csv
  ivt::CsvSchema csv;
};

struct StreamConfig {
  std::size_t base_classes = 2;
  std::size_t num_tasks = 3;
  std::uint64_t class_order_seed = 1993;
};

/// Parsed experiment file. `canonical` is the comment-free document with
/// sorted keys; both digests are computed from it.
struct ExperimentConfig {
  nlohmann::json canonical;
  DatasetConfig dataset;
  StreamConfig stream;
  ivt::MethodSpec method;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::string> output_dir;
  bool write_checkpoints = true;

  std::string digest;          // everything except the output section
  std::string dataset_digest;  // dataset + stream sections
  std::filesystem::path source;
  std::string label() const;
};

class ConfigError : public ivt::Error {
 public:
  using ivt::Error::Error;
};

// Relative dataset paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Replaces the seed list and refreshes the canonical form and digests.
void override_seeds(ExperimentConfig& config, std::vector<std::uint64_t> seeds);

std::string digest_of(const nlohmann::json& canonical);

ivt::TrainTestPair load_dataset(const DatasetConfig& config);
ivt::TaskStream build_stream(const ExperimentConfig& config);

}  // namespace ivtlab
