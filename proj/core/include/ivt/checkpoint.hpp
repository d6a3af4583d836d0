#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ivt/fisher.hpp"
#include "ivt/optimizer.hpp"
#include "ivt/param_layout.hpp"

namespace ivt {

struct CheckpointMeta {
  std::uint64_t task_index = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  nlohmann::json extra = nlohmann::json::object();
};

struct Checkpoint {
  ParamVector params;
  OptimizerState optimizer;
  FisherLedger ledger;
  CheckpointMeta meta;
};

/// Binary framing, all integers and reals little-endian:
///
///   "IVTCKPT\0"  u32 version
///   u64 n, n bytes     metadata JSON (task_index, seed, config_digest, extra)
///   u64 n, n bytes     layout JSON (activation, segments, head columns)
///   u64 n, n * f64     parameter values
///   u64 n, n bytes     optimizer blob: u64 steps, then three (u64 len, f64...)
///   u64 k              ledger entries in commit order, each: i64 task id,
///                      u64 n, n * f64 (in the parameter layout)
///   u64                FNV-1a 64 of every preceding byte
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Lossless JSON export (reals printed with 17 significant digits).
nlohmann::json checkpoint_to_text(const Checkpoint& ckpt);
Checkpoint checkpoint_from_text(const nlohmann::json& j);

nlohmann::json layout_to_json(const ParamLayout& layout);
LayoutPtr layout_from_json(const nlohmann::json& j);

}  // namespace ivt
