#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "abxi/model.hpp"

namespace abxi {

// A checkpoint is `<stem>.ckpt` (binary tensors) next to `<stem>.json`
// (config, parameter shapes, caller metadata and the tensor file's SHA-256).
//
// Tensor file layout, little-endian:
//   "ABXICKP1" | u32 count | count x { u32 name_len | name | i64 rows | i64 cols | f64[rows*cols] }
struct CheckpointInfo {
  std::uint64_t seed = 0;
  int epoch = 0;
  double val_mrr_sum = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

std::string save_checkpoint(const AbxiModel& model, const CheckpointInfo& info,
                            const std::filesystem::path& ckpt_path);  // returns sha256 hex

struct LoadedCheckpoint {
  std::unique_ptr<AbxiModel> model;
  nlohmann::json manifest;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& ckpt_path);

std::filesystem::path manifest_path(const std::filesystem::path& ckpt_path);
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);
// Hash of the parameter values alone (independent of file metadata).
std::string parameter_hash(const AbxiModel& model);

}  // namespace abxi
