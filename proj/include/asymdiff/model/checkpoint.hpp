#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymdiff/featurespace/schema.hpp"
#include "asymdiff/model/params.hpp"

namespace asymdiff {

struct OptimizerState {
  std::int64_t step = 0;
  std::vector<Tensor2> first_moments;
  std::vector<Tensor2> second_moments;
};

// Everything needed to serve a model or resume its training.
struct Checkpoint {
  std::shared_ptr<const FeatureSchema> schema;
  ModelConfig config;
  ModelParams params;
  nlohmann::json meta = nlohmann::json::object();  // arm, serving path, seed, config hash...
  std::optional<OptimizerState> optimizer;
};

// Layout (little-endian):
//   "ADRCKPT\0" | u32 format | u64 header_len | header JSON
//   | tensors as raw f64 in header order | u64 FNV-1a of all preceding bytes
inline constexpr std::uint32_t kCheckpointFormat = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws DataError on corruption, unknown format, or schema hash mismatch.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asymdiff
