// Copyright 2026 The MotiF Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "motif/denoiser.hpp"

namespace motif {

nlohmann::ordered_json to_json(const DenoiserConfig& config);
// Unknown keys are rejected.
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

// Binary container, little-endian:
//   "MOTIFCKP" | u32 version | u32 n + echo (UTF-8 JSON) | u32 n + denoiser
//   config (JSON) | u64 step | u64 seed | u32 groups |
//   per group: u32 n + name | u32 rank | i32 dims[rank] | u64 count | f64 values[count]
struct Checkpoint {
  std::string config_echo = "{}";
  std::uint64_t step = 0;
  DenoiserParams params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace motif
