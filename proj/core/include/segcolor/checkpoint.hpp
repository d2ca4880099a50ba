#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "segcolor/config.hpp"
#include "segcolor/tensor.hpp"

namespace segcolor {

/// Single-archive model snapshot: versioned header, config, epoch counter,
/// serialized RNG state and raw little-endian float64 tensors. Round-trips
/// bit-exactly.
struct Checkpoint {
  TrainConfig config;
  int epoch = 0;
  std::string rng_state;  // operator<< form of std::mt19937_64
  std::vector<std::pair<std::string, nn::Tensor>> tensors;

  /// "full" or "no_consistency" (the lambda_dc = 0 ablation arm).
  std::string variant() const { return config.lambda_dc == 0.0 ? "no_consistency" : "full"; }
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace segcolor
