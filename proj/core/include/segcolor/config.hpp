#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "segcolor/image.hpp"
#include "segcolor/objective.hpp"
#include "segcolor/segment_features.hpp"

namespace segcolor {

/// Environment fallbacks for paths the CLI does not receive explicitly.
inline constexpr const char* kEnvBackboneWeights = "SEGCOLOR_BACKBONE";
inline constexpr const char* kEnvCacheDir = "SEGCOLOR_CACHE_DIR";

/// Every field maps one-to-one onto a key in the key=value config file;
/// CLI flags override file values.
struct TrainConfig {
  int epochs = 5;
  int batch_size = 2;
  double learning_rate = 1e-4;
  int train_resize = 512;
  int ref_offset_range = 2;       // sample refs within +-range of the target
  bool allow_zero_offset = true;  // +-0 permitted
  int refs_per_step = 1;
  std::uint64_t seed = 0;
  double lambda_ce = 0.5;
  double lambda_dc = 0.2;
  double temperature = 0.1;
  double consistency_scale = 10.0;
  std::string pooling = "native";  // native | fixed512
  int fixed_pool_side = 512;
  std::string pool_norm = "mask";  // mask | spatial
  int line_threshold = kDefaultLineThreshold;
  bool mono = false;
  std::string backbone = "procedural";  // procedural | vit
  Rgb background_color = kWhite;
  double background_area_fraction = kDefaultBackgroundAreaFraction;
  bool deterministic = true;
  int checkpoint_keep = 1;

  LossWeights loss_weights() const {
    return {lambda_ce, lambda_dc, temperature, consistency_scale};
  }
  PoolNorm pool_norm_mode() const {
    return pool_norm == "spatial" ? PoolNorm::kSpatialArea : PoolNorm::kMaskArea;
  }
  bool fixed_pooling() const { return pooling == "fixed512"; }
};

/// key = value lines, '#' comments, unknown keys rejected.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
/// Throws std::invalid_argument for unknown keys or unparsable values.
void apply_config_override(TrainConfig& config, const std::string& key, const std::string& value);
std::map<std::string, std::string> config_to_map(const TrainConfig& config);
std::string config_to_text(const TrainConfig& config);
TrainConfig config_from_map(const std::map<std::string, std::string>& map);

}  // namespace segcolor
