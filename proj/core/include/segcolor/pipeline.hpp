#pragma once

#include <functional>
#include <optional>

#include "segcolor/checkpoint.hpp"
#include "segcolor/correspondence.hpp"
#include "segcolor/dataset.hpp"
#include "segcolor/encoders.hpp"
#include "segcolor/objective.hpp"
#include "segcolor/segment_features.hpp"

namespace segcolor {

/// Trainable parts plus their config. Construction seeds parameters from
/// config.seed; the semantic width is the fusion MLP's input width.
class Model {
 public:
  explicit Model(const TrainConfig& config, int semantic_dim = kSemanticChannels);

  const TrainConfig& config() const { return config_; }
  const SpatialEncoder& spatial() const { return spatial_; }
  const FusionMlp& fusion() const { return fusion_; }
  int semantic_dim() const { return fusion_.semantic_dim(); }

  nn::ParamList params() const;
  Checkpoint to_checkpoint(int epoch, const std::string& rng_state) const;
  static Model from_checkpoint(const Checkpoint& checkpoint);

 private:
  TrainConfig config_;
  SpatialEncoder spatial_;
  FusionMlp fusion_;
};

// ---------------------------------------------------------------------------
// Semantic feature cache
// ---------------------------------------------------------------------------

struct CacheEntry {
  std::string image;     // path relative to the dataset root
  std::string file;      // path relative to the cache dir
  std::string checksum;  // fnv1a64 hex of the feature file
  int height = 0;
  int width = 0;
  int channels = 0;
};

struct CacheManifest {
  std::vector<CacheEntry> entries;

  const CacheEntry* find(const std::string& image_key) const;
  void save(const std::filesystem::path& path) const;
  static CacheManifest load(const std::filesystem::path& path);
};

/// One .semfeat file per line drawing (clips and sheets, every split), laid
/// out under cache_dir mirroring the dataset tree. Idempotent: entries whose
/// checksum still matches are skipped. On a write failure the manifest of
/// completed entries is preserved before rethrowing.
CacheManifest precompute_semantic_features(const DatasetIndex& index,
                                           const SemanticBackbone& backbone,
                                           const std::filesystem::path& cache_dir,
                                           int* computed_count = nullptr);

/// Serves grids from a precomputed cache; cannot encode ad-hoc images.
class CacheProvider final : public SemanticProvider {
 public:
  CacheProvider(std::filesystem::path cache_dir, std::filesystem::path dataset_root);
  FeatureMap features_for(const std::filesystem::path& image_path) const override;
  FeatureMap features_for_image(const ImageU8& image) const override;
  int channels() const override;

 private:
  std::filesystem::path cache_dir_;
  std::filesystem::path root_;
  CacheManifest manifest_;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct StepLoss {
  int step = 0;
  double ce = 0.0;
  double dc = 0.0;
  double total = 0.0;
};

struct TrainHooks {
  /// After each optimization step; return true to stop training early.
  std::function<bool(int step, const Model& model)> after_step;
};

struct TrainResult {
  Checkpoint final_checkpoint;
  std::vector<StepLoss> curve;
  std::vector<std::filesystem::path> checkpoint_paths;
  bool stopped_early = false;
};

/// Runs the training schedule over the "train" split: per step, sample one
/// target frame and its references, pool features, evaluate the matching
/// objective and update the spatial encoder and fusion parameters only.
/// Writes per-epoch checkpoints and a loss curve CSV under out_dir. Aborts
/// with a diagnostic bundle on a non-finite loss.
TrainResult train(const TrainConfig& config, const DatasetIndex& index,
                  const SemanticProvider& semantic, const std::filesystem::path& out_dir,
                  const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

struct ReferenceSpec {
  ImageU8 line;
  SegmentMap seg;
  SegmentPalette palette;
  std::optional<FeatureMap> semantic;  // precomputed grid, else encoded on demand
};

/// Segments the drawing and reads its palette from the ground-truth frame.
ReferenceSpec make_reference(const ImageU8& line, const ImageU8& gt,
                             int line_threshold = kDefaultLineThreshold);

struct ColorizeOptions {
  bool mono = false;
  bool zero_shot = false;
  bool fixed_pooling = false;
  int fixed_pool_side = 512;
  PoolNorm pool_norm = PoolNorm::kMaskArea;
  int line_threshold = kDefaultLineThreshold;
};

struct ColorizeResult {
  SegmentMap target_seg;
  ReferencePool pool;
  SimilarityMap similarity;
  ColorAssignment assignment;
  ImageU8 rendering;
};

/// Full inference at the target's native resolution. model == nullptr (or
/// options.zero_shot) matches on pooled semantic features alone.
ColorizeResult colorize(const ImageU8& target_line, const std::vector<ReferenceSpec>& refs,
                        const Model* model, const SemanticProvider& semantic,
                        const ColorizeOptions& options = {},
                        const SegmentMap* target_seg = nullptr,
                        const FeatureMap* target_semantic = nullptr);

/// Backbone-features-only pipeline (no spatial encoder, no fusion).
ColorizeResult colorize_zero_shot(const ImageU8& target_line,
                                  const std::vector<ReferenceSpec>& refs,
                                  const SemanticProvider& semantic,
                                  const ColorizeOptions& options = {},
                                  const SegmentMap* target_seg = nullptr,
                                  const FeatureMap* target_semantic = nullptr);

}  // namespace segcolor
