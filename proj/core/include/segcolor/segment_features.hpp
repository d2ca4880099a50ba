#pragma once

#include "segcolor/encoders.hpp"
#include "segcolor/segmentation.hpp"

namespace segcolor {

/// How pooled vectors are normalized. kMaskArea divides by the segment's own
/// pixel count (true superpixel pooling, the default); kSpatialArea divides by
/// the full plane size, which scales rows by |m|/(H*W). Cosine matching is
/// unaffected; the flag exists for A/B runs.
enum class PoolNorm { kMaskArea, kSpatialArea };

/// Linear pixel indices (y*W + x) per segment id, index 0 = id 1. Lists can be
/// empty for ids that vanished under label-map resizing; pooling rejects those.
std::vector<std::vector<std::int32_t>> segment_pixel_lists(const SegmentMap& seg);

/// Per-segment pixel memberships on some pooling plane. At native resolution
/// one pixel belongs to exactly one segment; after max-pool mask downscaling a
/// reduced cell can belong to several.
struct MaskPlane {
  int height = 0;
  int width = 0;
  std::vector<std::vector<std::int32_t>> lists;
};

MaskPlane native_mask_plane(const SegmentMap& seg);
/// Max-pool downscale of every binary segment mask so neither side exceeds
/// `side` (ceil-mode adaptive windows; nothing is dropped at borders).
MaskPlane downscaled_mask_plane(const SegmentMap& seg, int side);

/// Bilinearly samples `map` onto the plane's grid and averages per segment.
/// Exactly resize_feature_map + per-list pooling, fused so the resized map is
/// never materialized.
MatrixRM pool_map_over_plane(const FeatureMap& map, const MaskPlane& plane,
                             PoolNorm norm = PoolNorm::kMaskArea);

/// Mean of the map over each segment's pixels -> M x C matrix.
/// Throws std::runtime_error("degenerate segment") on an empty segment.
MatrixRM segment_pool(const FeatureMap& map, const SegmentMap& seg,
                      PoolNorm norm = PoolNorm::kMaskArea);

/// Fused "bilinear-resize map to the segment plane, then pool". Exactly the
/// composition resize_feature_map + segment_pool up to accumulation order;
/// never materializes the resized map.
MatrixRM segment_pool_resized(const FeatureMap& map, const SegmentMap& seg,
                              PoolNorm norm = PoolNorm::kMaskArea);

/// Memory-bounded variant: masks are max-pool-downscaled so neither side
/// exceeds `side` (ceil-mode windows, no pixel dropped), the map is bilinearly
/// resized to the same grid, then pooled. At native resolution (both sides
/// <= side) this is exactly segment_pool.
MatrixRM segment_pool_fixed(const FeatureMap& map, const SegmentMap& seg, int side = 512,
                            PoolNorm norm = PoolNorm::kMaskArea);

/// Two-stage fusion head: an MLP reduces semantic vectors to the spatial
/// width, then a second MLP merges the concatenation. Hidden layers are
/// rectified-linear; outputs are linear.
class FusionMlp {
 public:
  FusionMlp() = default;
  FusionMlp(int semantic_dim, std::uint64_t seed);

  /// Differentiable row-wise path: d [M,C_d], u [M,C_u] -> [M,C_u].
  nn::VarPtr apply(const nn::VarPtr& d, const nn::VarPtr& u) const;
  nn::ParamList params() const;
  int semantic_dim() const { return semantic_dim_; }

 private:
  int semantic_dim_ = 0;
  nn::Linear reduce1_, reduce2_;  // C_d -> 512 -> C_u
  nn::Linear merge1_, merge2_;    // 2*C_u -> 256 -> C_u
};

/// Row-wise fused representation; M may be zero (returns a 0 x C_u matrix).
MatrixRM fuse(const MatrixRM& d, const MatrixRM& u, const FusionMlp& params);

}  // namespace segcolor
