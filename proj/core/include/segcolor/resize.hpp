#pragma once

#include <cstdint>
#include <vector>

#include "segcolor/image.hpp"

namespace segcolor {

/// One bilinear sample location: up to two source columns/rows with weights.
/// Half-pixel centers: src = (dst + 0.5) * src_size / dst_size - 0.5, taps
/// clamped to the valid range.
struct BilinearTap {
  int lo = 0;
  int hi = 0;
  float w_lo = 1.0f;
  float w_hi = 0.0f;
};

std::vector<BilinearTap> bilinear_taps(int src_size, int dst_size);

/// Channel-wise bilinear interpolation to target_height x target_width.
FeatureMap resize_feature_map(const FeatureMap& map, int target_height, int target_width);

/// Bilinear resize of an RGB image (per-channel, rounded back to 8 bits).
ImageU8 resize_image(const ImageU8& image, int target_height, int target_width);

/// Nearest-neighbor resize of a label grid (for segment maps).
std::vector<std::int32_t> resize_labels_nearest(const std::vector<std::int32_t>& labels,
                                                int height, int width,
                                                int target_height, int target_width);

}  // namespace segcolor
