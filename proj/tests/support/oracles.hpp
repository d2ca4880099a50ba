#pragma once

#include <vector>

#include "segcolor/image.hpp"
#include "segcolor/linalg.hpp"
#include "segcolor/segment_features.hpp"
#include "segcolor/segmentation.hpp"

namespace testsupport {

/// Independent per-pixel BFS flood fill (4-connected canvas components,
/// raster-scan id order). Mirrors the labeling contract without sharing code.
std::vector<std::int32_t> floodfill_oracle(const segcolor::ImageU8& image, int line_threshold);

/// True when the two label grids are equal up to a bijective id renaming.
bool labels_equal_up_to_renaming(const std::vector<std::int32_t>& a,
                                 const std::vector<std::int32_t>& b);

/// Scalar-loop sum/count pooling.
segcolor::MatrixRM pool_oracle(const segcolor::FeatureMap& map, const segcolor::SegmentMap& seg,
                               segcolor::PoolNorm norm = segcolor::PoolNorm::kMaskArea);

/// Direct bilinear resize from the half-pixel-center formula, one output
/// pixel at a time.
segcolor::FeatureMap bilinear_oracle(const segcolor::FeatureMap& map, int target_h, int target_w);

/// Per-pair dot/norm cosine similarity.
segcolor::MatrixRM similarity_oracle(const segcolor::MatrixRM& a, const segcolor::MatrixRM& b,
                                     double eps = 1e-8);

}  // namespace testsupport
