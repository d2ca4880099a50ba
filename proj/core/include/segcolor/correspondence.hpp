#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "segcolor/linalg.hpp"
#include "segcolor/segmentation.hpp"

namespace segcolor {

/// Concatenated per-segment features and colors of all reference images.
/// Rows are ordered by reference index, then local segment id.
struct ReferencePool {
  MatrixRM features;  // M x C
  std::vector<Rgb> palette;
  std::vector<std::pair<int, int>> provenance;  // (reference index, local id 1..M_k)

  int size() const { return static_cast<int>(features.rows()); }
};

/// M x N cosine similarities between pool rows and target segments.
using SimilarityMap = MatrixRM;

struct ColorAssignment {
  std::vector<Rgb> colors;        // per target segment
  std::vector<int> matched_row;   // winning pool row per target segment
  std::vector<double> confidence; // the winning similarity

  int size() const { return static_cast<int>(colors.size()); }
};

inline constexpr double kCosineEps = 1e-8;

/// Row-wise concatenation of (features, palette) pairs; no deduplication.
/// Throws std::runtime_error("no references") when the list is empty.
ReferencePool build_reference_pool(
    const std::vector<std::pair<MatrixRM, SegmentPalette>>& refs);

/// S[i][j] = <f_r[i], f_t[j]> / (|f_r[i]| * |f_t[j]| + eps).
SimilarityMap similarity_map(const MatrixRM& reference_features,
                             const MatrixRM& target_features, double eps = kCosineEps);

/// Argmax over pool rows per target column; ties break to the smallest row.
ColorAssignment propagate_colors(const SimilarityMap& similarity, const ReferencePool& pool);

/// JSON serialization: one record per segment with
/// {segment_id, rgb, matched_reference, matched_segment, confidence}.
void save_color_assignment(const std::filesystem::path& path, const ColorAssignment& assignment,
                           const ReferencePool& pool);
ColorAssignment load_color_assignment(const std::filesystem::path& path);

}  // namespace segcolor
