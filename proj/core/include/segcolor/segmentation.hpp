#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <vector>

#include "segcolor/image.hpp"

namespace segcolor {

/// Per-pixel labeling of the line-enclosed regions of a drawing.
/// Label 0 marks line pixels; 1..segment_count are segment ids, assigned in
/// raster-scan order of each 4-connected component's first pixel.
struct SegmentMap {
  int height = 0;
  int width = 0;
  std::vector<std::int32_t> labels;  // height*width
  int segment_count = 0;
  std::vector<std::int64_t> areas;  // indexed by id-1

  std::int32_t label(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::int64_t area(int id) const { return areas[static_cast<std::size_t>(id) - 1]; }
};

/// Per-segment ground-truth colors plus background marks, aligned with the
/// paired SegmentMap's ids.
struct SegmentPalette {
  std::vector<Rgb> colors;
  std::vector<bool> background_flags;

  int size() const { return static_cast<int>(colors.size()); }
};

inline constexpr int kDefaultLineThreshold = 10;
inline constexpr double kDefaultBackgroundAreaFraction = 0.05;

/// A pixel is canvas iff min(R,G,B) >= 255 - line_threshold.
bool is_canvas_pixel(Rgb c, int line_threshold);

/// Labels every 4-connected canvas component of the drawing.
/// Throws std::runtime_error("no segments") when the image has no canvas pixels.
SegmentMap extract_segments(const ImageU8& image, int line_threshold = kDefaultLineThreshold);

/// Modal RGB per segment over the ground-truth frame; ties break to the
/// lexicographically smallest RGB. Background flags are left unset.
SegmentPalette read_segment_colors(const ImageU8& gt_image, const SegmentMap& seg);

/// Sets every line pixel to pure black, leaving canvas pixels untouched.
/// Segment extraction commutes with this transform.
ImageU8 unify_line_colors(const ImageU8& image, int line_threshold = kDefaultLineThreshold);

/// Background ids. With a ground-truth palette: segments that touch the image
/// border and whose color equals background_color. Without one: border-touching
/// segments whose area exceeds area_fraction of the image.
std::set<int> identify_background(const SegmentMap& seg,
                                  const SegmentPalette* palette = nullptr,
                                  Rgb background_color = kWhite,
                                  double area_fraction = kDefaultBackgroundAreaFraction);

/// Renders a per-segment color list over the label grid; line pixels black.
ImageU8 render_segments(const SegmentMap& seg, const std::vector<Rgb>& colors);

/// On-disk form: 16-bit label PNG plus a JSON sidecar
/// {"segment_count", "areas", "colors", "background_ids"}.
void save_segment_map(const std::filesystem::path& png_path, const SegmentMap& seg,
                      const SegmentPalette* palette = nullptr,
                      const std::set<int>* background_ids = nullptr);
SegmentMap load_segment_map(const std::filesystem::path& png_path,
                            SegmentPalette* palette_out = nullptr);

}  // namespace segcolor
