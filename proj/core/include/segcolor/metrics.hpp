#pragma once

#include <optional>
#include <set>
#include <string>

#include "segcolor/pipeline.hpp"

namespace segcolor {

inline constexpr int kAccThreshMinArea = 10;  // strictly greater-than filter

struct SegmentAccuracy {
  double acc = 0.0;
  std::optional<double> acc_thresh;  // absent when no segment exceeds the area filter
};

/// Exact-RGB per-segment accuracy; Acc-Thresh restricts both numerator and
/// denominator to segments with area > kAccThreshMinArea.
SegmentAccuracy segment_metrics(const ColorAssignment& pred, const SegmentPalette& gt,
                                const SegmentMap& seg);

struct PixelAccuracy {
  double pix_acc = 0.0;
  std::optional<double> pix_f_acc;  // absent when the foreground is empty
  double pix_b_miou = 0.0;
};

/// Pixel metrics over segment pixels only (line pixels carry no assignment).
/// A pixel is predicted background iff its rendered color equals
/// background_color; ground-truth background is the given id set. An empty
/// union counts as perfect agreement (100).
PixelAccuracy pixel_metrics(const ImageU8& pred_render, const ImageU8& gt_image,
                            const SegmentMap& seg, const std::set<int>& background_ids,
                            Rgb background_color = kWhite);

/// Quantizes every segment pixel to the nearest palette color (RGB Euclidean,
/// ties to the lexicographically smallest), then unifies each segment to its
/// modal quantized color. For scoring pixel-level external outputs.
ColorAssignment postprocess_generated(const ImageU8& image, const SegmentMap& seg,
                                      const std::vector<Rgb>& pool_palette);

// ---------------------------------------------------------------------------
// Protocols
// ---------------------------------------------------------------------------

struct FrameScore {
  std::string frame;  // character/clip/name
  double acc = 0.0;
  std::optional<double> acc_thresh;
  double pix_acc = 0.0;
  std::optional<double> pix_f_acc;
  double pix_b_miou = 0.0;
};

struct EvalReport {
  std::string protocol;
  std::string reference_spec;
  std::vector<FrameScore> frames;
  std::vector<std::string> warnings;
  // unweighted means over frames where the metric is present
  double acc = 0.0;
  double acc_thresh = 0.0;
  double pix_acc = 0.0;
  double pix_f_acc = 0.0;
  double pix_b_miou = 0.0;

  void finalize();
  std::string to_json_string() const;
  /// Plain table, columns Acc, Acc-Thresh, Pix-Acc, Pix-F-Acc, Pix-B-MIoU.
  std::string to_text() const;
};

struct EvalOptions {
  ColorizeOptions colorize;
  Rgb background_color = kWhite;
  std::string split = "test";
};

inline constexpr int kAllShots = -1;  // "max": every design-sheet image

/// References are the first `shots` design-sheet images in filename order
/// (kAllShots = all). Throws when a character in the split has no sheet.
EvalReport run_keyframe_protocol(const DatasetIndex& index, const Model* model,
                                 const SemanticProvider& semantic, int shots,
                                 const EvalOptions& options = {});

enum class ConsecutiveRefs {
  kPrev,      // the -1 frame; all frames after the first are targets
  kPrevNext,  // the -1 and +1 frames; first and last frames are skipped
  kFirst,     // clip-wise: the first frame only
};

/// extra_shots adds that many design-sheet images (kAllShots = all, 0 = none)
/// to every reference set. Targets whose reference frame is unsupervised are
/// skipped with a warning.
EvalReport run_consecutive_protocol(const DatasetIndex& index, const Model* model,
                                    const SemanticProvider& semantic, ConsecutiveRefs refs,
                                    int extra_shots = 0, const EvalOptions& options = {});

}  // namespace segcolor
