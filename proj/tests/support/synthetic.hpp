#pragma once

#include <filesystem>
#include <random>
#include <vector>

#include "segcolor/dataset.hpp"
#include "segcolor/image.hpp"
#include "segcolor/segmentation.hpp"

namespace testsupport {

using segcolor::ImageU8;
using segcolor::Rgb;

struct ScenePart {
  enum Kind { kDisk, kRect } kind = kDisk;
  int cx = 0;
  int cy = 0;
  int radius = 0;    // disks
  int half_w = 0;    // rects
  int half_h = 0;
  Rgb color;
};

struct SceneSpec {
  int height = 96;
  int width = 96;
  Rgb line_color = segcolor::kBlack;
  std::vector<ScenePart> parts;  // drawn in order, later parts on top
};

struct RenderedScene {
  ImageU8 line;  // outlines on white canvas
  ImageU8 gt;    // flat part colors on white background
};

RenderedScene render_scene(const SceneSpec& spec);

/// A small articulated figure: body, head, two arms, two legs, hat, satchel.
/// `visible` masks parts out (occlusion); dx/dy shift the whole pose.
/// Part colors are fixed and distinct.
SceneSpec character_scene(int dx, int dy, unsigned visible_mask = 0xFF);
inline constexpr int kCharacterParts = 8;
Rgb character_part_color(int part);

/// Writes one frame (line/gt/seg triplet) into a clип directory laid out as
/// dir/{line,gt,seg}/<name>.png.
void write_frame(const std::filesystem::path& clip_dir, const std::string& name,
                 const RenderedScene& scene, int line_threshold = 10);

/// Builds a dataset fixture with one character. Train clip frames come from
/// `train_scenes`; sheets from `sheet_scenes`; an optional test clip mirrors
/// the train clip. Returns the dataset root.
struct FixtureLayout {
  std::vector<RenderedScene> train_clip;
  std::vector<RenderedScene> sheets;
  std::vector<RenderedScene> test_clip;
  std::string character = "figure";
};
std::filesystem::path write_dataset(const std::filesystem::path& root, const FixtureLayout& fx,
                                    int line_threshold = 10);

/// Random tools shared by property tests.
ImageU8 random_line_image(int height, int width, double line_density, std::mt19937_64& rng);
segcolor::FeatureMap random_feature_map(int height, int width, int channels,
                                        std::mt19937_64& rng);
segcolor::SegmentMap random_segment_map(int height, int width, int segments,
                                        std::mt19937_64& rng);

/// Scratch directory under the system temp root, unique per call.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace testsupport
