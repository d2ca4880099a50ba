#include "synthetic.hpp"

#include <atomic>
#include <cmath>

#include "segcolor/image_io.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using segcolor::FeatureMap;
using segcolor::SegmentMap;

namespace {

bool inside_part(const ScenePart& p, int y, int x) {
  if (p.kind == ScenePart::kDisk) {
    const double d = std::hypot(x - p.cx, y - p.cy);
    return d <= p.radius;
  }
  return std::abs(x - p.cx) <= p.half_w && std::abs(y - p.cy) <= p.half_h;
}

bool on_outline(const ScenePart& p, int y, int x) {
  if (p.kind == ScenePart::kDisk) {
    const double d = std::hypot(x - p.cx, y - p.cy);
    return d <= p.radius && d > p.radius - 2.0;
  }
  const int ax = std::abs(x - p.cx);
  const int ay = std::abs(y - p.cy);
  if (ax > p.half_w || ay > p.half_h) return false;
  return ax > p.half_w - 2 || ay > p.half_h - 2;
}

}  // namespace

RenderedScene render_scene(const SceneSpec& spec) {
  RenderedScene out;
  out.line = ImageU8(spec.height, spec.width, segcolor::kWhite);
  out.gt = ImageU8(spec.height, spec.width, segcolor::kWhite);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      // topmost part wins
      for (auto it = spec.parts.rbegin(); it != spec.parts.rend(); ++it) {
        if (!inside_part(*it, y, x)) continue;
        out.gt.set(y, x, it->color);
        if (on_outline(*it, y, x)) {
          out.line.set(y, x, spec.line_color);
        } else {
          out.line.set(y, x, segcolor::kWhite);
        }
        break;
      }
    }
  }
  return out;
}

Rgb character_part_color(int part) {
  static const Rgb kColors[kCharacterParts] = {
      {200, 40, 40},    // body
      {250, 220, 170},  // head
      {40, 160, 40},    // left arm
      {40, 40, 200},    // right arm
      {160, 90, 20},    // left leg
      {90, 20, 160},    // right leg
      {240, 200, 30},   // hat
      {20, 170, 170},   // satchel
  };
  return kColors[part];
}

SceneSpec character_scene(int dx, int dy, unsigned visible_mask) {
  SceneSpec spec;
  spec.height = 128;
  spec.width = 128;
  auto disk = [&](int part, int cx, int cy, int r) {
    if (!(visible_mask & (1u << part))) return;
    spec.parts.push_back(
        {ScenePart::kDisk, cx + dx, cy + dy, r, 0, 0, character_part_color(part)});
  };
  auto rect = [&](int part, int cx, int cy, int hw, int hh) {
    if (!(visible_mask & (1u << part))) return;
    spec.parts.push_back(
        {ScenePart::kRect, cx + dx, cy + dy, 0, hw, hh, character_part_color(part)});
  };
  rect(0, 64, 72, 14, 20);   // body
  disk(1, 64, 38, 12);       // head
  disk(2, 40, 66, 7);        // left arm
  disk(3, 88, 66, 7);        // right arm
  rect(4, 54, 106, 6, 10);   // left leg
  rect(5, 74, 106, 6, 10);   // right leg
  rect(6, 64, 20, 13, 5);    // hat
  disk(7, 94, 92, 8);        // satchel
  return spec;
}

void write_frame(const fs::path& clip_dir, const std::string& name, const RenderedScene& scene,
                 int line_threshold) {
  fs::create_directories(clip_dir / "line");
  fs::create_directories(clip_dir / "gt");
  fs::create_directories(clip_dir / "seg");
  segcolor::write_image(clip_dir / "line" / (name + ".png"), scene.line);
  segcolor::write_image(clip_dir / "gt" / (name + ".png"), scene.gt);
  SegmentMap seg = segcolor::extract_segments(scene.line, line_threshold);
  segcolor::SegmentPalette palette = segcolor::read_segment_colors(scene.gt, seg);
  auto background = segcolor::identify_background(seg, &palette);
  segcolor::save_segment_map(clip_dir / "seg" / (name + ".png"), seg, &palette, &background);
}

std::filesystem::path write_dataset(const fs::path& root, const FixtureLayout& fx,
                                    int line_threshold) {
  char name[16];
  if (!fx.train_clip.empty()) {
    const fs::path clip = root / "train" / fx.character / "clip0";
    for (std::size_t i = 0; i < fx.train_clip.size(); ++i) {
      std::snprintf(name, sizeof(name), "%04zu", i);
      write_frame(clip, name, fx.train_clip[i], line_threshold);
    }
  }
  if (!fx.sheets.empty()) {
    for (const char* split : {"train", "test"}) {
      const fs::path sheet = root / split / fx.character / "sheet";
      for (std::size_t i = 0; i < fx.sheets.size(); ++i) {
        std::snprintf(name, sizeof(name), "%04zu", i);
        write_frame(sheet, name, fx.sheets[i], line_threshold);
      }
    }
  }
  if (!fx.test_clip.empty()) {
    const fs::path clip = root / "test" / fx.character / "clip0";
    for (std::size_t i = 0; i < fx.test_clip.size(); ++i) {
      std::snprintf(name, sizeof(name), "%04zu", i);
      write_frame(clip, name, fx.test_clip[i], line_threshold);
    }
  }
  return root;
}

ImageU8 random_line_image(int height, int width, double line_density, std::mt19937_64& rng) {
  ImageU8 image(height, width, segcolor::kWhite);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (u(rng) < line_density) {
        image.set(y, x, segcolor::kBlack);
      }
    }
  }
  return image;
}

FeatureMap random_feature_map(int height, int width, int channels, std::mt19937_64& rng) {
  FeatureMap map(height, width, channels);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (float& v : map.data) v = u(rng);
  return map;
}

SegmentMap random_segment_map(int height, int width, int segments, std::mt19937_64& rng) {
  // Voronoi-style regions are not 4-connected in general; tests that need
  // real segment maps should extract from drawings. This generator simply
  // guarantees every id appears, which is all pooling requires.
  SegmentMap seg;
  seg.height = height;
  seg.width = width;
  seg.segment_count = segments;
  seg.labels.resize(static_cast<std::size_t>(height) * width);
  std::uniform_int_distribution<int> pick(1, segments);
  for (auto& v : seg.labels) v = pick(rng);
  for (int id = 1; id <= segments; ++id) {
    seg.labels[static_cast<std::size_t>(id - 1)] = id;  // force nonempty
  }
  seg.areas.assign(static_cast<std::size_t>(segments), 0);
  for (auto v : seg.labels) ++seg.areas[static_cast<std::size_t>(v) - 1];
  return seg;
}

fs::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  fs::path dir = fs::temp_directory_path() /
                 ("segcolor_test_" + tag + "_" + std::to_string(counter.fetch_add(1)) + "_" +
                  std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace testsupport
