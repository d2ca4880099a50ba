#include "segcolor/segmentation.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "segcolor/image_io.hpp"

namespace segcolor {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_canvas_pixel(Rgb c, int line_threshold) {
  int floor = 255 - line_threshold;
  return c.r >= floor && c.g >= floor && c.b >= floor;
}

SegmentMap extract_segments(const ImageU8& image, int line_threshold) {
  if (image.height < 1 || image.width < 1) {
    throw std::invalid_argument("extract_segments: empty image");
  }
  if (line_threshold < 0 || line_threshold >= 255) {
    throw std::invalid_argument("extract_segments: line_threshold out of range");
  }
  const int h = image.height;
  const int w = image.width;
  SegmentMap seg;
  seg.height = h;
  seg.width = w;
  seg.labels.assign(static_cast<std::size_t>(h) * w, 0);

  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(h) * w, 0);
  bool any_canvas = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (is_canvas_pixel(image.at(y, x), line_threshold)) {
        canvas[static_cast<std::size_t>(y) * w + x] = 1;
        any_canvas = true;
      }
    }
  }
  if (!any_canvas) {
    throw std::runtime_error("no segments");
  }

  std::vector<std::int32_t> stack;
  int next_id = 0;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      std::size_t start = static_cast<std::size_t>(y0) * w + x0;
      if (!canvas[start] || seg.labels[start] != 0) {
        continue;
      }
      ++next_id;
      std::int64_t area = 0;
      stack.push_back(static_cast<std::int32_t>(start));
      seg.labels[start] = next_id;
      while (!stack.empty()) {
        std::size_t p = static_cast<std::size_t>(stack.back());
        stack.pop_back();
        ++area;
        int y = static_cast<int>(p) / w;
        int x = static_cast<int>(p) % w;
        const int ny[4] = {y - 1, y + 1, y, y};
        const int nx[4] = {x, x, x - 1, x + 1};
        for (int k = 0; k < 4; ++k) {
          if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) {
            continue;
          }
          std::size_t q = static_cast<std::size_t>(ny[k]) * w + nx[k];
          if (canvas[q] && seg.labels[q] == 0) {
            seg.labels[q] = next_id;
            stack.push_back(static_cast<std::int32_t>(q));
          }
        }
      }
      seg.areas.push_back(area);
    }
  }
  seg.segment_count = next_id;
  return seg;
}

SegmentPalette read_segment_colors(const ImageU8& gt_image, const SegmentMap& seg) {
  if (gt_image.height != seg.height || gt_image.width != seg.width) {
    throw std::invalid_argument("read_segment_colors: dimension mismatch");
  }
  // mode per segment; ordered map gives the lexicographic tie-break for free
  std::vector<std::map<Rgb, std::int64_t>> counts(seg.segment_count);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      std::int32_t id = seg.label(y, x);
      if (id > 0) {
        ++counts[id - 1][gt_image.at(y, x)];
      }
    }
  }
  SegmentPalette palette;
  palette.colors.resize(seg.segment_count);
  palette.background_flags.assign(seg.segment_count, false);
  for (int i = 0; i < seg.segment_count; ++i) {
    Rgb best{};
    std::int64_t best_count = -1;
    for (const auto& [color, count] : counts[i]) {
      if (count > best_count) {
        best = color;
        best_count = count;
      }
    }
    palette.colors[i] = best;
  }
  return palette;
}

ImageU8 unify_line_colors(const ImageU8& image, int line_threshold) {
  ImageU8 out = image;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (!is_canvas_pixel(out.at(y, x), line_threshold)) {
        out.set(y, x, kBlack);
      }
    }
  }
  return out;
}

std::set<int> identify_background(const SegmentMap& seg, const SegmentPalette* palette,
                                  Rgb background_color, double area_fraction) {
  std::vector<bool> touches_border(seg.segment_count, false);
  auto mark = [&](int y, int x) {
    std::int32_t id = seg.label(y, x);
    if (id > 0) {
      touches_border[id - 1] = true;
    }
  };
  for (int x = 0; x < seg.width; ++x) {
    mark(0, x);
    mark(seg.height - 1, x);
  }
  for (int y = 0; y < seg.height; ++y) {
    mark(y, 0);
    mark(y, seg.width - 1);
  }

  std::set<int> background;
  const double total = static_cast<double>(seg.height) * seg.width;
  for (int id = 1; id <= seg.segment_count; ++id) {
    if (!touches_border[id - 1]) {
      continue;
    }
    if (palette != nullptr) {
      if (palette->colors[id - 1] == background_color) {
        background.insert(id);
      }
    } else if (static_cast<double>(seg.area(id)) > area_fraction * total) {
      background.insert(id);
    }
  }
  return background;
}

ImageU8 render_segments(const SegmentMap& seg, const std::vector<Rgb>& colors) {
  if (static_cast<int>(colors.size()) != seg.segment_count) {
    throw std::invalid_argument("render_segments: color count mismatch");
  }
  ImageU8 out(seg.height, seg.width, kBlack);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      std::int32_t id = seg.label(y, x);
      if (id > 0) {
        out.set(y, x, colors[id - 1]);
      }
    }
  }
  return out;
}

void save_segment_map(const fs::path& png_path, const SegmentMap& seg,
                      const SegmentPalette* palette, const std::set<int>* background_ids) {
  if (seg.segment_count > 0xFFFF) {
    throw std::runtime_error("save_segment_map: segment count exceeds 16-bit labels");
  }
  std::vector<std::uint16_t> labels16(seg.labels.size());
  for (std::size_t i = 0; i < seg.labels.size(); ++i) {
    labels16[i] = static_cast<std::uint16_t>(seg.labels[i]);
  }
  write_label_png(png_path, labels16, seg.height, seg.width);

  json sidecar;
  sidecar["segment_count"] = seg.segment_count;
  sidecar["areas"] = seg.areas;
  json colors = json::array();
  if (palette != nullptr) {
    for (const Rgb& c : palette->colors) {
      colors.push_back({c.r, c.g, c.b});
    }
  }
  sidecar["colors"] = colors;
  json bg = json::array();
  if (background_ids != nullptr) {
    for (int id : *background_ids) {
      bg.push_back(id);
    }
  } else if (palette != nullptr) {
    for (int id = 1; id <= seg.segment_count; ++id) {
      if (palette->background_flags[id - 1]) {
        bg.push_back(id);
      }
    }
  }
  sidecar["background_ids"] = bg;

  fs::path json_path = png_path;
  json_path.replace_extension(".json");
  write_file_atomic(json_path, sidecar.dump(2) + "\n");
}

SegmentMap load_segment_map(const fs::path& png_path, SegmentPalette* palette_out) {
  SegmentMap seg;
  std::vector<std::uint16_t> labels16 = read_label_png(png_path, seg.height, seg.width);
  seg.labels.assign(labels16.begin(), labels16.end());

  fs::path json_path = png_path;
  json_path.replace_extension(".json");
  auto bytes = read_file_bytes(json_path);
  json sidecar = json::parse(bytes.begin(), bytes.end());
  seg.segment_count = sidecar.at("segment_count").get<int>();
  seg.areas = sidecar.at("areas").get<std::vector<std::int64_t>>();

  if (palette_out != nullptr) {
    palette_out->colors.clear();
    palette_out->background_flags.clear();
    for (const auto& c : sidecar.at("colors")) {
      palette_out->colors.push_back(
          {c.at(0).get<std::uint8_t>(), c.at(1).get<std::uint8_t>(), c.at(2).get<std::uint8_t>()});
    }
    palette_out->background_flags.assign(seg.segment_count, false);
    for (const auto& id : sidecar.at("background_ids")) {
      int v = id.get<int>();
      if (v >= 1 && v <= seg.segment_count) {
        palette_out->background_flags[v - 1] = true;
      }
    }
  }
  return seg;
}

}  // namespace segcolor
