#include "segcolor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "segcolor/image_io.hpp"

namespace segcolor {

using nlohmann::json;

SegmentAccuracy segment_metrics(const ColorAssignment& pred, const SegmentPalette& gt,
                                const SegmentMap& seg) {
  const int n = seg.segment_count;
  if (n == 0) {
    throw std::runtime_error("segment_metrics: no segments");
  }
  if (pred.size() != n || gt.size() != n) {
    throw std::invalid_argument("segment_metrics: misaligned inputs");
  }
  int correct = 0;
  int thresh_total = 0;
  int thresh_correct = 0;
  for (int i = 0; i < n; ++i) {
    const bool ok = pred.colors[static_cast<std::size_t>(i)] == gt.colors[static_cast<std::size_t>(i)];
    if (ok) ++correct;
    if (seg.area(i + 1) > kAccThreshMinArea) {
      ++thresh_total;
      if (ok) ++thresh_correct;
    }
  }
  SegmentAccuracy out;
  out.acc = 100.0 * correct / n;
  if (thresh_total > 0) {
    out.acc_thresh = 100.0 * thresh_correct / thresh_total;
  }
  return out;
}

PixelAccuracy pixel_metrics(const ImageU8& pred_render, const ImageU8& gt_image,
                            const SegmentMap& seg, const std::set<int>& background_ids,
                            Rgb background_color) {
  if (pred_render.height != seg.height || pred_render.width != seg.width ||
      gt_image.height != seg.height || gt_image.width != seg.width) {
    throw std::invalid_argument("pixel_metrics: dimension mismatch");
  }
  std::int64_t total = 0, match = 0;
  std::int64_t fg_total = 0, fg_match = 0;
  std::int64_t inter = 0, uni = 0;
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      const std::int32_t id = seg.label(y, x);
      if (id <= 0) continue;  // line pixels carry no assignment
      const Rgb p = pred_render.at(y, x);
      const Rgb g = gt_image.at(y, x);
      ++total;
      if (p == g) ++match;
      const bool gt_bg = background_ids.count(id) > 0;
      if (!gt_bg) {
        ++fg_total;
        if (p == g) ++fg_match;
      }
      const bool pred_bg = p == background_color;
      if (pred_bg && gt_bg) ++inter;
      if (pred_bg || gt_bg) ++uni;
    }
  }
  if (total == 0) {
    throw std::runtime_error("pixel_metrics: no segment pixels");
  }
  PixelAccuracy out;
  out.pix_acc = 100.0 * static_cast<double>(match) / static_cast<double>(total);
  if (fg_total > 0) {
    out.pix_f_acc = 100.0 * static_cast<double>(fg_match) / static_cast<double>(fg_total);
  }
  out.pix_b_miou = uni == 0 ? 100.0 : 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
  return out;
}

ColorAssignment postprocess_generated(const ImageU8& image, const SegmentMap& seg,
                                      const std::vector<Rgb>& pool_palette) {
  if (pool_palette.empty()) {
    throw std::runtime_error("postprocess_generated: empty palette");
  }
  if (image.height != seg.height || image.width != seg.width) {
    throw std::invalid_argument("postprocess_generated: image must match segment dims");
  }
  auto nearest = [&pool_palette](Rgb c) {
    int best = 0;
    std::int64_t best_d = -1;
    for (std::size_t i = 0; i < pool_palette.size(); ++i) {
      const Rgb p = pool_palette[i];
      const std::int64_t dr = static_cast<int>(c.r) - p.r;
      const std::int64_t dg = static_cast<int>(c.g) - p.g;
      const std::int64_t db = static_cast<int>(c.b) - p.b;
      const std::int64_t d = dr * dr + dg * dg + db * db;
      if (best_d < 0 || d < best_d || (d == best_d && p < pool_palette[static_cast<std::size_t>(best)])) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  };

  std::vector<std::map<Rgb, std::int64_t>> counts(seg.segment_count);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      const std::int32_t id = seg.label(y, x);
      if (id <= 0) continue;
      ++counts[static_cast<std::size_t>(id) - 1]
              [pool_palette[static_cast<std::size_t>(nearest(image.at(y, x)))]];
    }
  }
  ColorAssignment out;
  out.colors.resize(static_cast<std::size_t>(seg.segment_count));
  out.matched_row.resize(static_cast<std::size_t>(seg.segment_count), -1);
  out.confidence.resize(static_cast<std::size_t>(seg.segment_count), 0.0);
  for (int i = 0; i < seg.segment_count; ++i) {
    Rgb best{};
    std::int64_t best_count = -1;
    std::int64_t pixels = 0;
    for (const auto& [color, count] : counts[static_cast<std::size_t>(i)]) {
      pixels += count;
      if (count > best_count) {  // map order gives the lexicographic tie-break
        best = color;
        best_count = count;
      }
    }
    out.colors[static_cast<std::size_t>(i)] = best;
    for (std::size_t r = 0; r < pool_palette.size(); ++r) {
      if (pool_palette[r] == best) {
        out.matched_row[static_cast<std::size_t>(i)] = static_cast<int>(r);
        break;
      }
    }
    out.confidence[static_cast<std::size_t>(i)] =
        pixels > 0 ? static_cast<double>(best_count) / static_cast<double>(pixels) : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Protocols
// ---------------------------------------------------------------------------

void EvalReport::finalize() {
  double acc_sum = 0, at_sum = 0, pa_sum = 0, pf_sum = 0, pb_sum = 0;
  int at_n = 0, pf_n = 0;
  for (const FrameScore& f : frames) {
    acc_sum += f.acc;
    pa_sum += f.pix_acc;
    pb_sum += f.pix_b_miou;
    if (f.acc_thresh) {
      at_sum += *f.acc_thresh;
      ++at_n;
    }
    if (f.pix_f_acc) {
      pf_sum += *f.pix_f_acc;
      ++pf_n;
    }
  }
  const double n = static_cast<double>(frames.size());
  if (!frames.empty()) {
    acc = acc_sum / n;
    pix_acc = pa_sum / n;
    pix_b_miou = pb_sum / n;
    acc_thresh = at_n > 0 ? at_sum / at_n : 0.0;
    pix_f_acc = pf_n > 0 ? pf_sum / pf_n : 0.0;
  }
}

std::string EvalReport::to_json_string() const {
  json j;
  j["protocol"] = protocol;
  j["reference_spec"] = reference_spec;
  j["frame_count"] = frames.size();
  j["averages"] = {{"acc", acc},
                   {"acc_thresh", acc_thresh},
                   {"pix_acc", pix_acc},
                   {"pix_f_acc", pix_f_acc},
                   {"pix_b_miou", pix_b_miou}};
  json per_frame = json::array();
  for (const FrameScore& f : frames) {
    json e;
    e["frame"] = f.frame;
    e["acc"] = f.acc;
    if (f.acc_thresh) e["acc_thresh"] = *f.acc_thresh;
    e["pix_acc"] = f.pix_acc;
    if (f.pix_f_acc) e["pix_f_acc"] = *f.pix_f_acc;
    e["pix_b_miou"] = f.pix_b_miou;
    per_frame.push_back(std::move(e));
  }
  j["frames"] = per_frame;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << protocol << " (" << reference_spec << ", " << frames.size() << " frames)\n";
  out << "Acc      Acc-Thresh  Pix-Acc  Pix-F-Acc  Pix-B-MIoU\n";
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%-8.2f %-11.2f %-8.2f %-10.2f %-10.2f\n", acc, acc_thresh,
                pix_acc, pix_f_acc, pix_b_miou);
  out << buf;
  return out.str();
}

namespace {

struct LoadedFrame {
  ImageU8 line;
  ImageU8 gt;
  SegmentMap seg;
  SegmentPalette palette;
};

LoadedFrame load_frame(const FrameRecord& frame) {
  LoadedFrame out;
  out.line = read_image(frame.line_path);
  out.gt = read_image(frame.gt_path);
  out.seg = load_segment_map(frame.seg_path);
  out.palette = read_segment_colors(out.gt, out.seg);
  return out;
}

std::optional<FeatureMap> cached_semantic(const SemanticProvider& semantic,
                                          const FrameRecord& frame, bool mono) {
  if (mono) return std::nullopt;  // mono transforms the image; grids are per-path
  try {
    return semantic.features_for(frame.line_path);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

ReferenceSpec reference_from_frame(const FrameRecord& frame, const SemanticProvider& semantic,
                                   bool mono) {
  LoadedFrame loaded = load_frame(frame);
  ReferenceSpec ref;
  ref.line = std::move(loaded.line);
  ref.seg = std::move(loaded.seg);
  ref.palette = std::move(loaded.palette);
  ref.semantic = cached_semantic(semantic, frame, mono);
  return ref;
}

FrameScore score_frame(const std::string& frame_id, const ColorizeResult& result,
                       const LoadedFrame& target, Rgb background_color) {
  FrameScore score;
  score.frame = frame_id;
  SegmentAccuracy sa = segment_metrics(result.assignment, target.palette, target.seg);
  score.acc = sa.acc;
  score.acc_thresh = sa.acc_thresh;
  std::set<int> background = identify_background(target.seg, &target.palette, background_color);
  PixelAccuracy pa =
      pixel_metrics(result.rendering, target.gt, target.seg, background, background_color);
  score.pix_acc = pa.pix_acc;
  score.pix_f_acc = pa.pix_f_acc;
  score.pix_b_miou = pa.pix_b_miou;
  return score;
}

std::vector<const FrameRecord*> sheet_refs(const CharacterRecord& character, int shots) {
  std::vector<const FrameRecord*> out;
  for (const FrameRecord& f : character.sheet) {
    if (!f.supervised()) continue;
    out.push_back(&f);
    if (shots != kAllShots && static_cast<int>(out.size()) >= shots) break;
  }
  return out;
}

}  // namespace

EvalReport run_keyframe_protocol(const DatasetIndex& index, const Model* model,
                                 const SemanticProvider& semantic, int shots,
                                 const EvalOptions& options) {
  EvalReport report;
  report.protocol = "keyframe";
  report.reference_spec =
      shots == kAllShots ? "shots=max" : "shots=" + std::to_string(shots);

  for (const CharacterRecord* character : index.split(options.split)) {
    auto refs_frames = sheet_refs(*character, shots);
    if (refs_frames.empty()) {
      throw std::runtime_error("keyframe protocol: character " + character->name +
                               " has no usable design sheet");
    }
    std::vector<ReferenceSpec> refs;
    refs.reserve(refs_frames.size());
    for (const FrameRecord* f : refs_frames) {
      refs.push_back(reference_from_frame(*f, semantic, options.colorize.mono));
    }
    for (const ClipRecord& clip : character->clips) {
      for (const FrameRecord& frame : clip.frames) {
        if (!frame.supervised()) {
          report.warnings.push_back(frame.line_path.string() + ": unsupervised, skipped");
          continue;
        }
        LoadedFrame target = load_frame(frame);
        std::optional<FeatureMap> grid =
            cached_semantic(semantic, frame, options.colorize.mono);
        ColorizeResult result =
            colorize(target.line, refs, model, semantic, options.colorize, &target.seg,
                     grid.has_value() ? &*grid : nullptr);
        report.frames.push_back(
            score_frame(character->name + "/" + clip.clip + "/" + frame.name, result, target,
                        options.background_color));
      }
    }
  }
  report.finalize();
  return report;
}

EvalReport run_consecutive_protocol(const DatasetIndex& index, const Model* model,
                                    const SemanticProvider& semantic, ConsecutiveRefs mode,
                                    int extra_shots, const EvalOptions& options) {
  EvalReport report;
  report.protocol = "consecutive";
  switch (mode) {
    case ConsecutiveRefs::kPrev: report.reference_spec = "-1 frame"; break;
    case ConsecutiveRefs::kPrevNext: report.reference_spec = "+-1 frame"; break;
    case ConsecutiveRefs::kFirst: report.reference_spec = "first frame"; break;
  }
  if (extra_shots != 0) {
    report.reference_spec +=
        extra_shots == kAllShots ? " + max shots" : " + " + std::to_string(extra_shots) + " shots";
  }

  for (const CharacterRecord* character : index.split(options.split)) {
    std::vector<ReferenceSpec> sheet;
    if (extra_shots != 0) {
      for (const FrameRecord* f : sheet_refs(*character, extra_shots)) {
        sheet.push_back(reference_from_frame(*f, semantic, options.colorize.mono));
      }
    }
    for (const ClipRecord& clip : character->clips) {
      const int n = static_cast<int>(clip.frames.size());
      if (n < 2) continue;
      const int first = 1;
      const int last = mode == ConsecutiveRefs::kPrevNext ? n - 2 : n - 1;
      for (int t = first; t <= last; ++t) {
        const FrameRecord& frame = clip.frames[static_cast<std::size_t>(t)];
        if (!frame.supervised()) {
          report.warnings.push_back(frame.line_path.string() + ": unsupervised, skipped");
          continue;
        }
        std::vector<int> ref_indices;
        switch (mode) {
          case ConsecutiveRefs::kPrev: ref_indices = {t - 1}; break;
          case ConsecutiveRefs::kPrevNext: ref_indices = {t - 1, t + 1}; break;
          case ConsecutiveRefs::kFirst: ref_indices = {0}; break;
        }
        bool refs_ok = true;
        std::vector<ReferenceSpec> refs;
        for (int r : ref_indices) {
          const FrameRecord& ref_frame = clip.frames[static_cast<std::size_t>(r)];
          if (!ref_frame.supervised()) {
            report.warnings.push_back(frame.line_path.string() +
                                      ": reference lacks ground truth, frame skipped");
            refs_ok = false;
            break;
          }
          refs.push_back(reference_from_frame(ref_frame, semantic, options.colorize.mono));
        }
        if (!refs_ok) continue;
        for (const ReferenceSpec& s : sheet) refs.push_back(s);

        LoadedFrame target = load_frame(frame);
        std::optional<FeatureMap> grid =
            cached_semantic(semantic, frame, options.colorize.mono);
        ColorizeResult result =
            colorize(target.line, refs, model, semantic, options.colorize, &target.seg,
                     grid.has_value() ? &*grid : nullptr);
        report.frames.push_back(
            score_frame(character->name + "/" + clip.clip + "/" + frame.name, result, target,
                        options.background_color));
      }
    }
  }
  report.finalize();
  return report;
}

}  // namespace segcolor
