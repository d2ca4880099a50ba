#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "segcolor/segmentation.hpp"

namespace segcolor {

struct FrameRecord {
  std::string name;  // filename stem, ordering key
  std::filesystem::path line_path;
  std::filesystem::path gt_path;
  std::filesystem::path seg_path;  // 16-bit label PNG; JSON sidecar beside it
  bool has_gt = false;
  bool has_seg = false;

  bool supervised() const { return has_gt && has_seg; }
};

struct ClipRecord {
  std::string character;
  std::string clip;
  std::string split;
  std::vector<FrameRecord> frames;  // ordered by filename
};

struct CharacterRecord {
  std::string name;
  std::string split;
  std::vector<FrameRecord> sheet;  // color design sheet, filename order
  std::vector<ClipRecord> clips;
};

/// Index over root/<split>/<character>/<clip>/{line,gt,seg}/*.png with design
/// sheets at root/<split>/<character>/sheet/. Per-file problems become
/// warnings; the frame stays indexed but unsupervised.
struct DatasetIndex {
  std::filesystem::path root;
  std::vector<CharacterRecord> characters;
  std::vector<std::string> warnings;  // validation report

  std::vector<const CharacterRecord*> split(const std::string& name) const;
  std::size_t frame_count(const std::string& split_name) const;
};

/// Throws on a missing/empty root; anything recoverable lands in warnings.
DatasetIndex ingest_dataset(const std::filesystem::path& root);

struct ReferenceSampling {
  int offset_range = 2;        // candidates within [t-range, t+range]
  bool allow_zero_offset = true;
};

/// Uniform draw without replacement from the clip-clipped candidate window.
/// Only supervised frames qualify. Throws when the window is empty.
std::vector<int> sample_references(const ClipRecord& clip, int target_index, int count,
                                   std::mt19937_64& rng,
                                   const ReferenceSampling& sampling = {});

}  // namespace segcolor
