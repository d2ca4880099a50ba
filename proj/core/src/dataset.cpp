#include "segcolor/dataset.hpp"

#include <algorithm>
#include <stdexcept>

namespace segcolor {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<FrameRecord> scan_triplet_dir(const fs::path& dir, const std::string& context,
                                          std::vector<std::string>& warnings) {
  std::vector<FrameRecord> frames;
  for (const fs::path& line : sorted_pngs(dir / "line")) {
    FrameRecord frame;
    frame.name = line.stem().string();
    frame.line_path = line;
    frame.gt_path = dir / "gt" / line.filename();
    frame.seg_path = dir / "seg" / line.filename();
    frame.has_gt = fs::is_regular_file(frame.gt_path);
    frame.has_seg = fs::is_regular_file(frame.seg_path) &&
                    fs::is_regular_file(fs::path(frame.seg_path).replace_extension(".json"));
    if (!frame.has_gt) {
      warnings.push_back(context + "/" + frame.name + ": missing gt, excluded from supervision");
    }
    if (!frame.has_seg) {
      warnings.push_back(context + "/" + frame.name + ": missing segment map");
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace

std::vector<const CharacterRecord*> DatasetIndex::split(const std::string& name) const {
  std::vector<const CharacterRecord*> out;
  for (const CharacterRecord& c : characters) {
    if (c.split == name) out.push_back(&c);
  }
  return out;
}

std::size_t DatasetIndex::frame_count(const std::string& split_name) const {
  std::size_t n = 0;
  for (const CharacterRecord& c : characters) {
    if (c.split != split_name) continue;
    for (const ClipRecord& clip : c.clips) n += clip.frames.size();
  }
  return n;
}

DatasetIndex ingest_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw std::runtime_error("dataset root does not exist: " + root.string());
  }
  DatasetIndex index;
  index.root = root;

  std::vector<fs::path> split_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) split_dirs.push_back(entry.path());
  }
  std::sort(split_dirs.begin(), split_dirs.end());

  for (const fs::path& split_dir : split_dirs) {
    const std::string split = split_dir.filename().string();
    std::vector<fs::path> character_dirs;
    for (const auto& entry : fs::directory_iterator(split_dir)) {
      if (entry.is_directory()) character_dirs.push_back(entry.path());
    }
    std::sort(character_dirs.begin(), character_dirs.end());
    for (const fs::path& char_dir : character_dirs) {
      CharacterRecord character;
      character.name = char_dir.filename().string();
      character.split = split;
      std::vector<fs::path> clip_dirs;
      for (const auto& entry : fs::directory_iterator(char_dir)) {
        if (!entry.is_directory()) continue;
        if (entry.path().filename() == "sheet") {
          character.sheet = scan_triplet_dir(entry.path(), split + "/" + character.name + "/sheet",
                                             index.warnings);
        } else {
          clip_dirs.push_back(entry.path());
        }
      }
      std::sort(clip_dirs.begin(), clip_dirs.end());
      for (const fs::path& clip_dir : clip_dirs) {
        ClipRecord clip;
        clip.character = character.name;
        clip.clip = clip_dir.filename().string();
        clip.split = split;
        clip.frames = scan_triplet_dir(
            clip_dir, split + "/" + character.name + "/" + clip.clip, index.warnings);
        if (!clip.frames.empty()) {
          character.clips.push_back(std::move(clip));
        }
      }
      if (!character.clips.empty() || !character.sheet.empty()) {
        index.characters.push_back(std::move(character));
      }
    }
  }
  if (index.characters.empty()) {
    throw std::runtime_error("dataset root has no characters: " + root.string());
  }
  return index;
}

std::vector<int> sample_references(const ClipRecord& clip, int target_index, int count,
                                   std::mt19937_64& rng, const ReferenceSampling& sampling) {
  if (count < 1) {
    throw std::invalid_argument("sample_references: count must be >= 1");
  }
  const int n = static_cast<int>(clip.frames.size());
  if (target_index < 0 || target_index >= n) {
    throw std::invalid_argument("sample_references: target out of range");
  }
  std::vector<int> candidates;
  for (int i = std::max(0, target_index - sampling.offset_range);
       i <= std::min(n - 1, target_index + sampling.offset_range); ++i) {
    if (i == target_index && !sampling.allow_zero_offset) continue;
    if (!clip.frames[static_cast<std::size_t>(i)].supervised()) continue;
    candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw std::runtime_error("sample_references: no valid candidates");
  }
  const int take = std::min<int>(count, static_cast<int>(candidates.size()));
  // partial Fisher-Yates, deterministic under a fixed rng state
  std::vector<int> drawn;
  drawn.reserve(static_cast<std::size_t>(take));
  for (int i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::size_t j = pick(rng);
    std::swap(candidates[static_cast<std::size_t>(i)], candidates[j]);
    drawn.push_back(candidates[static_cast<std::size_t>(i)]);
  }
  return drawn;
}

}  // namespace segcolor
