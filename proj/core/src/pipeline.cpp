#include "segcolor/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "segcolor/image_io.hpp"

namespace segcolor {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Tensor;
using nn::VarPtr;

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

Model::Model(const TrainConfig& config, int semantic_dim)
    : config_(config), spatial_(config.seed), fusion_(semantic_dim, config.seed + 1) {}

nn::ParamList Model::params() const {
  nn::ParamList out = spatial_.params();
  nn::ParamList fusion = fusion_.params();
  out.insert(out.end(), fusion.begin(), fusion.end());
  return out;
}

Checkpoint Model::to_checkpoint(int epoch, const std::string& rng_state) const {
  Checkpoint checkpoint;
  checkpoint.config = config_;
  checkpoint.epoch = epoch;
  checkpoint.rng_state = rng_state;
  for (const auto& [name, var] : params()) {
    checkpoint.tensors.emplace_back(name, var->value);
  }
  return checkpoint;
}

Model Model::from_checkpoint(const Checkpoint& checkpoint) {
  int semantic_dim = kSemanticChannels;
  for (const auto& [name, tensor] : checkpoint.tensors) {
    if (name == "fusion.reduce1.weight") {
      semantic_dim = tensor.dim(0);
    }
  }
  Model model(checkpoint.config, semantic_dim);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, tensor] : checkpoint.tensors) {
    by_name[name] = &tensor;
  }
  for (const auto& [name, var] : model.params()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw std::runtime_error("checkpoint missing tensor: " + name);
    }
    if (it->second->shape != var->value.shape) {
      throw std::runtime_error("checkpoint tensor shape mismatch: " + name);
    }
    var->value = *it->second;
  }
  return model;
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

const CacheEntry* CacheManifest::find(const std::string& image_key) const {
  for (const CacheEntry& e : entries) {
    if (e.image == image_key) return &e;
  }
  return nullptr;
}

void CacheManifest::save(const fs::path& path) const {
  json j = json::array();
  for (const CacheEntry& e : entries) {
    j.push_back({{"image", e.image},
                 {"file", e.file},
                 {"checksum", e.checksum},
                 {"height", e.height},
                 {"width", e.width},
                 {"channels", e.channels}});
  }
  write_file_atomic(path, json({{"entries", j}}).dump(2) + "\n");
}

CacheManifest CacheManifest::load(const fs::path& path) {
  auto bytes = read_file_bytes(path);
  json j = json::parse(bytes.begin(), bytes.end());
  CacheManifest manifest;
  for (const auto& e : j.at("entries")) {
    manifest.entries.push_back({e.at("image").get<std::string>(), e.at("file").get<std::string>(),
                                e.at("checksum").get<std::string>(), e.at("height").get<int>(),
                                e.at("width").get<int>(), e.at("channels").get<int>()});
  }
  return manifest;
}

namespace {

std::string relative_key(const fs::path& path, const fs::path& root) {
  std::error_code ec;
  fs::path rel = fs::relative(path, root, ec);
  if (ec || rel.empty()) return path.generic_string();
  return rel.generic_string();
}

std::vector<const FrameRecord*> all_line_frames(const DatasetIndex& index) {
  std::vector<const FrameRecord*> frames;
  for (const CharacterRecord& character : index.characters) {
    for (const FrameRecord& f : character.sheet) frames.push_back(&f);
    for (const ClipRecord& clip : character.clips) {
      for (const FrameRecord& f : clip.frames) frames.push_back(&f);
    }
  }
  return frames;
}

}  // namespace

CacheManifest precompute_semantic_features(const DatasetIndex& index,
                                           const SemanticBackbone& backbone,
                                           const fs::path& cache_dir, int* computed_count) {
  fs::create_directories(cache_dir);
  const fs::path manifest_path = cache_dir / "manifest.json";
  CacheManifest manifest;
  if (fs::is_regular_file(manifest_path)) {
    manifest = CacheManifest::load(manifest_path);
  }
  int computed = 0;
  try {
    for (const FrameRecord* frame : all_line_frames(index)) {
      const std::string key = relative_key(frame->line_path, index.root);
      fs::path rel_file = fs::path(key);
      rel_file.replace_extension(".semfeat");
      const fs::path out_path = cache_dir / rel_file;

      if (const CacheEntry* existing = manifest.find(key)) {
        if (fs::is_regular_file(cache_dir / existing->file) &&
            to_hex(fnv1a64_file(cache_dir / existing->file)) == existing->checksum) {
          continue;
        }
      }
      FeatureMap grid = encode_semantic(read_image(frame->line_path), backbone);
      fs::create_directories(out_path.parent_path());
      write_semfeat(out_path, grid);
      ++computed;

      CacheEntry entry{key,        rel_file.generic_string(), to_hex(fnv1a64_file(out_path)),
                       grid.height, grid.width,               grid.channels};
      bool replaced = false;
      for (CacheEntry& e : manifest.entries) {
        if (e.image == key) {
          e = entry;
          replaced = true;
          break;
        }
      }
      if (!replaced) manifest.entries.push_back(std::move(entry));
    }
  } catch (...) {
    manifest.save(manifest_path);  // keep the partial manifest
    throw;
  }
  manifest.save(manifest_path);
  if (computed_count != nullptr) *computed_count = computed;
  return manifest;
}

CacheProvider::CacheProvider(fs::path cache_dir, fs::path dataset_root)
    : cache_dir_(std::move(cache_dir)), root_(std::move(dataset_root)) {
  manifest_ = CacheManifest::load(cache_dir_ / "manifest.json");
  if (manifest_.entries.empty()) {
    throw std::runtime_error("semantic cache is empty: " + cache_dir_.string());
  }
}

FeatureMap CacheProvider::features_for(const fs::path& image_path) const {
  const std::string key = relative_key(image_path, root_);
  const CacheEntry* entry = manifest_.find(key);
  if (entry == nullptr) {
    throw std::runtime_error("semantic cache has no entry for " + key);
  }
  return read_semfeat(cache_dir_ / entry->file, entry->height, entry->width, entry->channels);
}

FeatureMap CacheProvider::features_for_image(const ImageU8&) const {
  throw std::runtime_error("semantic cache cannot encode ad-hoc images; use a backbone");
}

int CacheProvider::channels() const { return manifest_.entries.front().channels; }

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

// One frame prepared for a training step: everything but the spatial forward,
// which depends on the current parameters.
struct PreparedFrame {
  ImageU8 line;                    // resized to train size
  std::vector<int> survivors;      // original segment ids present after resize
  std::vector<std::vector<std::int32_t>> pixel_lists;  // per survivor
  std::vector<Rgb> colors;         // per survivor
  MatrixRM semantic_pooled;        // survivors x C_d
};

class FrameCache {
 public:
  explicit FrameCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const PreparedFrame> get(const std::string& key) const {
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : it->second;
  }
  void put(const std::string& key, std::shared_ptr<const PreparedFrame> frame) {
    if (map_.size() >= capacity_ && !order_.empty()) {
      map_.erase(order_.front());
      order_.pop_front();
    }
    order_.push_back(key);
    map_[key] = std::move(frame);
  }

 private:
  std::size_t capacity_;
  std::list<std::string> order_;
  std::map<std::string, std::shared_ptr<const PreparedFrame>> map_;
};

std::shared_ptr<const PreparedFrame> prepare_frame(const FrameRecord& frame,
                                                   const TrainConfig& config,
                                                   const SemanticProvider& semantic,
                                                   FrameCache& cache) {
  const std::string key = frame.line_path.string();
  if (auto hit = cache.get(key)) return hit;

  auto prepared = std::make_shared<PreparedFrame>();
  ImageU8 line = read_image(frame.line_path);
  ImageU8 gt = read_image(frame.gt_path);
  SegmentMap seg = load_segment_map(frame.seg_path);
  SegmentPalette palette = read_segment_colors(gt, seg);

  const int side = config.train_resize;
  prepared->line = resize_image(line, side, side);
  SegmentMap resized;
  resized.height = side;
  resized.width = side;
  resized.segment_count = seg.segment_count;
  resized.labels = resize_labels_nearest(seg.labels, seg.height, seg.width, side, side);

  auto lists = segment_pixel_lists(resized);
  MaskPlane plane;
  plane.height = side;
  plane.width = side;
  for (int id = 1; id <= seg.segment_count; ++id) {
    if (lists[static_cast<std::size_t>(id) - 1].empty()) continue;  // vanished in the resize
    prepared->survivors.push_back(id);
    prepared->pixel_lists.push_back(std::move(lists[static_cast<std::size_t>(id) - 1]));
    prepared->colors.push_back(palette.colors[static_cast<std::size_t>(id) - 1]);
  }
  if (prepared->survivors.empty()) {
    throw std::runtime_error("no segments survive the training resize: " + key);
  }
  plane.lists = prepared->pixel_lists;
  FeatureMap grid = semantic.features_for(frame.line_path);
  prepared->semantic_pooled = pool_map_over_plane(grid, plane, config.pool_norm_mode());

  cache.put(key, prepared);
  return prepared;
}

struct TrainSample {
  const ClipRecord* clip;
  int target;
  std::vector<int> refs;
};

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetIndex& index,
                  const SemanticProvider& semantic, const fs::path& out_dir,
                  const TrainHooks& hooks) {
  fs::create_directories(out_dir);
  auto train_chars = index.split("train");
  std::vector<std::pair<const ClipRecord*, int>> targets;
  for (const CharacterRecord* character : train_chars) {
    for (const ClipRecord& clip : character->clips) {
      for (std::size_t i = 0; i < clip.frames.size(); ++i) {
        if (clip.frames[i].supervised()) {
          targets.emplace_back(&clip, static_cast<int>(i));
        }
      }
    }
  }
  if (targets.empty()) {
    throw std::runtime_error("train: no supervised frames in the train split");
  }

  Model model(config, semantic.channels());
  nn::ParamList params = model.params();
  nn::Adam adam;
  adam.lr = config.learning_rate;
  std::mt19937_64 rng(config.seed);
  FrameCache cache(64);
  ReferenceSampling sampling{config.ref_offset_range, config.allow_zero_offset};
  const LossWeights weights = config.loss_weights();

  TrainResult result;
  int step = 0;
  bool stop = false;
  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    std::vector<TrainSample> samples;
    samples.reserve(targets.size());
    std::vector<std::size_t> order(targets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      TrainSample sample;
      sample.clip = targets[i].first;
      sample.target = targets[i].second;
      sample.refs = sample_references(*sample.clip, sample.target, config.refs_per_step, rng,
                                      sampling);
      samples.push_back(std::move(sample));
    }

    for (std::size_t start = 0; start < samples.size() && !stop;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(samples.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<VarPtr> losses;
      double ce_sum = 0.0, dc_sum = 0.0;
      for (std::size_t s = start; s < end; ++s) {
        const TrainSample& sample = samples[s];
        auto target = prepare_frame(sample.clip->frames[static_cast<std::size_t>(sample.target)],
                                    config, semantic, cache);

        // spatial + fused features for the target
        VarPtr x_t = nn::make_leaf(nn::image_to_tensor(target->line));
        VarPtr u_t = nn::segment_pool_op(model.spatial().forward(x_t), target->pixel_lists);
        VarPtr d_t = nn::make_leaf(nn::from_matrix(target->semantic_pooled));
        VarPtr f_t = model.fusion().apply(d_t, u_t);

        // reference pool
        std::vector<VarPtr> f_parts;
        std::vector<MatrixRM> d_parts;
        std::vector<Rgb> pool_palette;
        for (int ref_index : sample.refs) {
          auto ref = prepare_frame(sample.clip->frames[static_cast<std::size_t>(ref_index)],
                                   config, semantic, cache);
          VarPtr x_r = nn::make_leaf(nn::image_to_tensor(ref->line));
          VarPtr u_r = nn::segment_pool_op(model.spatial().forward(x_r), ref->pixel_lists);
          VarPtr d_r = nn::make_leaf(nn::from_matrix(ref->semantic_pooled));
          f_parts.push_back(model.fusion().apply(d_r, u_r));
          d_parts.push_back(ref->semantic_pooled);
          pool_palette.insert(pool_palette.end(), ref->colors.begin(), ref->colors.end());
        }
        VarPtr f_r = nn::concat_rows(f_parts);
        MatrixRM d_r_all(f_r->value.dim(0), semantic.channels());
        Eigen::Index row = 0;
        for (const MatrixRM& part : d_parts) {
          d_r_all.middleRows(row, part.rows()) = part;
          row += part.rows();
        }

        VarPtr s_var = nn::cosine_similarity_op(f_r, f_t);
        SimilarityMap s_semantic = similarity_map(d_r_all, target->semantic_pooled);
        ColorClassTable table = ColorClassTable::from_palette(pool_palette);
        std::vector<int> gt_classes;
        gt_classes.reserve(target->colors.size());
        for (Rgb c : target->colors) gt_classes.push_back(table.class_of(c));

        MatchingLossResult detail;
        losses.push_back(
            matching_loss_op(s_var, s_semantic, table, gt_classes, weights, &detail));
        ce_sum += detail.ce;
        dc_sum += detail.dc;
      }
      VarPtr batch_loss = losses.front();
      for (std::size_t i = 1; i < losses.size(); ++i) batch_loss = nn::add(batch_loss, losses[i]);
      batch_loss = nn::scale(batch_loss, 1.0 / static_cast<double>(losses.size()));

      const double loss_value = batch_loss->value.data[0];
      ++step;
      StepLoss entry{step, ce_sum / static_cast<double>(losses.size()),
                     dc_sum / static_cast<double>(losses.size()), loss_value};
      result.curve.push_back(entry);
      if (!std::isfinite(loss_value)) {
        json diag;
        diag["step"] = step;
        diag["epoch"] = epoch;
        diag["loss"] = {{"ce", entry.ce}, {"dc", entry.dc}, {"total", entry.total}};
        diag["rng_state"] = rng_to_string(rng);
        json inputs = json::array();
        for (std::size_t s = start; s < end; ++s) {
          const TrainSample& sample = samples[s];
          json in;
          in["target"] =
              sample.clip->frames[static_cast<std::size_t>(sample.target)].line_path.string();
          for (int r : sample.refs) {
            in["refs"].push_back(
                sample.clip->frames[static_cast<std::size_t>(r)].line_path.string());
          }
          inputs.push_back(in);
        }
        diag["inputs"] = inputs;
        write_file_atomic(out_dir / ("diagnostic_step" + std::to_string(step) + ".json"),
                          diag.dump(2) + "\n");
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
      }

      nn::backward(batch_loss);
      adam.step(params);

      if (hooks.after_step && hooks.after_step(step, model)) {
        stop = true;
        result.stopped_early = true;
      }
    }

    Checkpoint checkpoint = model.to_checkpoint(epoch, rng_to_string(rng));
    fs::path ckpt_path = out_dir / ("checkpoint_epoch" + std::to_string(epoch) + ".bin");
    save_checkpoint(ckpt_path, checkpoint);
    result.checkpoint_paths.push_back(ckpt_path);
    while (static_cast<int>(result.checkpoint_paths.size()) > config.checkpoint_keep) {
      std::error_code ec;
      fs::remove(result.checkpoint_paths.front(), ec);
      result.checkpoint_paths.erase(result.checkpoint_paths.begin());
    }
    result.final_checkpoint = std::move(checkpoint);
  }
  if (result.curve.empty()) {
    throw std::runtime_error("train: no steps executed");
  }
  if (result.final_checkpoint.tensors.empty()) {
    result.final_checkpoint = model.to_checkpoint(0, rng_to_string(rng));
  }

  std::string csv = "step,ce,dc,total\n";
  for (const StepLoss& s : result.curve) {
    csv += std::to_string(s.step) + "," + std::to_string(s.ce) + "," + std::to_string(s.dc) +
           "," + std::to_string(s.total) + "\n";
  }
  write_file_atomic(out_dir / "loss_curve.csv", csv);
  return result;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

ReferenceSpec make_reference(const ImageU8& line, const ImageU8& gt, int line_threshold) {
  ReferenceSpec ref;
  ref.line = line;
  ref.seg = extract_segments(line, line_threshold);
  ref.palette = read_segment_colors(gt, ref.seg);
  return ref;
}

namespace {

MaskPlane plane_for(const SegmentMap& seg, const ColorizeOptions& options) {
  if (options.fixed_pooling &&
      (seg.height > options.fixed_pool_side || seg.width > options.fixed_pool_side)) {
    return downscaled_mask_plane(seg, options.fixed_pool_side);
  }
  return native_mask_plane(seg);
}

MatrixRM features_for_image(const ImageU8& prepared_line, const SegmentMap& seg,
                            const std::optional<FeatureMap>& precomputed_semantic,
                            const Model* model, const SemanticProvider& semantic,
                            const ColorizeOptions& options) {
  MaskPlane plane = plane_for(seg, options);
  FeatureMap grid = precomputed_semantic.has_value()
                        ? *precomputed_semantic
                        : semantic.features_for_image(prepared_line);
  MatrixRM d = pool_map_over_plane(grid, plane, options.pool_norm);
  if (options.zero_shot || model == nullptr) {
    return d;
  }
  FeatureMap u_map = model->spatial().encode(prepared_line);
  MatrixRM u = pool_map_over_plane(u_map, plane, options.pool_norm);
  return fuse(d, u, model->fusion());
}

}  // namespace

ColorizeResult colorize(const ImageU8& target_line, const std::vector<ReferenceSpec>& refs,
                        const Model* model, const SemanticProvider& semantic,
                        const ColorizeOptions& options, const SegmentMap* target_seg,
                        const FeatureMap* target_semantic) {
  if (refs.empty()) {
    throw std::runtime_error("no references");
  }
  for (const ReferenceSpec& ref : refs) {
    if (ref.palette.colors.empty()) {
      throw std::runtime_error("reference has an empty palette");
    }
  }
  ColorizeResult result;
  result.target_seg =
      target_seg != nullptr ? *target_seg : extract_segments(target_line, options.line_threshold);

  std::vector<std::pair<MatrixRM, SegmentPalette>> pool_parts;
  pool_parts.reserve(refs.size());
  for (const ReferenceSpec& ref : refs) {
    ImageU8 prepared =
        options.mono ? unify_line_colors(ref.line, options.line_threshold) : ref.line;
    pool_parts.emplace_back(
        features_for_image(prepared, ref.seg, ref.semantic, model, semantic, options),
        ref.palette);
  }
  result.pool = build_reference_pool(pool_parts);

  ImageU8 prepared_target =
      options.mono ? unify_line_colors(target_line, options.line_threshold) : target_line;
  std::optional<FeatureMap> target_grid;
  if (target_semantic != nullptr) target_grid = *target_semantic;
  MatrixRM f_t = features_for_image(prepared_target, result.target_seg, target_grid, model,
                                    semantic, options);

  result.similarity = similarity_map(result.pool.features, f_t);
  result.assignment = propagate_colors(result.similarity, result.pool);
  result.rendering = render_segments(result.target_seg, result.assignment.colors);
  return result;
}

ColorizeResult colorize_zero_shot(const ImageU8& target_line,
                                  const std::vector<ReferenceSpec>& refs,
                                  const SemanticProvider& semantic,
                                  const ColorizeOptions& options, const SegmentMap* target_seg,
                                  const FeatureMap* target_semantic) {
  ColorizeOptions zero = options;
  zero.zero_shot = true;
  return colorize(target_line, refs, nullptr, semantic, zero, target_seg, target_semantic);
}

}  // namespace segcolor
