#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "segcolor/image.hpp"
#include "segcolor/layers.hpp"
#include "segcolor/resize.hpp"

namespace segcolor {

inline constexpr int kSemanticChannels = 1024;  // C_d
inline constexpr int kSpatialChannels = 128;    // C_u
inline constexpr int kSemanticInputSide = 518;
inline constexpr int kSemanticPatchSize = 14;   // 518 / 14 = 37 grid
inline constexpr int kSpatialTrainSide = 512;

/// Frozen semantic feature extractor. Implementations must be deterministic:
/// byte-identical inputs produce byte-identical grids.
class SemanticBackbone {
 public:
  virtual ~SemanticBackbone() = default;
  /// `image` is already resized to input_side() x input_side().
  virtual FeatureMap encode_resized(const ImageU8& image) const = 0;
  virtual int input_side() const { return kSemanticInputSide; }
  virtual int patch_size() const { return kSemanticPatchSize; }
  virtual int channels() const { return kSemanticChannels; }
  virtual std::string name() const = 0;
  int grid_side() const { return input_side() / patch_size(); }
};

/// Resizes to the backbone's input side (bilinear) and extracts the patch grid.
FeatureMap encode_semantic(const ImageU8& image, const SemanticBackbone& backbone);

/// Deterministic patch-statistics encoder (color moments, line density,
/// positional harmonics, expanded to channels() dims by a fixed projection).
/// Needs no external weights; the default for fixtures and out-of-the-box runs.
class ProceduralBackbone final : public SemanticBackbone {
 public:
  explicit ProceduralBackbone(int channels = kSemanticChannels);
  FeatureMap encode_resized(const ImageU8& image) const override;
  int channels() const override { return channels_; }
  std::string name() const override { return "procedural"; }

 private:
  int channels_;
  MatrixRM projection_;  // stats -> channels, fixed seed
};

/// ViT encoder (DINOv2-style: pre-norm blocks with layer scale, final norm,
/// patch tokens only). Weights load from a raw tensor archive; see the README
/// for converting the officially released checkpoint.
/// Throws std::runtime_error("backbone unavailable") on missing/corrupt files.
class VitBackbone final : public SemanticBackbone {
 public:
  explicit VitBackbone(const std::filesystem::path& weights_path);
  ~VitBackbone() override;
  FeatureMap encode_resized(const ImageU8& image) const override;
  int input_side() const override;
  int patch_size() const override;
  int channels() const override;
  std::string name() const override { return "vit"; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Resolves the full semantic grid for an image. The training pipeline reads
/// from the precomputed cache; ad-hoc colorization runs the backbone directly.
class SemanticProvider {
 public:
  virtual ~SemanticProvider() = default;
  virtual FeatureMap features_for(const std::filesystem::path& image_path) const = 0;
  virtual FeatureMap features_for_image(const ImageU8& image) const = 0;
  virtual int channels() const = 0;
};

class BackboneProvider final : public SemanticProvider {
 public:
  explicit BackboneProvider(std::shared_ptr<const SemanticBackbone> backbone)
      : backbone_(std::move(backbone)) {}
  FeatureMap features_for(const std::filesystem::path& image_path) const override;
  FeatureMap features_for_image(const ImageU8& image) const override;
  int channels() const override { return backbone_->channels(); }
  const SemanticBackbone& backbone() const { return *backbone_; }

 private:
  std::shared_ptr<const SemanticBackbone> backbone_;
};

/// 4-level convolutional encoder-decoder with skip connections; widths
/// 32/64/128/256 down, mirrored up, 1x1 head to kSpatialChannels. Output dims
/// equal input dims (internal padding to a multiple of 8 is cropped away).
class SpatialEncoder {
 public:
  static constexpr int kMinSide = 8;

  explicit SpatialEncoder(std::uint64_t seed);
  /// x: [H,W,3] in [0,1]. Throws when H or W < kMinSide.
  nn::VarPtr forward(const nn::VarPtr& x) const;
  /// No-grad convenience over forward().
  FeatureMap encode(const ImageU8& image) const;
  nn::ParamList params() const;

 private:
  nn::ConvBlock enc1_, enc2_, enc3_, enc4_;
  nn::ConvBlock dec3_, dec2_, dec1_;
  nn::Conv2d head_;
};

/// Spec-facing wrapper: runs the encoder at the image's own resolution.
FeatureMap encode_spatial(const ImageU8& image, const SpatialEncoder& encoder);

}  // namespace segcolor
