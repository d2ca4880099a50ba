#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace segcolor {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};

/// Interleaved 8-bit RGB image, row-major. Line drawings are colored line
/// pixels on a near-white canvas.
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // height*width*3

  ImageU8() = default;
  ImageU8(int h, int w, Rgb fill = kWhite);

  Rgb at(int y, int x) const {
    const std::uint8_t* p = data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    return {p[0], p[1], p[2]};
  }
  void set(int y, int x, Rgb c) {
    std::uint8_t* p = data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return data.empty(); }
};

/// Dense H x W x C float map, channel-last row-major.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;  // height*width*channels

  FeatureMap() = default;
  FeatureMap(int h, int w, int c, float fill = 0.0f);

  float* pixel(int y, int x) {
    return data.data() + static_cast<std::size_t>(channels) * (static_cast<std::size_t>(y) * width + x);
  }
  const float* pixel(int y, int x) const {
    return data.data() + static_cast<std::size_t>(channels) * (static_cast<std::size_t>(y) * width + x);
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const FeatureMap& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Converts an RGB image to a 3-channel float map in [0, 255].
FeatureMap to_feature_map(const ImageU8& image);
/// Rounds and clamps a 3-channel float map back to an RGB image.
ImageU8 to_image(const FeatureMap& map);

std::string to_string(Rgb c);

}  // namespace segcolor
