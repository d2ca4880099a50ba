#include "segcolor/image.hpp"

#include <algorithm>
#include <cmath>

namespace segcolor {

ImageU8::ImageU8(int h, int w, Rgb fill) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3) {
  for (std::size_t i = 0; i < data.size(); i += 3) {
    data[i] = fill.r;
    data[i + 1] = fill.g;
    data[i + 2] = fill.b;
  }
}

FeatureMap::FeatureMap(int h, int w, int c, float fill)
    : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

FeatureMap to_feature_map(const ImageU8& image) {
  FeatureMap map(image.height, image.width, 3);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    map.data[i] = static_cast<float>(image.data[i]);
  }
  return map;
}

ImageU8 to_image(const FeatureMap& map) {
  ImageU8 image(map.height, map.width);
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    float v = std::round(map.data[i]);
    image.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
  }
  return image;
}

std::string to_string(Rgb c) {
  return "(" + std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b) + ")";
}

}  // namespace segcolor
