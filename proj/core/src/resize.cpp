#include "segcolor/resize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segcolor {

std::vector<BilinearTap> bilinear_taps(int src_size, int dst_size) {
  if (src_size < 1 || dst_size < 1) {
    throw std::invalid_argument("bilinear_taps: sizes must be >= 1");
  }
  std::vector<BilinearTap> taps(dst_size);
  const double scale = static_cast<double>(src_size) / dst_size;
  for (int i = 0; i < dst_size; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    double lo = std::floor(src);
    double frac = src - lo;
    int lo_i = static_cast<int>(lo);
    BilinearTap& t = taps[i];
    t.lo = std::clamp(lo_i, 0, src_size - 1);
    t.hi = std::clamp(lo_i + 1, 0, src_size - 1);
    t.w_hi = static_cast<float>(frac);
    t.w_lo = static_cast<float>(1.0 - frac);
    if (lo_i < 0) {  // clamped below: all weight on tap 0
      t.w_lo = 1.0f;
      t.w_hi = 0.0f;
    } else if (lo_i + 1 > src_size - 1) {
      t.w_lo = 1.0f;
      t.w_hi = 0.0f;
    }
  }
  return taps;
}

FeatureMap resize_feature_map(const FeatureMap& map, int target_height, int target_width) {
  if (map.height == target_height && map.width == target_width) {
    return map;
  }
  const int c = map.channels;
  FeatureMap out(target_height, target_width, c);
  auto ty = bilinear_taps(map.height, target_height);
  auto tx = bilinear_taps(map.width, target_width);
  std::vector<float> row_lo(static_cast<std::size_t>(target_width) * c);
  std::vector<float> row_hi(row_lo.size());
  for (int y = 0; y < target_height; ++y) {
    const BilinearTap& vy = ty[y];
    // horizontal pass on the two contributing source rows
    for (int x = 0; x < target_width; ++x) {
      const BilinearTap& vx = tx[x];
      const float* a_lo = map.pixel(vy.lo, vx.lo);
      const float* b_lo = map.pixel(vy.lo, vx.hi);
      const float* a_hi = map.pixel(vy.hi, vx.lo);
      const float* b_hi = map.pixel(vy.hi, vx.hi);
      float* r_lo = row_lo.data() + static_cast<std::size_t>(x) * c;
      float* r_hi = row_hi.data() + static_cast<std::size_t>(x) * c;
      for (int k = 0; k < c; ++k) {
        r_lo[k] = vx.w_lo * a_lo[k] + vx.w_hi * b_lo[k];
        r_hi[k] = vx.w_lo * a_hi[k] + vx.w_hi * b_hi[k];
      }
    }
    float* dst = out.pixel(y, 0);
    for (std::size_t i = 0; i < row_lo.size(); ++i) {
      dst[i] = vy.w_lo * row_lo[i] + vy.w_hi * row_hi[i];
    }
  }
  return out;
}

ImageU8 resize_image(const ImageU8& image, int target_height, int target_width) {
  if (image.height == target_height && image.width == target_width) {
    return image;
  }
  return to_image(resize_feature_map(to_feature_map(image), target_height, target_width));
}

std::vector<std::int32_t> resize_labels_nearest(const std::vector<std::int32_t>& labels, int height,
                                                int width, int target_height, int target_width) {
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("resize_labels_nearest: buffer does not match dims");
  }
  std::vector<std::int32_t> out(static_cast<std::size_t>(target_height) * target_width);
  for (int y = 0; y < target_height; ++y) {
    double sy = (y + 0.5) * static_cast<double>(height) / target_height - 0.5;
    int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, height - 1);
    for (int x = 0; x < target_width; ++x) {
      double sx = (x + 0.5) * static_cast<double>(width) / target_width - 0.5;
      int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, width - 1);
      out[static_cast<std::size_t>(y) * target_width + x] =
          labels[static_cast<std::size_t>(iy) * width + ix];
    }
  }
  return out;
}

}  // namespace segcolor
