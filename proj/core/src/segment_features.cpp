#include "segcolor/segment_features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segcolor {

using nn::Tensor;
using nn::VarPtr;

std::vector<std::vector<std::int32_t>> segment_pixel_lists(const SegmentMap& seg) {
  std::vector<std::vector<std::int32_t>> lists(seg.segment_count);
  const std::size_t n = static_cast<std::size_t>(seg.height) * seg.width;
  for (std::size_t p = 0; p < n; ++p) {
    std::int32_t id = seg.labels[p];
    if (id > 0) {
      lists[id - 1].push_back(static_cast<std::int32_t>(p));
    }
  }
  return lists;
}

MaskPlane native_mask_plane(const SegmentMap& seg) {
  MaskPlane plane;
  plane.height = seg.height;
  plane.width = seg.width;
  plane.lists = segment_pixel_lists(seg);
  return plane;
}

namespace {

struct Window {
  int begin;
  int end;
};

// ceil-mode adaptive windows covering [0, src) with dst cells
std::vector<Window> adaptive_windows(int src, int dst) {
  std::vector<Window> w(dst);
  for (int i = 0; i < dst; ++i) {
    w[i].begin = static_cast<int>(static_cast<std::int64_t>(i) * src / dst);
    w[i].end = static_cast<int>((static_cast<std::int64_t>(i) + 1) * src + dst - 1) / dst;
    w[i].end = std::min(w[i].end, src);
  }
  return w;
}

double pool_denominator(std::size_t mask_pixels, std::size_t plane_pixels, PoolNorm norm) {
  if (mask_pixels == 0) {
    throw std::runtime_error("degenerate segment");
  }
  return norm == PoolNorm::kMaskArea ? static_cast<double>(mask_pixels)
                                     : static_cast<double>(plane_pixels);
}

}  // namespace

MaskPlane downscaled_mask_plane(const SegmentMap& seg, int side) {
  MaskPlane plane;
  plane.height = std::min(side, seg.height);
  plane.width = std::min(side, seg.width);
  plane.lists.resize(seg.segment_count);
  if (plane.height == seg.height && plane.width == seg.width) {
    plane.lists = segment_pixel_lists(seg);
    return plane;
  }
  const auto wys = adaptive_windows(seg.height, plane.height);
  const auto wxs = adaptive_windows(seg.width, plane.width);
  std::vector<std::int32_t> present;
  for (int y = 0; y < plane.height; ++y) {
    for (int x = 0; x < plane.width; ++x) {
      present.clear();
      for (int sy = wys[y].begin; sy < wys[y].end; ++sy) {
        for (int sx = wxs[x].begin; sx < wxs[x].end; ++sx) {
          std::int32_t id = seg.label(sy, sx);
          if (id > 0 && std::find(present.begin(), present.end(), id) == present.end()) {
            present.push_back(id);
          }
        }
      }
      for (std::int32_t id : present) {
        plane.lists[id - 1].push_back(static_cast<std::int32_t>(y) * plane.width + x);
      }
    }
  }
  return plane;
}

MatrixRM segment_pool(const FeatureMap& map, const SegmentMap& seg, PoolNorm norm) {
  if (map.height != seg.height || map.width != seg.width) {
    throw std::invalid_argument("segment_pool: map and segment dims differ");
  }
  const int c = map.channels;
  MatrixRM out = MatrixRM::Zero(seg.segment_count, c);
  std::vector<std::int64_t> counts(seg.segment_count, 0);
  const std::size_t n = static_cast<std::size_t>(seg.height) * seg.width;
  for (std::size_t p = 0; p < n; ++p) {
    std::int32_t id = seg.labels[p];
    if (id <= 0) continue;
    ++counts[id - 1];
    const float* src = map.data.data() + p * c;
    auto row = out.row(id - 1);
    for (int k = 0; k < c; ++k) row(k) += src[k];
  }
  for (int i = 0; i < seg.segment_count; ++i) {
    out.row(i) /= pool_denominator(static_cast<std::size_t>(counts[i]), n, norm);
  }
  return out;
}

MatrixRM pool_map_over_plane(const FeatureMap& map, const MaskPlane& plane, PoolNorm norm) {
  const int c = map.channels;
  const std::size_t plane_pixels = static_cast<std::size_t>(plane.height) * plane.width;
  const std::size_t src_pixels = static_cast<std::size_t>(map.height) * map.width;
  const int m = static_cast<int>(plane.lists.size());

  if (map.height == plane.height && map.width == plane.width) {
    MatrixRM out = MatrixRM::Zero(m, c);
    for (int i = 0; i < m; ++i) {
      auto row = out.row(i);
      for (std::int32_t p : plane.lists[i]) {
        const float* src = map.data.data() + static_cast<std::size_t>(p) * c;
        for (int k = 0; k < c; ++k) row(k) += src[k];
      }
      out.row(i) /= pool_denominator(plane.lists[i].size(), plane_pixels, norm);
    }
    return out;
  }

  const auto ty = bilinear_taps(map.height, plane.height);
  const auto tx = bilinear_taps(map.width, plane.width);

  // Small source grids (patch-token grids) go through an M x src_pixels tap
  // weight matrix and a single GEMM; large sources accumulate directly.
  if (src_pixels <= 65536) {
    MatrixRM weights = MatrixRM::Zero(m, static_cast<int>(src_pixels));
    for (int i = 0; i < m; ++i) {
      auto row = weights.row(i);
      for (std::int32_t p : plane.lists[i]) {
        const BilinearTap& wy = ty[p / plane.width];
        const BilinearTap& wx = tx[p % plane.width];
        row(wy.lo * map.width + wx.lo) += static_cast<double>(wy.w_lo) * wx.w_lo;
        row(wy.lo * map.width + wx.hi) += static_cast<double>(wy.w_lo) * wx.w_hi;
        row(wy.hi * map.width + wx.lo) += static_cast<double>(wy.w_hi) * wx.w_lo;
        row(wy.hi * map.width + wx.hi) += static_cast<double>(wy.w_hi) * wx.w_hi;
      }
      if (plane.lists[i].empty()) {
        throw std::runtime_error("degenerate segment");
      }
      row /= pool_denominator(plane.lists[i].size(), plane_pixels, norm);
    }
    MatrixRM src(static_cast<int>(src_pixels), c);
    for (std::size_t p = 0; p < src_pixels; ++p) {
      for (int k = 0; k < c; ++k) src(static_cast<int>(p), k) = map.data[p * c + k];
    }
    return weights * src;
  }

  MatrixRM out = MatrixRM::Zero(m, c);
  for (int i = 0; i < m; ++i) {
    auto row = out.row(i);
    for (std::int32_t p : plane.lists[i]) {
      const BilinearTap& wy = ty[p / plane.width];
      const BilinearTap& wx = tx[p % plane.width];
      const float* p00 = map.pixel(wy.lo, wx.lo);
      const float* p01 = map.pixel(wy.lo, wx.hi);
      const float* p10 = map.pixel(wy.hi, wx.lo);
      const float* p11 = map.pixel(wy.hi, wx.hi);
      const double w00 = static_cast<double>(wy.w_lo) * wx.w_lo;
      const double w01 = static_cast<double>(wy.w_lo) * wx.w_hi;
      const double w10 = static_cast<double>(wy.w_hi) * wx.w_lo;
      const double w11 = static_cast<double>(wy.w_hi) * wx.w_hi;
      for (int k = 0; k < c; ++k) {
        row(k) += w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
      }
    }
    out.row(i) /= pool_denominator(plane.lists[i].size(), plane_pixels, norm);
  }
  return out;
}

MatrixRM segment_pool_resized(const FeatureMap& map, const SegmentMap& seg, PoolNorm norm) {
  if (map.height == seg.height && map.width == seg.width) {
    return segment_pool(map, seg, norm);
  }
  return pool_map_over_plane(map, native_mask_plane(seg), norm);
}

MatrixRM segment_pool_fixed(const FeatureMap& map, const SegmentMap& seg, int side,
                            PoolNorm norm) {
  if (map.height != seg.height || map.width != seg.width) {
    throw std::invalid_argument("segment_pool_fixed: map and segment dims differ");
  }
  if (seg.height <= side && seg.width <= side) {
    return segment_pool(map, seg, norm);
  }
  return pool_map_over_plane(map, downscaled_mask_plane(seg, side), norm);
}

FusionMlp::FusionMlp(int semantic_dim, std::uint64_t seed) : semantic_dim_(semantic_dim) {
  std::mt19937_64 rng(seed);
  reduce1_ = nn::Linear(semantic_dim, 512, rng);
  reduce2_ = nn::Linear(512, kSpatialChannels, rng);
  merge1_ = nn::Linear(2 * kSpatialChannels, 256, rng);
  merge2_ = nn::Linear(256, kSpatialChannels, rng);
}

VarPtr FusionMlp::apply(const VarPtr& d, const VarPtr& u) const {
  if (d->value.dim(0) != u->value.dim(0)) {
    throw std::invalid_argument("FusionMlp::apply: row counts differ");
  }
  VarPtr reduced = reduce2_(nn::relu(reduce1_(d)));
  return merge2_(nn::relu(merge1_(nn::concat_cols(reduced, u))));
}

nn::ParamList FusionMlp::params() const {
  nn::ParamList out;
  reduce1_.collect("fusion.reduce1", out);
  reduce2_.collect("fusion.reduce2", out);
  merge1_.collect("fusion.merge1", out);
  merge2_.collect("fusion.merge2", out);
  return out;
}

MatrixRM fuse(const MatrixRM& d, const MatrixRM& u, const FusionMlp& params) {
  if (d.rows() != u.rows()) {
    throw std::invalid_argument("fuse: row counts differ");
  }
  if (d.rows() == 0) {
    return MatrixRM(0, kSpatialChannels);
  }
  nn::NoGradGuard no_grad;
  VarPtr dv = nn::make_leaf(nn::from_matrix(d));
  VarPtr uv = nn::make_leaf(nn::from_matrix(u));
  return nn::to_matrix(params.apply(dv, uv)->value);
}

}  // namespace segcolor
