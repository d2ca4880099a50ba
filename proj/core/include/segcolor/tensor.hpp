#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "segcolor/image.hpp"
#include "segcolor/linalg.hpp"

namespace segcolor::nn {

/// Dense double tensor, row-major, rank <= 4. The training engine runs in
/// double so finite-difference checks stay well conditioned.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}
  Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(numel_of(shape), fill) {}

  static std::size_t numel_of(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
  }
  std::size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  /// 2-D view with the leading dims flattened into rows.
  MapRM as_matrix(int rows, int cols) {
    return MapRM(data.data(), rows, cols);
  }
  ConstMapRM as_matrix(int rows, int cols) const {
    return ConstMapRM(data.data(), rows, cols);
  }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

Tensor from_feature_map(const FeatureMap& map);
FeatureMap to_feature_map(const Tensor& t);  // rank-3 [H,W,C] only

Tensor from_matrix(const MatrixRM& m);
MatrixRM to_matrix(const Tensor& t);  // rank-2 only

/// Image as a [H,W,3] tensor scaled to [0,1].
Tensor image_to_tensor(const ImageU8& image);

void fill_normal(Tensor& t, double stddev, std::mt19937_64& rng);
void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng);

}  // namespace segcolor::nn
