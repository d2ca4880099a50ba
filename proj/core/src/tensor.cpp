#include "segcolor/tensor.hpp"

#include <stdexcept>

namespace segcolor::nn {

Tensor from_feature_map(const FeatureMap& map) {
  Tensor t({map.height, map.width, map.channels});
  for (std::size_t i = 0; i < map.data.size(); ++i) {
    t.data[i] = static_cast<double>(map.data[i]);
  }
  return t;
}

FeatureMap to_feature_map(const Tensor& t) {
  if (t.shape.size() != 3) {
    throw std::invalid_argument("to_feature_map: expected rank-3 tensor");
  }
  FeatureMap map(t.dim(0), t.dim(1), t.dim(2));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    map.data[i] = static_cast<float>(t.data[i]);
  }
  return map;
}

Tensor from_matrix(const MatrixRM& m) {
  Tensor t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
  std::copy_n(m.data(), m.size(), t.data.begin());
  return t;
}

MatrixRM to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) {
    throw std::invalid_argument("to_matrix: expected rank-2 tensor");
  }
  MatrixRM m(t.dim(0), t.dim(1));
  std::copy_n(t.data.begin(), t.data.size(), m.data());
  return m;
}

Tensor image_to_tensor(const ImageU8& image) {
  Tensor t({image.height, image.width, 3});
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    t.data[i] = static_cast<double>(image.data[i]) / 255.0;
  }
  return t;
}

void fill_normal(Tensor& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.data) v = dist(rng);
}

void fill_uniform(Tensor& t, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.data) v = dist(rng);
}

}  // namespace segcolor::nn
