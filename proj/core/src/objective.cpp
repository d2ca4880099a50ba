#include "segcolor/objective.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace segcolor {

namespace {
constexpr double kLogFloor = 1e-12;
}

ColorClassTable ColorClassTable::from_palette(const std::vector<Rgb>& pool_palette) {
  ColorClassTable table;
  std::map<Rgb, int> index;
  table.row_class.reserve(pool_palette.size());
  for (Rgb c : pool_palette) {
    auto [it, inserted] = index.try_emplace(c, static_cast<int>(table.colors.size()));
    if (inserted) {
      table.colors.push_back(c);
    }
    table.row_class.push_back(it->second);
  }
  return table;
}

int ColorClassTable::class_of(Rgb color) const {
  for (std::size_t i = 0; i < colors.size(); ++i) {
    if (colors[i] == color) return static_cast<int>(i);
  }
  return kAbsentClass;
}

MatrixRM color_probabilities(const SimilarityMap& similarity, const ColorClassTable& table,
                             double temperature) {
  if (temperature <= 0.0) {
    throw std::invalid_argument("color_probabilities: temperature must be positive");
  }
  const Eigen::Index m = similarity.rows();
  const Eigen::Index n = similarity.cols();
  if (static_cast<Eigen::Index>(table.row_class.size()) != m) {
    throw std::invalid_argument("color_probabilities: table does not match pool size");
  }
  const int classes = table.class_count();
  MatrixRM p = MatrixRM::Zero(n, classes);
  VectorXd q(m);
  for (Eigen::Index j = 0; j < n; ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) mx = std::max(mx, similarity(i, j) / temperature);
    double z = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      q(i) = std::exp(similarity(i, j) / temperature - mx);
      z += q(i);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      p(j, table.row_class[static_cast<std::size_t>(i)]) += q(i) / z;
    }
  }
  return p;
}

CrossEntropyResult cross_entropy_loss(const MatrixRM& probabilities,
                                      const std::vector<int>& gt_classes) {
  if (static_cast<Eigen::Index>(gt_classes.size()) != probabilities.rows()) {
    throw std::invalid_argument("cross_entropy_loss: gt size does not match rows");
  }
  CrossEntropyResult result;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < probabilities.rows(); ++j) {
    int g = gt_classes[static_cast<std::size_t>(j)];
    if (g == kAbsentClass) continue;
    if (g < 0 || g >= probabilities.cols()) {
      throw std::invalid_argument("cross_entropy_loss: gt class out of range");
    }
    double p = probabilities(j, g);
    if (p < kLogFloor) {
      p = kLogFloor;
      result.clamped = true;
    }
    sum -= std::log(p);
    ++result.included;
  }
  if (result.included == 0) {
    result.all_excluded = true;
    result.value = 0.0;
  } else {
    result.value = sum / result.included;
  }
  return result;
}

double consistency_loss(const SimilarityMap& similarity, const SimilarityMap& semantic_similarity,
                        double scale) {
  if (similarity.rows() != semantic_similarity.rows() ||
      similarity.cols() != semantic_similarity.cols()) {
    throw std::invalid_argument("consistency_loss: dimension mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    for (Eigen::Index j = 0; j < similarity.cols(); ++j) {
      sum += std::abs(scale * similarity(i, j) - scale * semantic_similarity(i, j));
    }
  }
  return sum / (static_cast<double>(similarity.rows()) * similarity.cols());
}

double total_loss(double ce, double dc, const LossWeights& weights) {
  if (weights.lambda_ce <= 0.0 || weights.lambda_dc < 0.0) {
    throw std::invalid_argument("total_loss: weights must be positive");
  }
  return weights.lambda_ce * ce + weights.lambda_dc * dc;
}

MatchingLossResult matching_loss(const SimilarityMap& similarity,
                                 const SimilarityMap& semantic_similarity,
                                 const ColorClassTable& table, const std::vector<int>& gt_classes,
                                 const LossWeights& weights) {
  const Eigen::Index m = similarity.rows();
  const Eigen::Index n = similarity.cols();
  if (semantic_similarity.rows() != m || semantic_similarity.cols() != n) {
    throw std::invalid_argument("matching_loss: similarity maps differ in shape");
  }
  if (static_cast<Eigen::Index>(gt_classes.size()) != n) {
    throw std::invalid_argument("matching_loss: gt size does not match targets");
  }
  MatchingLossResult out;
  out.grad_similarity = MatrixRM::Zero(m, n);

  // cross entropy through temperature softmax and per-class sums
  const double t = weights.temperature;
  int included = 0;
  double ce_sum = 0.0;
  VectorXd q(m);
  MatrixRM ce_grad = MatrixRM::Zero(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int g = gt_classes[static_cast<std::size_t>(j)];
    if (g == kAbsentClass) continue;
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) mx = std::max(mx, similarity(i, j) / t);
    double z = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      q(i) = std::exp(similarity(i, j) / t - mx);
      z += q(i);
    }
    q /= z;
    double pg = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (table.row_class[static_cast<std::size_t>(i)] == g) pg += q(i);
    }
    ++included;
    if (pg < kLogFloor) {
      // clamped: loss contribution is constant, gradient zero
      out.clamped = true;
      ce_sum -= std::log(kLogFloor);
      continue;
    }
    ce_sum -= std::log(pg);
    for (Eigen::Index i = 0; i < m; ++i) {
      const bool in_class = table.row_class[static_cast<std::size_t>(i)] == g;
      ce_grad(i, j) = (q(i) - (in_class ? q(i) / pg : 0.0)) / t;
    }
  }
  if (included == 0) {
    out.all_excluded = true;
    out.ce = 0.0;
  } else {
    out.ce = ce_sum / included;
    ce_grad /= static_cast<double>(included);
  }

  // consistency (all pairs, no exclusion)
  const double scale = weights.consistency_scale;
  const double inv_mn = 1.0 / (static_cast<double>(m) * n);
  double dc_sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double diff = scale * similarity(i, j) - scale * semantic_similarity(i, j);
      dc_sum += std::abs(diff);
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      out.grad_similarity(i, j) = weights.lambda_dc * inv_mn * scale * sgn;
    }
  }
  out.dc = dc_sum * inv_mn;
  if (included > 0) {
    out.grad_similarity += weights.lambda_ce * ce_grad;
  }
  out.total = total_loss(out.ce, out.dc, weights);
  return out;
}

nn::VarPtr matching_loss_op(const nn::VarPtr& similarity, const SimilarityMap& semantic_similarity,
                            const ColorClassTable& table, const std::vector<int>& gt_classes,
                            const LossWeights& weights, MatchingLossResult* detail) {
  SimilarityMap s = nn::to_matrix(similarity->value);
  MatchingLossResult result = matching_loss(s, semantic_similarity, table, gt_classes, weights);
  if (detail != nullptr) {
    *detail = result;
  }
  nn::Tensor value({1});
  value.data[0] = result.total;
  auto grad = std::make_shared<MatrixRM>(std::move(result.grad_similarity));
  return nn::make_node(std::move(value), {similarity}, [similarity, grad](nn::Var& self) {
    if (!similarity->requires_grad) return;
    similarity->ensure_grad();
    const double g = self.grad.data[0];
    auto gs = similarity->grad.as_matrix(static_cast<int>(grad->rows()),
                                         static_cast<int>(grad->cols()));
    gs += g * (*grad);
  });
}

}  // namespace segcolor
