#pragma once

#include <optional>
#include <vector>

#include "segcolor/autograd.hpp"
#include "segcolor/correspondence.hpp"

namespace segcolor {

/// Marks a target segment whose ground-truth color does not appear in the
/// reference pool; such segments are excluded from the cross-entropy loss.
inline constexpr int kAbsentClass = -1;

/// Exact-RGB color classes over the reference pool, plus the row -> class map.
struct ColorClassTable {
  std::vector<Rgb> colors;      // distinct, in order of first appearance
  std::vector<int> row_class;   // pool row -> class index

  static ColorClassTable from_palette(const std::vector<Rgb>& pool_palette);
  int class_count() const { return static_cast<int>(colors.size()); }
  /// kAbsentClass when the color is not in the table.
  int class_of(Rgb color) const;
};

struct LossWeights {
  double lambda_ce = 0.5;
  double lambda_dc = 0.2;
  double temperature = 0.1;
  double consistency_scale = 10.0;
};

/// Per target column: temperature softmax over the pool rows, then class
/// probabilities by summing rows of the same color. Rows of the result sum to 1.
MatrixRM color_probabilities(const SimilarityMap& similarity, const ColorClassTable& table,
                             double temperature);

struct CrossEntropyResult {
  double value = 0.0;
  int included = 0;
  bool all_excluded = false;
  bool clamped = false;  // a ground-truth probability hit the 1e-12 floor
};

/// Mean of -log p[n, gt(n)] over segments whose gt class is not kAbsentClass.
CrossEntropyResult cross_entropy_loss(const MatrixRM& probabilities,
                                      const std::vector<int>& gt_classes);

/// Mean absolute difference of the two maps, both scaled.
double consistency_loss(const SimilarityMap& similarity, const SimilarityMap& semantic_similarity,
                        double scale = 10.0);

double total_loss(double ce, double dc, const LossWeights& weights);

/// The full training objective evaluated from a similarity map, with its
/// analytic gradient d(total)/dS. Single source of truth for the loss chain;
/// the autograd op below and finite-difference checks both go through it.
struct MatchingLossResult {
  double total = 0.0;
  double ce = 0.0;
  double dc = 0.0;
  MatrixRM grad_similarity;
  bool all_excluded = false;
  bool clamped = false;
};

MatchingLossResult matching_loss(const SimilarityMap& similarity,
                                 const SimilarityMap& semantic_similarity,
                                 const ColorClassTable& table, const std::vector<int>& gt_classes,
                                 const LossWeights& weights);

/// Autograd wrapper over matching_loss (scalar node).
nn::VarPtr matching_loss_op(const nn::VarPtr& similarity, const SimilarityMap& semantic_similarity,
                            const ColorClassTable& table, const std::vector<int>& gt_classes,
                            const LossWeights& weights, MatchingLossResult* detail = nullptr);

}  // namespace segcolor
