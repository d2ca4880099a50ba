#include "segcolor/correspondence.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "segcolor/image_io.hpp"

namespace segcolor {

using nlohmann::json;

ReferencePool build_reference_pool(
    const std::vector<std::pair<MatrixRM, SegmentPalette>>& refs) {
  if (refs.empty()) {
    throw std::runtime_error("no references");
  }
  Eigen::Index total = 0;
  Eigen::Index cols = refs.front().first.cols();
  for (const auto& [features, palette] : refs) {
    if (features.rows() != palette.size()) {
      throw std::invalid_argument("build_reference_pool: features/palette misaligned");
    }
    if (features.cols() != cols) {
      throw std::invalid_argument("build_reference_pool: feature widths differ");
    }
    total += features.rows();
  }
  ReferencePool pool;
  pool.features.resize(total, cols);
  pool.palette.reserve(static_cast<std::size_t>(total));
  pool.provenance.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const auto& [features, palette] = refs[k];
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      pool.features.row(row++) = features.row(i);
      pool.palette.push_back(palette.colors[static_cast<std::size_t>(i)]);
      pool.provenance.emplace_back(static_cast<int>(k), static_cast<int>(i) + 1);
    }
  }
  return pool;
}

SimilarityMap similarity_map(const MatrixRM& reference_features, const MatrixRM& target_features,
                             double eps) {
  if (reference_features.cols() != target_features.cols()) {
    throw std::invalid_argument("similarity_map: feature widths differ");
  }
  VectorXd rn = reference_features.rowwise().norm();
  VectorXd tn = target_features.rowwise().norm();
  SimilarityMap s = reference_features * target_features.transpose();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      s(i, j) /= rn(i) * tn(j) + eps;
    }
  }
  return s;
}

ColorAssignment propagate_colors(const SimilarityMap& similarity, const ReferencePool& pool) {
  if (similarity.rows() != pool.features.rows()) {
    throw std::invalid_argument("propagate_colors: similarity rows differ from pool size");
  }
  const Eigen::Index n = similarity.cols();
  ColorAssignment out;
  out.colors.resize(static_cast<std::size_t>(n));
  out.matched_row.resize(static_cast<std::size_t>(n));
  out.confidence.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index best = 0;
    double best_value = similarity(0, j);
    for (Eigen::Index i = 1; i < similarity.rows(); ++i) {
      if (similarity(i, j) > best_value) {
        best_value = similarity(i, j);
        best = i;
      }
    }
    out.matched_row[static_cast<std::size_t>(j)] = static_cast<int>(best);
    out.confidence[static_cast<std::size_t>(j)] = best_value;
    out.colors[static_cast<std::size_t>(j)] = pool.palette[static_cast<std::size_t>(best)];
  }
  return out;
}

void save_color_assignment(const std::filesystem::path& path, const ColorAssignment& assignment,
                           const ReferencePool& pool) {
  json records = json::array();
  for (int j = 0; j < assignment.size(); ++j) {
    const int row = assignment.matched_row[static_cast<std::size_t>(j)];
    const auto& [ref_index, local_id] = pool.provenance[static_cast<std::size_t>(row)];
    Rgb c = assignment.colors[static_cast<std::size_t>(j)];
    records.push_back({{"segment_id", j + 1},
                       {"rgb", {c.r, c.g, c.b}},
                       {"matched_reference", ref_index},
                       {"matched_segment", local_id},
                       {"confidence", assignment.confidence[static_cast<std::size_t>(j)]}});
  }
  write_file_atomic(path, json(records).dump(2) + "\n");
}

ColorAssignment load_color_assignment(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  json records = json::parse(bytes.begin(), bytes.end());
  ColorAssignment out;
  for (const auto& r : records) {
    out.colors.push_back({r.at("rgb").at(0).get<std::uint8_t>(),
                          r.at("rgb").at(1).get<std::uint8_t>(),
                          r.at("rgb").at(2).get<std::uint8_t>()});
    out.matched_row.push_back(-1);  // provenance-level row is not serialized
    out.confidence.push_back(r.at("confidence").get<double>());
  }
  return out;
}

}  // namespace segcolor
