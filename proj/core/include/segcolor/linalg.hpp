#pragma once

#include <Eigen/Dense>

namespace segcolor {

// Row-major throughout: row i is segment i's feature vector.
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;
using Eigen::VectorXd;

}  // namespace segcolor
