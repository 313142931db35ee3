#pragma once

#include <Eigen/Dense>

namespace fsml {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Token vectors as stored on disk: one row per token.
using TokenMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace fsml
