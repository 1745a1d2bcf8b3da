#pragma once

#include <Eigen/Dense>

namespace sparsesdf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace sparsesdf
