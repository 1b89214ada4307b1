#pragma once

#include <Eigen/Core>

#include <limits>

namespace freestop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace freestop
