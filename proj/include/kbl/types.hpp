#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>

namespace kbl {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

/// Default relative tolerance for numerical rank decisions (singular values
/// below rank_tolerance * sigma_max count as zero).
inline constexpr double rank_tolerance = 1e-10;

} // namespace kbl
