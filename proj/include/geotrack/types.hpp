#pragma once

#include <Eigen/Core>

namespace geotrack {

// Bounded-size dynamic storage keeps the hot simulation loops free of heap
// allocations. The largest representation supported is SO(10) (S^9) or a
// product whose block-diagonal matrix fits in 10x10.
inline constexpr int kMaxMatrix = 10;
inline constexpr int kMaxAlgebra = kMaxMatrix * (kMaxMatrix - 1) / 2;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxMatrix, kMaxMatrix>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAlgebra, 1>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxMatrix>;
using AlgebraMatrix =
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAlgebra, kMaxAlgebra>;

}  // namespace geotrack
