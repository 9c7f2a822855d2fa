#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace scfl {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = Mat<double>;
using Vector = Vec<double>;
using Index = Eigen::Index;
using Seed = std::uint64_t;

// Read-only view that binds row blocks of a column-major matrix without copy.
using MatrixView = Eigen::Ref<const Matrix>;

}  // namespace scfl
