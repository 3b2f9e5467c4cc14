#pragma once

#include <Eigen/Core>

namespace resrag {

using Index = Eigen::Index;

template <typename Scalar> using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Embeddings are stored as 32-bit floats; scores are accumulated in double.
using Vecf = Vec<float>;
using Vecd = Vec<double>;
using RowMatrixf = RowMatrix<float>;
using RowMatrixd = RowMatrix<double>;

} // namespace resrag
