#pragma once

// Sparse assembly shared by the Newton solvers. Internal header.

#include <Eigen/Sparse>

#include "cmalab/grid.hpp"

namespace cmalab::detail {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// -Δ/2 on a fully periodic grid (all nodes unknown), 5-point stencil.
/// Every diagonal entry is structurally present.
SpMat half_neg_laplacian_periodic(const Grid& grid);

inline Eigen::Map<const Vec> as_vec(std::span<const double> v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace cmalab::detail
