#pragma once

#include <Eigen/Core>

#include <cstddef>

namespace sgid {

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns matching values
};

/// Largest k eigenpairs of a symmetric matrix (upper triangle read).
/// Throws NumericalError when LAPACK reports failure.
SymmetricEigen top_eigenpairs(const Eigen::MatrixXd& a, std::size_t k);

/// Flips each column so that its first entry with magnitude above tol is
/// positive.
void fix_signs(Eigen::MatrixXd& columns, double tol = 1e-12);

}  // namespace sgid
