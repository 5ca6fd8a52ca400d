#include "sgid/linalg.hpp"

#include <lapacke.h>

#include <cmath>
#include <string>
#include <vector>

#include "sgid/errors.hpp"

namespace sgid {

SymmetricEigen top_eigenpairs(const Eigen::MatrixXd& a, std::size_t k) {
  if (a.rows() != a.cols()) throw DomainError("eigenproblem needs a square matrix");
  const auto n = static_cast<lapack_int>(a.rows());
  if (k == 0 || k > static_cast<std::size_t>(n)) {
    throw DomainError("eigenpair count must lie in [1, " + std::to_string(n) + "]");
  }
  Eigen::MatrixXd work = a;  // dsyevr destroys its input
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, static_cast<Eigen::Index>(k));
  std::vector<lapack_int> support(2 * k);
  lapack_int found = 0;
  const lapack_int il = n - static_cast<lapack_int>(k) + 1;
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, work.data(), n, 0.0, 0.0,
                                         il, n, 0.0, &found, w.data(), z.data(), n, support.data());
  if (info != 0 || found != static_cast<lapack_int>(k)) {
    throw NumericalError("dsyevr failed (info " + std::to_string(info) + ")", info);
  }
  SymmetricEigen out;
  out.values = w.head(static_cast<Eigen::Index>(k)).reverse();
  out.vectors = z.rowwise().reverse();
  return out;
}

void fix_signs(Eigen::MatrixXd& columns, double tol) {
  for (Eigen::Index c = 0; c < columns.cols(); ++c) {
    for (Eigen::Index r = 0; r < columns.rows(); ++r) {
      if (std::abs(columns(r, c)) > tol) {
        if (columns(r, c) < 0.0) columns.col(c) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace sgid
