#pragma once

// Geometric Harmonics regression with Nystrom extension, its closed-form
// gradient, and Jacobian-determinant checks of learned square maps.

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgid/dmaps.hpp"

namespace sgid {

struct GHOptions {
  /// Fixed number of retained eigenpairs, clipped to those above delta sigma_0.
  std::size_t retain = 250;
  double delta = 1e-9;
  /// Keep every eigenpair above delta sigma_0 instead of a fixed count.
  bool delta_rule = false;
};

struct GHModel {
  Eigen::MatrixXd inputs;        // N_train x d
  double epsilon_star = 0.0;
  Eigen::VectorXd sigma;         // retained eigenvalues, descending
  Eigen::MatrixXd psi;           // N_train x r
  Eigen::MatrixXd coefficients;  // r x targets, <f, psi_alpha>
  Eigen::MatrixXd weights;       // psi diag(1/sigma) coefficients, N_train x targets
  /// Maps predictions back to raw target units; identity unless set.
  Scaling output_scaling;
  std::vector<std::string> warnings;

  std::size_t input_dim() const { return static_cast<std::size_t>(inputs.cols()); }
  std::size_t target_dim() const { return static_cast<std::size_t>(coefficients.cols()); }
  std::size_t retained() const { return static_cast<std::size_t>(sigma.size()); }
};

/// Throws DomainError on shape mismatch or N_train < retain under the
/// fixed-count rule.
GHModel gh_fit(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, double epsilon_star,
               const GHOptions& options = {});

struct GHPrediction {
  Eigen::MatrixXd values;                 // points x targets
  Eigen::VectorXd nearest_sq_distance;    // to the training inputs
};

/// Nystrom extension at each row of x.
GHPrediction gh_predict(const GHModel& m, const Eigen::MatrixXd& x, std::size_t workers = 1);
Eigen::VectorXd gh_predict_point(const GHModel& m, const Eigen::VectorXd& x);

/// Training-point projection P_delta f = psi psi^T f.
Eigen::MatrixXd gh_projection(const GHModel& m);

/// d x targets matrix: column t is the gradient of target t at x.
Eigen::MatrixXd gh_gradient(const GHModel& m, const Eigen::VectorXd& x);

struct JacobianReport {
  std::vector<double> determinants;
  bool sign_consistent = false;
  double min_abs = 0.0;
};

/// det of the transposed gradient at every row of points. Throws DomainError
/// unless the model maps d inputs to d targets.
JacobianReport jacobian_report(const GHModel& m, const Eigen::MatrixXd& points, std::size_t workers = 1);

void write_gh_json(std::ostream& os, const GHModel& m);
GHModel read_gh_json(std::istream& is);
void write_jacobian_json(std::ostream& os, const JacobianReport& r);

}  // namespace sgid
