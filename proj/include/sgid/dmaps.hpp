#pragma once

// Min-max scaling, Gaussian kernels, density-normalized Diffusion Maps and
// local-linear-regression selection of non-harmonic eigenvectors.

#include <Eigen/Core>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace sgid {

/// Per-column affine map onto [0, 1].
struct Scaling {
  Eigen::VectorXd lo;
  Eigen::VectorXd span;          // hi - lo, 0 for constant columns
  std::vector<bool> constant;

  std::size_t size() const { return static_cast<std::size_t>(lo.size()); }
  /// Applies the stored map to new rows. Constant columns map to 0.5.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& scaled) const;
  static Scaling identity(std::size_t columns);
};

struct Dataset {
  Eigen::MatrixXd rows;  // N x m, every entry in [0, 1]
  Scaling scaling;
};

/// Throws DomainError on fewer than two rows or non-finite entries.
Dataset rescale01(const Eigen::MatrixXd& raw);

/// Pairwise squared Euclidean distances between the rows of a and b.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x);

/// Median over i < j of the squared distance between rows i and j.
double median_squared_distance(const Eigen::MatrixXd& x);

struct Bandwidth {
  double value = 0.0;
  double median_sq = 0.0;
  bool degenerate = false;  // all points coincide
};

/// multiplier x median squared pairwise distance.
Bandwidth median_epsilon(const Eigen::MatrixXd& x, double multiplier);

struct DMapsEmbedding {
  Eigen::VectorXd eigenvalues;   // descending, eigenvalues[0] = 1
  Eigen::MatrixXd eigenvectors;  // N x k, column 0 constant
  double epsilon = 0.0;
  std::vector<std::size_t> nonharmonic;

  std::size_t count() const { return static_cast<std::size_t>(eigenvalues.size()); }
  /// Columns of the selected non-harmonic eigenvectors, in selection order.
  Eigen::MatrixXd coordinates() const;
};

/// Row-stochastic K = D^{-1} P^{-1} A P^{-1} for the kernel
/// exp(-|x_i - x_j|^2 / (2 epsilon)).
Eigen::MatrixXd markov_matrix(const Eigen::MatrixXd& x, double epsilon);

/// Top k right eigenpairs of the Markov matrix (the trivial pair included),
/// from the symmetric conjugate. Eigenvectors have unit norm and a positive
/// first nonzero entry. Throws NumericalError if some point has no
/// numerically nonzero affinity to any other.
DMapsEmbedding dmaps(const Eigen::MatrixXd& x, double epsilon, std::size_t k);

struct ResidualReport {
  /// residuals[j] belongs to eigenvector j + 1; residuals[0] = 1.
  Eigen::VectorXd residuals;
  /// Regression kernel scale used for each entry (0 for the first).
  std::vector<double> bandwidths;
  /// Local fits that needed ridge regularization.
  std::size_t ridge_fallbacks = 0;
};

/// Leave-one-out local linear fit of each eigenvector on all preceding
/// nontrivial ones, kernel exp(-d^2 / (scale x median d^2)) in the predictor
/// coordinates. Evaluates eigenvectors 1 .. count (0 means all).
ResidualReport local_linear_residuals(const DMapsEmbedding& emb, double bandwidth_scale = 1.0 / 9.0,
                                      std::size_t count = 0);

struct Selection {
  std::vector<std::size_t> indices;  // eigenvector indices, ascending
  double gap_ratio = 0.0;            // ratio at the cut, 0 for target-size selection
  bool ambiguous = false;
  std::vector<std::size_t> alternative;  // cut at the runner-up gap
  std::vector<std::string> warnings;
};

/// The target_dim largest residuals.
Selection select_nonharmonic(const ResidualReport& rep, std::size_t target_dim);
/// Sorts residuals descending and cuts at the largest ratio between
/// consecutive values. A ratio below ambiguity_ratio is flagged and the
/// runner-up cut reported.
Selection select_by_gap(const ResidualReport& rep, double ambiguity_ratio = 1.5);

/// CSV `sample_id,phi_1..phi_k` over the nontrivial eigenvectors.
void write_embedding_csv(std::ostream& os, const DMapsEmbedding& emb);
void write_residuals_json(std::ostream& os, const ResidualReport& rep, const Selection& sel);

}  // namespace sgid
