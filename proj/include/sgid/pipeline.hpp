#pragma once

// Ensemble generation and simulation, the data-driven identifiability track
// on top of the manifold-learning primitives, and cross-track comparison.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgid/dmaps.hpp"
#include "sgid/fim.hpp"
#include "sgid/harmonics.hpp"
#include "sgid/model.hpp"

namespace sgid {

struct EnsembleSpec {
  std::size_t n_samples = 10000;
  double perturbation = 0.10;  // relative half-width
  std::uint64_t seed = 1;
  ObservationGrid grid;
  LimitFlags flags;

  void validate() const;
};

/// n_samples x 11 matrix, columns in table order. Each entry is the base
/// value times an independent uniform draw on [1 - w, 1 + w].
Eigen::MatrixXd sample_ensemble(const EnsembleSpec& spec,
                                const IndependentParams& base = IndependentParams::nominal());

IndependentParams params_from_row(const Eigen::MatrixXd& params, Eigen::Index row);
std::vector<std::string> param_names();

struct EnsembleFailure {
  std::size_t row = 0;
  std::string message;
};

struct EnsembleOutputs {
  Eigen::MatrixXd outputs;         // one row per successful member
  std::vector<std::size_t> rows;   // source row of each output row
  std::vector<EnsembleFailure> failures;
  std::vector<std::string> warnings;
};

/// Evaluates the model map for every parameter row on up to `workers`
/// threads; row order is preserved. Failed members are dropped with a
/// warning. Throws NumericalError when more than 1% fail.
EnsembleOutputs run_ensemble(const Eigen::MatrixXd& params, const ObservationGrid& grid,
                             const LimitFlags& flags, std::size_t workers,
                             const IntegrationOptions& options = {});

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded random partition; train gets round(fraction x n) rows.
Split train_test_split(std::size_t n, double train_fraction, std::uint64_t seed);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& a, const std::vector<std::size_t>& rows);
Eigen::MatrixXd take_cols(const Eigen::MatrixXd& a, const std::vector<std::size_t>& cols);

/// Column-wise mean absolute error.
Eigen::VectorXd mean_absolute_error(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& truth);

/// Names of the k smallest entries of `errors`, in name order.
std::vector<std::string> lowest_error_set(const std::vector<std::string>& names,
                                          const Eigen::VectorXd& errors, std::size_t k);

struct GhTrackOptions {
  double epsilon_multiplier = 2.0;
  /// Kernel scale from the median squared distance; otherwise from its
  /// square root.
  bool squared_median = true;
  GHOptions gh;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 7;
};

/// Kernel scale for a GH fit on `inputs`.
double gh_epsilon(const Eigen::MatrixXd& inputs, const GhTrackOptions& options);

struct GhTrackResult {
  Split split;
  Dataset coords;  // rescaled non-harmonic coordinates, all rows
  Dataset params;  // rescaled parameters, all rows
  std::vector<std::string> names;
  GHModel all_params;  // coordinates -> every parameter
  Eigen::VectorXd mae;  // test error per parameter
  /// The `coords.rows.cols()` parameters with the lowest test error.
  std::vector<std::string> identifiable;
  std::vector<std::size_t> identifiable_cols;
  GHModel forward;  // coordinates -> identifiable parameters
  GHModel inverse;  // identifiable parameters -> coordinates
};

/// Rescales both sides to [0, 1], splits, fits coordinates -> all parameters,
/// ranks parameters by test error and fits the square maps in both
/// directions on the identifiable subset.
GhTrackResult gh_track(const Eigen::MatrixXd& coordinates, const Eigen::MatrixXd& params,
                       const std::vector<std::string>& names, const GhTrackOptions& options = {},
                       std::size_t workers = 1);

struct ComparisonReport {
  std::size_t fim_effective_dim = 0;
  std::size_t dmaps_dim = 0;
  std::vector<std::string> fim_identifiable_set;
  std::vector<std::string> gh_identifiable_set;
  bool agreement = false;
};

/// fim set: parameters whose projection onto the leading fim_effective_dim
/// eigenvectors exceeds `threshold`; gh set: the dmaps_dim parameters with the
/// lowest test error. Agreement requires equal dimensions and equal sets.
ComparisonReport compare_tracks(const InfoSpectrum& spectrum, double cutoff, double threshold,
                                std::size_t dmaps_dim, const std::vector<std::string>& names,
                                const Eigen::VectorXd& mae);

struct ReducedComparison {
  std::vector<double> times;
  std::vector<StateVector> full;
  std::vector<StateVector> reduced;
  /// Per state: max |full - reduced| over the window divided by max |full|.
  std::array<double, kNumStates> max_rel_error{};
};

/// Integrates the full model from the initial state, restarts the fully
/// reduced model at t_start from the full state and samples both on
/// [t_start, t_end] every dt.
ReducedComparison compare_reduced(const IndependentParams& p, const IntegrationOptions& options = {},
                                  double t_start = 3.0, double t_end = 5.0, double dt = 0.01);

void write_reduced_csv(std::ostream& os, const ReducedComparison& c);

void write_comparison_json(std::ostream& os, const ComparisonReport& r);

/// Plain numeric CSV with a header row. With `ids` a leading sample_id column
/// is written.
void write_matrix_csv(std::ostream& os, const std::vector<std::string>& header, const Eigen::MatrixXd& a,
                      bool ids = false);
/// Reads a CSV with a header row; `drop_first` discards the first column.
Eigen::MatrixXd read_matrix_csv(std::istream& is, std::vector<std::string>* header = nullptr,
                                bool drop_first = false);

}  // namespace sgid
