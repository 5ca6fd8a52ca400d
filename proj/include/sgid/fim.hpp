#pragma once

// Model map, log-parameter sensitivities, Fisher information and its
// spectrum with participation factors.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgid/model.hpp"

namespace sgid {

/// Any smooth map from a log-parameter vector to an observation vector.
/// The generator model is one instance; synthetic models used in tests are
/// others.
struct ParametricModel {
  std::vector<std::string> names;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& log_params)> evaluate;

  std::size_t size() const { return names.size(); }
};

/// Integrator settings used for sensitivity runs (tighter than the default
/// so that finite differences stay above solver noise).
IntegrationOptions sensitivity_integration();

/// integrate + observe from the post-disturbance initial state.
Eigen::VectorXd model_map(const IndependentParams& p, const LimitFlags& flags,
                          const ObservationGrid& grid, const IntegrationOptions& options = {},
                          const StateVector& ics = StateVector::initial());

std::vector<std::string> active_names(const LimitFlags& flags);
Eigen::VectorXd to_log_params(const IndependentParams& p, const LimitFlags& flags);
IndependentParams from_log_params(const Eigen::VectorXd& log_params, const LimitFlags& flags,
                                  const IndependentParams& base = IndependentParams::nominal());

/// The flagged generator as a ParametricModel over its active parameters.
ParametricModel generator_model(const LimitFlags& flags, const ObservationGrid& grid,
                                const IntegrationOptions& options = sensitivity_integration(),
                                const IndependentParams& base = IndependentParams::nominal());

enum class Coordinates { log_parameter, bare_parameter };

struct SensitivityMatrix {
  Eigen::MatrixXd entries;  // M x n, columns in parameter order
  Coordinates coordinates = Coordinates::log_parameter;
  double step = 1e-4;
  std::vector<std::string> names;
};

/// Central differences. In log coordinates column j is
/// (Y(theta e^{+h e_j}) - Y(theta e^{-h e_j})) / 2h; in bare coordinates the
/// same points are used with the derivative taken with respect to theta_j.
SensitivityMatrix sensitivities(const ParametricModel& model, const Eigen::VectorXd& log_params,
                                double step = 1e-4,
                                Coordinates coordinates = Coordinates::log_parameter,
                                std::size_t workers = 1);

/// Convenience for the generator at parameter point p.
SensitivityMatrix sensitivities(const IndependentParams& p, const LimitFlags& flags,
                                const ObservationGrid& grid, double step = 1e-4,
                                const IntegrationOptions& options = sensitivity_integration());

struct FIMatrix {
  Eigen::MatrixXd entries;
  double sigma = 1.0;
};

FIMatrix fim(const SensitivityMatrix& jacobian);

struct InfoSpectrum {
  Eigen::VectorXd eigenvalues;    // descending
  Eigen::MatrixXd eigenvectors;   // column k belongs to eigenvalues[k]
  Eigen::MatrixXd participation;  // squared eigenvector components
  std::vector<std::string> names;
};

/// Symmetric eigendecomposition, eigenvalues descending, each eigenvector
/// signed so that its largest-magnitude component is positive.
InfoSpectrum spectrum(const FIMatrix& info, const std::vector<std::string>& names);

std::size_t effective_dimension(const InfoSpectrum& s, double cutoff);

/// Squared norm of each parameter axis projected onto the span of the
/// leading k eigenvectors.
Eigen::VectorXd subspace_projection(const InfoSpectrum& s, std::size_t k);

/// Parameters whose projection onto the leading k eigenvectors exceeds
/// `threshold`, in parameter order.
std::vector<std::string> identifiable_set(const InfoSpectrum& s, std::size_t k,
                                          double threshold = 0.8);

struct LogSpacing {
  double span_decades = 0.0;
  double max_gap = 0.0;     // decades between consecutive eigenvalues
  double median_gap = 0.0;
};

/// Spacing of the strictly positive eigenvalues on a log10 scale.
LogSpacing log_spacing(const InfoSpectrum& s);

struct NoisyData {
  Eigen::VectorXd values;
  double sigma = 0.0;
};

/// Adds i.i.d. zero-mean Gaussian noise; deterministic per seed.
NoisyData add_noise(const Eigen::VectorXd& y, double sigma, std::uint64_t seed);

void write_spectrum_json(std::ostream& os, const InfoSpectrum& s);

/// Heatmap table: one row per parameter, one column per mode (descending
/// eigenvalue), preceded by an eigenvalue row.
void write_participation_csv(std::ostream& os, const InfoSpectrum& s);

}  // namespace sgid
