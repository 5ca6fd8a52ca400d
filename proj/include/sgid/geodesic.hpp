#pragma once

// Geodesics on the model manifold in log-parameter coordinates, boundary
// diagnosis, and the boundary-approximation reduction chain.

#include <Eigen/Core>

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgid/fim.hpp"
#include "sgid/model.hpp"

namespace sgid {

struct GeodesicOptions {
  /// Log-parameter step for the Jacobian.
  double jacobian_step = 1e-4;
  /// Displacement, in log-parameter units, of the directional second
  /// difference (the step along v is this divided by |v|).
  double curvature_step = 2e-2;
  /// Eigenvalues of the metric are floored at this fraction of the largest.
  double eigen_floor = 1e-20;
  double log_bound = 25.0;
  double velocity_ratio = 1e3;
  /// Zero means 10 sqrt(lambda_min) of the starting spectrum (mbam_step) and
  /// is rejected by trace_geodesic.
  double tau_max = 0.0;
  double rtol = 1e-6;
  double atol = 1e-5;
  /// Called after every accepted step with (tau, theta, velocity).
  std::function<void(double, const Eigen::VectorXd&, const Eigen::VectorXd&)> observer;
};

struct GeodesicState {
  Eigen::VectorXd theta;     // log-parameters
  Eigen::VectorXd velocity;  // d theta / d tau
};

/// Gamma^mu_{ab} v^a v^b = I^{-1} J^T (d^2 Y / d tau^2 along v).
Eigen::VectorXd christoffel_contraction(const ParametricModel& model, const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& velocity,
                                        const GeodesicOptions& options = {});

enum class Termination { boundary, max_tau, failure };
const char* to_string(Termination t);

struct GeodesicTrace {
  std::vector<std::string> names;
  std::vector<double> taus;
  std::vector<GeodesicState> states;
  std::vector<double> speeds;  // v^T I v at each state
  Termination terminated = Termination::failure;
  std::string detail;
};

/// Integrates the geodesic equation as a first-order system in (theta, v).
/// Stops on |theta_i| > log_bound or |v|/|v0| > velocity_ratio (boundary),
/// tau > tau_max, or integrator failure (partial trace kept).
GeodesicTrace trace_geodesic(const ParametricModel& model, const GeodesicState& start,
                             const GeodesicOptions& options);

enum class LimitDirection { to_zero, to_infinity };

struct BoundaryDiagnosis {
  std::string limit_param;
  std::size_t index = 0;
  LimitDirection direction = LimitDirection::to_zero;
  double tau_boundary = 0.0;
  double velocity_alignment = 0.0;  // v_k^2 / |v|^2 at the last state
};

/// Reads the limit off the terminal velocity. Throws DomainError unless the
/// trace ended at a boundary.
BoundaryDiagnosis diagnose_boundary(const GeodesicTrace& trace);

struct MbamStepResult {
  LimitFlags flags_before;
  LimitFlags flags_after;
  InfoSpectrum spectrum;
  GeodesicTrace trace;
  BoundaryDiagnosis diagnosis;
  /// Limit the chain prescribes next.
  Limit expected = Limit::d_zero;
  /// Limit the geodesic actually found, if it is a member of the family.
  std::optional<Limit> found;
  /// True when found differs from expected; flags_after is then unchanged.
  bool divergence = false;
  /// Initial velocity sign that reached the boundary (+1 as launched).
  int sign = 1;
  Eigen::VectorXd start_theta;
};

/// Geodesic settings for the reduction chain: velocity ratio 1e2, step
/// tolerances 1e-4.
GeodesicOptions mbam_geodesic_options();
/// Model integration tolerances for geodesics (1e-11).
IntegrationOptions geodesic_integration();

struct MbamOptions {
  GeodesicOptions geodesic = mbam_geodesic_options();
  IntegrationOptions integration = geodesic_integration();
  IndependentParams base = IndependentParams::nominal();
};

/// One reduction: spectrum of the flagged model, sloppiest geodesic,
/// diagnosis, augmented flags.
MbamStepResult mbam_step(const LimitFlags& flags, const ObservationGrid& grid,
                         const MbamOptions& options = {});

/// Repeats mbam_step from the full model until the chain is exhausted or a
/// step diverges.
std::vector<MbamStepResult> mbam_chain(const ObservationGrid& grid,
                                       const MbamOptions& options = {});

/// CSV `tau,log_theta_1..log_theta_n,v_1..v_n`.
void write_trace_csv(std::ostream& os, const GeodesicTrace& trace);
void write_diagnosis_json(std::ostream& os, const BoundaryDiagnosis& d);

}  // namespace sgid
