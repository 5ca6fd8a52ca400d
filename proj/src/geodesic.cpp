#include "sgid/geodesic.hpp"

#include <Eigen/SVD>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "sgid/errors.hpp"
#include "sgid/ode.hpp"

namespace sgid {

namespace {

struct Connection {
  Eigen::VectorXd acceleration;  // -Gamma v v
  double speed_sq = 0.0;         // v^T I v
};

Connection connection(const ParametricModel& model, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& v, const GeodesicOptions& o) {
  const Eigen::Index n = theta.size();
  const Eigen::VectorXd y0 = model.evaluate(theta);
  SensitivityMatrix jac = sensitivities(model, theta, o.jacobian_step);
  const Eigen::MatrixXd& J = jac.entries;
  if (!J.allFinite() || !y0.allFinite()) throw NumericalError("non-finite model output");

  Connection out;
  out.acceleration = Eigen::VectorXd::Zero(n);
  out.speed_sq = (J * v).squaredNorm();
  const double vnorm = v.norm();
  if (vnorm == 0.0) return out;

  const double s = o.curvature_step / vnorm;
  const Eigen::VectorXd avv =
      (model.evaluate(theta + s * v) - 2.0 * y0 + model.evaluate(theta - s * v)) / (s * s);
  if (!avv.allFinite()) throw NumericalError("non-finite directional second difference");

  // (J^T J)^{-1} J^T a through the SVD of J with the metric eigenvalues
  // sigma^2 floored relative to the largest.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double lmax = sigma.size() ? sigma[0] * sigma[0] : 0.0;
  if (!(lmax > 0.0) || !std::isfinite(lmax)) {
    throw NumericalError("information matrix is singular", std::numeric_limits<double>::infinity());
  }
  const double lmin = sigma[sigma.size() - 1] * sigma[sigma.size() - 1];
  const double floor = o.eigen_floor * lmax;
  if (!(lmin > 0.0) && !(floor > 0.0)) {
    throw NumericalError("information matrix is singular beyond regularization",
                         std::numeric_limits<double>::infinity());
  }
  const Eigen::VectorXd proj = svd.matrixU().transpose() * avv;
  Eigen::VectorXd coeff(sigma.size());
  for (Eigen::Index k = 0; k < sigma.size(); ++k) {
    coeff[k] = sigma[k] * proj[k] / std::max(sigma[k] * sigma[k], floor);
  }
  out.acceleration = -(svd.matrixV() * coeff);
  return out;
}

}  // namespace

Eigen::VectorXd christoffel_contraction(const ParametricModel& model, const Eigen::VectorXd& theta,
                                        const Eigen::VectorXd& velocity,
                                        const GeodesicOptions& options) {
  if (theta.size() != static_cast<Eigen::Index>(model.size()) || velocity.size() != theta.size()) {
    throw DomainError("geodesic state does not match the parameter count");
  }
  return -connection(model, theta, velocity, options).acceleration;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::boundary: return "boundary";
    case Termination::max_tau: return "max_tau";
    case Termination::failure: return "failure";
  }
  return "unknown";
}

GeodesicTrace trace_geodesic(const ParametricModel& model, const GeodesicState& start,
                             const GeodesicOptions& options) {
  const Eigen::Index n = static_cast<Eigen::Index>(model.size());
  if (start.theta.size() != n || start.velocity.size() != n) {
    throw DomainError("geodesic state does not match the parameter count");
  }
  if (!start.theta.allFinite() || !start.velocity.allFinite()) {
    throw DomainError("geodesic start must be finite");
  }
  if (!(options.tau_max > 0.0)) throw DomainError("tau_max must be positive");

  GeodesicTrace trace;
  trace.names = model.names;
  const double v0 = start.velocity.norm();

  double last_speed = std::numeric_limits<double>::quiet_NaN();
  std::string error;
  const ode::Rhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(2 * n);
    const Eigen::VectorXd theta = y.head(n), v = y.tail(n);
    try {
      const Connection c = connection(model, theta, v, options);
      dy.head(n) = v;
      dy.tail(n) = c.acceleration;
      last_speed = c.speed_sq;
    } catch (const std::exception& e) {
      error = e.what();
      dy.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  };

  auto record = [&](double tau, const Eigen::VectorXd& y, double speed) {
    trace.taus.push_back(tau);
    trace.states.push_back({y.head(n), y.tail(n)});
    trace.speeds.push_back(speed);
  };

  Eigen::VectorXd y0(2 * n);
  y0 << start.theta, start.velocity;
  Eigen::VectorXd dy0;
  rhs(0.0, y0, dy0);
  if (!dy0.allFinite()) {
    trace.terminated = Termination::failure;
    trace.detail = "curvature evaluation failed at the start: " + error;
    return trace;
  }
  record(0.0, y0, last_speed);

  std::string boundary;
  const ode::StopCondition stop = [&](double tau, const Eigen::VectorXd& y) {
    record(tau, y, last_speed);
    const Eigen::VectorXd theta = y.head(n);
    if (options.observer) options.observer(tau, theta, y.tail(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(theta[i]) > options.log_bound) {
        boundary = "log-parameter " + model.names[static_cast<std::size_t>(i)] + " beyond bound";
        return true;
      }
    }
    if (v0 > 0.0 && y.tail(n).norm() / v0 > options.velocity_ratio) {
      boundary = "velocity norm ratio exceeded";
      return true;
    }
    return false;
  };

  ode::Options io;
  io.rtol = options.rtol;
  io.atol = options.atol;
  io.initial_step = options.tau_max * 1e-4;
  io.max_step = options.tau_max / 50.0;
  io.min_step = options.tau_max * 1e-14;
  const ode::Result res = ode::DormandPrince(io).integrate(rhs, 0.0, y0, options.tau_max, stop);

  switch (res.status) {
    case ode::Status::stopped:
      trace.terminated = Termination::boundary;
      trace.detail = boundary;
      break;
    case ode::Status::completed:
      trace.terminated = Termination::max_tau;
      trace.detail = "reached tau_max";
      break;
    default:
      trace.terminated = Termination::failure;
      trace.detail = std::string("integrator ") + ode::to_string(res.status);
      if (!error.empty()) trace.detail += ": " + error;
      break;
  }
  return trace;
}

BoundaryDiagnosis diagnose_boundary(const GeodesicTrace& trace) {
  if (trace.terminated != Termination::boundary) {
    throw DomainError(std::string("trace did not end at a boundary (") +
                      to_string(trace.terminated) + ")");
  }
  if (trace.states.empty()) throw DomainError("empty geodesic trace");
  const Eigen::VectorXd& v = trace.states.back().velocity;
  const double norm_sq = v.squaredNorm();
  if (!(norm_sq > 0.0)) throw DomainError("terminal velocity is zero");
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);

  BoundaryDiagnosis d;
  d.index = static_cast<std::size_t>(k);
  d.limit_param = k < static_cast<Eigen::Index>(trace.names.size())
                      ? trace.names[d.index]
                      : "theta_" + std::to_string(d.index + 1);
  d.direction = v[k] < 0.0 ? LimitDirection::to_zero : LimitDirection::to_infinity;
  d.tau_boundary = trace.taus.back();
  d.velocity_alignment = v[k] * v[k] / norm_sq;
  return d;
}

GeodesicOptions mbam_geodesic_options() {
  GeodesicOptions o;
  o.velocity_ratio = 1e2;
  o.rtol = 1e-4;
  o.atol = 1e-4;
  return o;
}

IntegrationOptions geodesic_integration() {
  IntegrationOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-11;
  return o;
}

MbamStepResult mbam_step(const LimitFlags& flags, const ObservationGrid& grid,
                         const MbamOptions& options) {
  flags.validate();
  const std::optional<Limit> next = flags.next();
  if (!next) throw DomainError("no limit remains in the chain");

  MbamStepResult out;
  out.flags_before = flags;
  out.flags_after = flags;
  out.expected = *next;

  const ParametricModel model = generator_model(flags, grid, options.integration, options.base);
  out.start_theta = to_log_params(effective_params(options.base, flags), flags);
  const SensitivityMatrix J = sensitivities(model, out.start_theta, options.geodesic.jacobian_step);
  out.spectrum = spectrum(fim(J), model.names);

  const Eigen::Index last = out.spectrum.eigenvalues.size() - 1;
  const double lmin = out.spectrum.eigenvalues[last];
  if (!(lmin > 0.0)) throw NumericalError("smallest information eigenvalue is not positive", lmin);
  Eigen::VectorXd dir = out.spectrum.eigenvectors.col(last);
  Eigen::Index big = 0;
  dir.cwiseAbs().maxCoeff(&big);
  if (dir[big] > 0.0) dir = -dir;

  GeodesicOptions go = options.geodesic;
  if (!(go.tau_max > 0.0)) go.tau_max = 10.0 * std::sqrt(lmin);

  for (int sign : {1, -1}) {
    GeodesicState s{out.start_theta, sign * dir / std::sqrt(lmin)};
    out.trace = trace_geodesic(model, s, go);
    out.sign = sign;
    if (out.trace.terminated == Termination::boundary) break;
  }
  if (out.trace.terminated != Termination::boundary) {
    out.divergence = true;
    return out;
  }

  out.diagnosis = diagnose_boundary(out.trace);
  if (out.diagnosis.direction == LimitDirection::to_zero) {
    const std::optional<Param> p = param_from_name(out.diagnosis.limit_param);
    if (p) out.found = limit_for_param(*p);
  }
  out.divergence = !out.found || *out.found != out.expected;
  if (!out.divergence) out.flags_after = flags.with(out.expected);
  return out;
}

std::vector<MbamStepResult> mbam_chain(const ObservationGrid& grid, const MbamOptions& options) {
  std::vector<MbamStepResult> out;
  LimitFlags flags = LimitFlags::none();
  while (flags.next()) {
    out.push_back(mbam_step(flags, grid, options));
    if (out.back().divergence) break;
    flags = out.back().flags_after;
  }
  return out;
}

void write_trace_csv(std::ostream& os, const GeodesicTrace& trace) {
  const std::size_t n = trace.states.empty() ? trace.names.size()
                                             : static_cast<std::size_t>(trace.states[0].theta.size());
  os << "tau";
  for (std::size_t i = 1; i <= n; ++i) os << ",log_theta_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",v_" << i;
  os << '\n' << std::setprecision(15);
  for (std::size_t r = 0; r < trace.states.size(); ++r) {
    os << trace.taus[r];
    for (std::size_t i = 0; i < n; ++i) os << ',' << trace.states[r].theta[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < n; ++i) os << ',' << trace.states[r].velocity[static_cast<Eigen::Index>(i)];
    os << '\n';
  }
}

void write_diagnosis_json(std::ostream& os, const BoundaryDiagnosis& d) {
  nlohmann::json j;
  j["limit_param"] = d.limit_param;
  j["direction"] = d.direction == LimitDirection::to_zero ? "to_zero" : "to_infinity";
  j["tau_boundary"] = d.tau_boundary;
  j["velocity_alignment"] = d.velocity_alignment;
  os << j.dump(2) << '\n';
}

}  // namespace sgid
