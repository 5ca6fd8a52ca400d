#include "sgid/ode.hpp"

#include <algorithm>
#include <cmath>

#include "sgid/errors.hpp"

namespace sgid::ode {

namespace {

// Dormand & Prince (1980) tableau, FSAL form.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
// Dense output coefficients (Hairer, Norsett & Wanner, dopri5 contd5).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::completed: return "completed";
    case Status::stopped: return "stopped";
    case Status::step_underflow: return "step_underflow";
    case Status::non_finite: return "non_finite";
    case Status::max_steps: return "max_steps";
  }
  return "unknown";
}

bool DenseOutput::contains(double t) const {
  if (nodes_.empty()) return false;
  return t >= nodes_.front() && t <= nodes_.back();
}

Vector DenseOutput::operator()(double t) const {
  if (!contains(t)) {
    throw DomainError("dense output evaluated outside the integrated span");
  }
  if (segments_.empty()) return states_.front();
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  std::size_t i = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
  if (i == 0) i = 1;
  if (i >= nodes_.size()) return states_.back();
  --i;
  const double h = nodes_[i + 1] - nodes_[i];
  const double s = (t - nodes_[i]) / h;
  if (s == 0.0) return states_[i];
  const double s1 = 1.0 - s;
  const Segment& g = segments_[i];
  return g.r1 + s * (g.r2 + s1 * (g.r3 + s * (g.r4 + s1 * g.r5)));
}

DormandPrince::DormandPrince(Options options) : options_(options) {
  if (!(options_.rtol > 0.0) || !(options_.atol > 0.0)) {
    throw DomainError("integrator tolerances must be positive");
  }
  if (!(options_.initial_step > 0.0) || !(options_.max_step > 0.0)) {
    throw DomainError("integrator step bounds must be positive");
  }
}

Result DormandPrince::integrate(const Rhs& rhs, double t0, const Vector& y0, double t_end,
                                const StopCondition& stop) const {
  if (t_end < t0) throw DomainError("integration end precedes start");
  Result result;
  DenseOutput& out = result.solution;
  out.nodes_.push_back(t0);
  out.states_.push_back(y0);
  if (t_end == t0) return result;

  const Eigen::Index n = y0.size();
  Vector y = y0, ynew(n), ytmp(n), err(n);
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  rhs(t0, y, k1);
  ++result.rhs_evaluations;
  if (!k1.allFinite()) {
    result.status = Status::non_finite;
    return result;
  }

  double t = t0;
  double h = std::min(options_.initial_step, options_.max_step);
  bool last_rejected = false;
  const double span = t_end - t0;

  while (t < t_end) {
    if (result.accepted + result.rejected >= options_.max_steps) {
      result.status = Status::max_steps;
      return result;
    }
    if (h < options_.min_step) {
      result.status = Status::step_underflow;
      result.last_step = h;
      return result;
    }
    bool final_step = false;
    if (t + h >= t_end || (t_end - (t + h)) < 1e-12 * span) {
      h = t_end - t;
      final_step = true;
    }

    ytmp = y + h * (a21 * k1);
    rhs(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    rhs(t + h, ynew, k7);
    result.rhs_evaluations += 6;

    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double scale =
          options_.atol + options_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double r = err[i] / scale;
      norm += r * r;
    }
    norm = std::sqrt(norm / static_cast<double>(n));

    if (!std::isfinite(norm) || !ynew.allFinite() || !k7.allFinite()) {
      // Treat as a failed step; shrink hard and retry.
      ++result.rejected;
      h *= 0.1;
      last_rejected = true;
      if (h < options_.min_step) {
        result.status = Status::non_finite;
        result.last_step = h;
        return result;
      }
      continue;
    }

    if (norm <= 1.0) {
      DenseOutput::Segment seg;
      seg.r1 = y;
      seg.r2 = ynew - y;
      seg.r3 = h * k1 - seg.r2;
      seg.r4 = seg.r2 - h * k7 - seg.r3;
      seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      out.segments_.push_back(std::move(seg));

      t = final_step ? t_end : t + h;
      y = ynew;
      k1 = k7;
      out.nodes_.push_back(t);
      out.states_.push_back(y);
      ++result.accepted;
      result.last_step = h;

      if (stop && stop(t, y)) {
        result.status = Status::stopped;
        return result;
      }

      double fac = 0.9 * std::pow(std::max(norm, 1e-10), -0.2);
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 5.0);
      h = std::min(h * fac, options_.max_step);
      last_rejected = false;
    } else {
      ++result.rejected;
      const double fac = std::max(0.2, 0.9 * std::pow(norm, -0.2));
      h *= fac;
      last_rejected = true;
    }
  }
  return result;
}

}  // namespace sgid::ode
