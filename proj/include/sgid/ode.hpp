#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace sgid::ode {

using Vector = Eigen::VectorXd;

/// Right-hand side dy/dt = f(t, y). Writes into `dydt`, which is presized.
using Rhs = std::function<void(double t, const Vector& y, Vector& dydt)>;

/// Called after every accepted step; returning true ends the integration
/// with Status::stopped.
using StopCondition = std::function<bool(double t, const Vector& y)>;

struct Options {
  double rtol = 1e-7;
  double atol = 1e-7;
  double initial_step = 1e-4;
  double max_step = 0.05;
  double min_step = 1e-14;
  std::size_t max_steps = 2'000'000;
};

enum class Status { completed, stopped, step_underflow, non_finite, max_steps };

const char* to_string(Status s);

/// Piecewise quartic continuous extension of a Dormand-Prince solution.
/// Evaluations inside the span are exact reproductions of the accepted
/// step endpoints at the nodes.
class DenseOutput {
 public:
  DenseOutput() = default;

  double t_begin() const { return nodes_.front(); }
  double t_end() const { return nodes_.back(); }
  std::size_t dimension() const { return states_.empty() ? 0 : states_.front().size(); }

  /// Accepted step endpoints, strictly increasing.
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<Vector>& states() const { return states_; }

  /// Throws DomainError outside [t_begin, t_end].
  Vector operator()(double t) const;

  bool contains(double t) const;

 private:
  friend class DormandPrince;
  struct Segment {
    Vector r1, r2, r3, r4, r5;
  };

  std::vector<double> nodes_;
  std::vector<Vector> states_;
  std::vector<Segment> segments_;
};

struct Result {
  DenseOutput solution;
  Status status = Status::completed;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evaluations = 0;
  double last_step = 0.0;
};

/// Embedded 5(4) Runge-Kutta pair with automatic step control and dense
/// output. Failure modes are reported through Result::status; the partial
/// solution up to the failure is kept.
class DormandPrince {
 public:
  explicit DormandPrince(Options options = {});

  Result integrate(const Rhs& rhs, double t0, const Vector& y0, double t_end,
                   const StopCondition& stop = {}) const;

  const Options& options() const { return options_; }

 private:
  Options options_;
};

}  // namespace sgid::ode
