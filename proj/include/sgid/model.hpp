#pragma once

// Infinite-bus synchronous generator: parameters, algebraic block, dynamics,
// the family of limit-reduced variants, integration and observation.

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgid/ode.hpp"

namespace sgid {

struct Constants {
  double omega_b = 120.0 * std::numbers::pi;  // rad/s
  double v_f0 = 4.2;
  double p_m = 0.7;
  double v = 1.09;
  double vartheta = 0.0;
  double omega_0 = 1.0;  // per-unit reference speed

  void validate() const;
};

/// The eleven independently variable parameters, in table order.
/// The zero-valued fifth reactance difference is not a member of this set.
enum class Param : std::size_t { H, D, dx1, dx2, dx3, dx4, xdpp, dTd, dTq, Tdpp, Tqpp };
inline constexpr std::size_t kNumParams = 11;

std::string_view param_name(Param p);
std::optional<Param> param_from_name(std::string_view name);
const std::array<Param, kNumParams>& all_params();

struct IndependentParams {
  double H = 2.53;
  double D = 0.5;
  double dx1 = 0.12;
  double dx2 = 2.02;
  double dx3 = 1.932;
  double dx4 = 0.448;
  double xdpp = 0.48;
  double dTd = 4.69;
  double dTq = 1.29;
  double Tdpp = 0.06;
  double Tqpp = 0.21;

  static IndependentParams nominal() { return {}; }

  double& operator[](Param p);
  double operator[](Param p) const;

  std::array<double, kNumParams> to_array() const;
  static IndependentParams from_array(const std::array<double, kNumParams>& values);

  /// Throws DomainError if any field is negative or non-finite.
  void validate() const;

  bool operator==(const IndependentParams&) const = default;
};

struct BareParams {
  double H = 0, D = 0;
  double x_d = 0, x_q = 0;
  double x_q1 = 0, x_d1 = 0;  // x'_q, x'_d
  double x_q2 = 0, x_d2 = 0;  // x''_q, x''_d
  double T_d01 = 0, T_d02 = 0;  // T'_d0, T''_d0
  double T_q01 = 0, T_q02 = 0;  // T'_q0, T''_q0

  /// Reactance and time-constant ordering chains.
  bool satisfies_ordering() const;
};

BareParams independent_to_bare(const IndependentParams& p);

/// Inverse of independent_to_bare; requires x''_q == x''_d and the ordering
/// chains, otherwise throws DomainError.
IndependentParams bare_to_independent(const BareParams& b);

enum class State : std::size_t { delta, omega, eq1, ed1, eq2, ed2 };
inline constexpr std::size_t kNumStates = 6;

std::string_view state_name(State s);

struct StateVector {
  double delta = 0.5;
  double omega = 0.98;
  double eq1 = 2.13;
  double ed1 = 0.02;
  double eq2 = 1.93;
  double ed2 = 0.02;

  /// Post-disturbance initial condition.
  static StateVector initial() { return {}; }

  double& operator[](State s);
  double operator[](State s) const;

  Eigen::Matrix<double, 6, 1> to_vector() const;
  static StateVector from_vector(const Eigen::Matrix<double, 6, 1>& v);

  bool operator==(const StateVector&) const = default;
};

struct AlgebraicVars {
  double v_d = 0, v_q = 0, i_d = 0, i_q = 0, p_g = 0;
};

/// Which subtransient EMF drives the q-axis current. `subtransient_d` uses
/// i_q = (v_d - e''_d)/x''_q; `as_printed` uses e''_q in that slot.
enum class QAxisCurrent { subtransient_d, as_printed };

QAxisCurrent default_q_axis_current();

struct ModelSettings {
  Constants constants;
  QAxisCurrent iq_form = default_q_axis_current();
};

AlgebraicVars algebraic_eval(const StateVector& s, const BareParams& b, const Constants& c,
                             QAxisCurrent form = default_q_axis_current());

enum class Limit { d_zero, h_zero, tdpp_zero, tqpp_zero, dx1_zero };

/// Limit order along the reduction chain.
const std::array<Limit, 5>& limit_chain();
std::string_view limit_name(Limit l);
Param limit_param(Limit l);
std::optional<Limit> limit_for_param(Param p);

struct LimitFlags {
  bool d_zero = false;
  bool h_zero = false;
  bool tdpp_zero = false;
  bool tqpp_zero = false;
  bool dx1_zero = false;

  static LimitFlags none() { return {}; }
  /// First `depth` limits of the chain.
  static LimitFlags chain_prefix(std::size_t depth);

  bool has(Limit l) const;
  LimitFlags with(Limit l) const;
  std::size_t depth() const;
  bool is_chain_prefix() const;
  std::optional<Limit> next() const;
  void validate() const;

  /// Parameters still free in this member of the family, table order.
  std::vector<Param> active_params() const;

  std::string describe() const;

  bool operator==(const LimitFlags&) const = default;
};

/// Copy of p with every removed parameter set to its limiting value (zero).
IndependentParams effective_params(const IndependentParams& p, const LimitFlags& flags);

struct RhsEvaluation {
  StateVector state;       // algebraic components resolved
  StateVector derivative;  // meaningful only where `dynamic` is set
  AlgebraicVars algebraic;
  std::array<bool, kNumStates> dynamic{};
  /// |P_g - P_m| when the rotor angle is algebraic; zero otherwise.
  double constraint_residual = 0.0;
};

/// Right-hand side of the flagged model at state s. Under h_zero the rotor
/// angle is re-solved from P_g = P_m (warm-started at s.delta) and the speed
/// derivative is not defined pointwise.
RhsEvaluation rhs(const StateVector& s, const IndependentParams& p, const LimitFlags& flags,
                  const ModelSettings& settings = {});

/// Solves P_g(delta) = P_m on (vartheta, vartheta + pi/2) for the given
/// EMFs, with slaved subtransient EMFs per the flags.
double solve_rotor_angle(const StateVector& s, const BareParams& b, const LimitFlags& flags,
                         const ModelSettings& settings, double warm_start);

/// Fills in the components of s that are algebraic under the flags.
StateVector complete_state(const StateVector& s, const BareParams& b, const LimitFlags& flags,
                           const ModelSettings& settings);

struct IntegrationOptions {
  double t_start = 0.0;
  double rtol = 1e-7;
  double atol = 1e-7;
  double initial_step = 1e-4;
  double max_step = 0.05;
  /// Fine-grid spacing for differencing the algebraic rotor angle.
  double omega_fd_step = 1e-3;
  ModelSettings settings;
};

/// Dense trajectory of the generator. Immutable after construction.
class Trajectory {
 public:
  double t_begin() const { return dynamic_.t_begin(); }
  double t_end() const { return dynamic_.t_end(); }

  /// Accepted step times, strictly increasing.
  const std::vector<double>& times() const { return dynamic_.nodes(); }
  const std::vector<StateVector>& states() const { return states_; }

  StateVector at(double t) const;
  bool contains(double t) const { return dynamic_.contains(t); }

  const LimitFlags& flags() const { return flags_; }

 private:
  friend Trajectory integrate(const IndependentParams&, const LimitFlags&, const StateVector&,
                              double, const IntegrationOptions&);

  ode::DenseOutput dynamic_;
  std::vector<State> dynamic_states_;
  std::vector<StateVector> states_;
  LimitFlags flags_;
  BareParams bare_;
  ModelSettings settings_;
  // Fine grid for the algebraic rotor angle and reconstructed speed.
  std::vector<double> fine_t_, fine_delta_, fine_omega_;

  double interpolate(const std::vector<double>& values, double t) const;
  StateVector assemble(const Eigen::VectorXd& dyn, double delta_guess) const;
};

/// Integrates the flagged model from `ics` at options.t_start to t_end.
/// Components of `ics` that are algebraic under the flags are recomputed.
/// Throws NumericalError on step underflow or rotor-angle solve failure.
Trajectory integrate(const IndependentParams& p, const LimitFlags& flags, const StateVector& ics,
                     double t_end, const IntegrationOptions& options = {});

struct ObservationGrid {
  double t_start = 3.0;
  double t_end = 5.0;
  double dt = 0.02;
  std::vector<State> observed{State::delta, State::omega, State::eq1,
                              State::ed1,   State::eq2,   State::ed2};

  void validate() const;
  std::vector<double> times() const;
  std::size_t size() const { return times().size() * observed.size(); }
};

/// Time-major stacking: all observed states at t_1, then t_2, ...
Eigen::VectorXd observe(const Trajectory& traj, const ObservationGrid& grid);

/// CSV `t,delta,omega,eq1,ed1,eq2,ed2` at the given times, 15 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const std::vector<double>& times);

/// JSON object keyed by parameter name.
void write_params_json(std::ostream& os, const IndependentParams& p);
/// Missing keys keep their nominal value; unknown keys and negative values
/// throw DomainError.
IndependentParams read_params_json(std::istream& is);

}  // namespace sgid
