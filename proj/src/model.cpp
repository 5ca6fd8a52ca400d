#include "sgid/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "sgid/errors.hpp"

namespace sgid {

namespace {

constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "H", "D", "dx1", "dx2", "dx3", "dx4", "xdpp", "dTd", "dTq", "Tdpp", "Tqpp"};

constexpr std::array<std::string_view, kNumStates> kStateNames = {"delta", "omega", "eq1",
                                                                  "ed1",   "eq2",   "ed2"};

constexpr std::array<Limit, 5> kChain = {Limit::d_zero, Limit::h_zero, Limit::tdpp_zero,
                                         Limit::tqpp_zero, Limit::dx1_zero};

constexpr double kAngleTolerance = 1e-12;

// Subtransient EMFs that are slaved to the transient ones under the
// time-constant limits, for a given rotor angle.
void slave_subtransient(StateVector& s, const BareParams& b, const LimitFlags& flags,
                        const ModelSettings& settings) {
  const Constants& c = settings.constants;
  const double v_d = c.v * std::sin(s.delta - c.vartheta);
  const double v_q = c.v * std::cos(s.delta - c.vartheta);
  if (flags.tdpp_zero) {
    const double i_d = (s.eq1 - v_q) / b.x_d1;
    s.eq2 = s.eq1 - (b.x_d1 - b.x_d2) * i_d;
  }
  if (flags.tqpp_zero) {
    double i_q;
    if (settings.iq_form == QAxisCurrent::subtransient_d) {
      i_q = (v_d - s.ed1) / b.x_q1;
    } else {
      i_q = (v_d - s.eq2) / b.x_q2;
    }
    s.ed2 = s.ed1 + (b.x_q1 - b.x_q2) * i_q;
  }
}

double power_mismatch(StateVector s, double delta, const BareParams& b, const LimitFlags& flags,
                      const ModelSettings& settings) {
  s.delta = delta;
  slave_subtransient(s, b, flags, settings);
  return algebraic_eval(s, b, settings.constants, settings.iq_form).p_g - settings.constants.p_m;
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive");
  }
}

// Pointwise derivative of the flagged model at a state whose algebraic
// components are already resolved.
void fill_derivative(RhsEvaluation& out, const BareParams& b, const LimitFlags& flags,
                     const Constants& c) {
  const StateVector& s = out.state;
  const AlgebraicVars& a = out.algebraic;
  StateVector& d = out.derivative;
  d = StateVector{0, 0, 0, 0, 0, 0};
  out.dynamic.fill(false);

  if (!flags.h_zero) {
    d.delta = c.omega_b * (s.omega - c.omega_0);
    d.omega = (c.p_m - a.p_g - b.D * (s.omega - c.omega_0)) / b.H;
    out.dynamic[0] = out.dynamic[1] = true;
  }
  d.eq1 = (-s.eq1 - (b.x_d - b.x_d1) * a.i_d + c.v_f0) / b.T_d01;
  d.ed1 = (-s.ed1 + (b.x_q - b.x_q1) * a.i_q) / b.T_q01;
  out.dynamic[2] = out.dynamic[3] = true;
  if (!flags.tdpp_zero) {
    d.eq2 = (-s.eq2 + s.eq1 - (b.x_d1 - b.x_d2) * a.i_d) / b.T_d02;
    out.dynamic[4] = true;
  }
  if (!flags.tqpp_zero) {
    d.ed2 = (-s.ed2 + s.ed1 + (b.x_q1 - b.x_q2) * a.i_q) / b.T_q02;
    out.dynamic[5] = true;
  }
}

void check_model(const BareParams& b, const LimitFlags& flags) {
  check_positive(b.x_d2, "x''_d");
  check_positive(b.x_q2, "x''_q");
  check_positive(b.T_d01, "T'_d0");
  check_positive(b.T_q01, "T'_q0");
  if (!flags.h_zero) check_positive(b.H, "H");
  if (!flags.tdpp_zero) check_positive(b.T_d02, "T''_d0");
  if (!flags.tqpp_zero) check_positive(b.T_q02, "T''_q0");
}

std::vector<State> dynamic_states(const LimitFlags& flags) {
  std::vector<State> out;
  if (!flags.h_zero) {
    out.push_back(State::delta);
    out.push_back(State::omega);
  }
  out.push_back(State::eq1);
  out.push_back(State::ed1);
  if (!flags.tdpp_zero) out.push_back(State::eq2);
  if (!flags.tqpp_zero) out.push_back(State::ed2);
  return out;
}

// Second derivative on a uniform grid, five-point stencils (one-sided at
// the two nodes nearest each end).
std::vector<double> second_derivative(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> out(n, 0.0);
  const double s = 12.0 * h * h;
  for (std::size_t k = 2; k + 2 < n; ++k) {
    out[k] = (-f[k - 2] + 16.0 * f[k - 1] - 30.0 * f[k] + 16.0 * f[k + 1] - f[k + 2]) / s;
  }
  out[0] = (35.0 * f[0] - 104.0 * f[1] + 114.0 * f[2] - 56.0 * f[3] + 11.0 * f[4]) / s;
  out[1] = (11.0 * f[0] - 20.0 * f[1] + 6.0 * f[2] + 4.0 * f[3] - f[4]) / s;
  out[n - 1] = (35.0 * f[n - 1] - 104.0 * f[n - 2] + 114.0 * f[n - 3] - 56.0 * f[n - 4] +
                11.0 * f[n - 5]) / s;
  out[n - 2] =
      (11.0 * f[n - 1] - 20.0 * f[n - 2] + 6.0 * f[n - 3] + 4.0 * f[n - 4] - f[n - 5]) / s;
  return out;
}

}  // namespace

void Constants::validate() const {
  check_positive(omega_b, "omega_b");
  check_positive(v_f0, "v_f0");
  check_positive(p_m, "P_m");
  check_positive(v, "V");
  check_positive(omega_0, "omega_0");
  if (!std::isfinite(vartheta)) throw DomainError("vartheta must be finite");
}

std::string_view param_name(Param p) { return kParamNames[static_cast<std::size_t>(p)]; }

std::optional<Param> param_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (kParamNames[i] == name) return static_cast<Param>(i);
  }
  return std::nullopt;
}

const std::array<Param, kNumParams>& all_params() {
  static const std::array<Param, kNumParams> params = [] {
    std::array<Param, kNumParams> a{};
    for (std::size_t i = 0; i < kNumParams; ++i) a[i] = static_cast<Param>(i);
    return a;
  }();
  return params;
}

double& IndependentParams::operator[](Param p) {
  switch (p) {
    case Param::H: return H;
    case Param::D: return D;
    case Param::dx1: return dx1;
    case Param::dx2: return dx2;
    case Param::dx3: return dx3;
    case Param::dx4: return dx4;
    case Param::xdpp: return xdpp;
    case Param::dTd: return dTd;
    case Param::dTq: return dTq;
    case Param::Tdpp: return Tdpp;
    case Param::Tqpp: return Tqpp;
  }
  throw DomainError("unknown parameter");
}

double IndependentParams::operator[](Param p) const {
  return const_cast<IndependentParams&>(*this)[p];
}

std::array<double, kNumParams> IndependentParams::to_array() const {
  std::array<double, kNumParams> a{};
  for (Param p : all_params()) a[static_cast<std::size_t>(p)] = (*this)[p];
  return a;
}

IndependentParams IndependentParams::from_array(const std::array<double, kNumParams>& values) {
  IndependentParams p;
  for (Param q : all_params()) p[q] = values[static_cast<std::size_t>(q)];
  return p;
}

void IndependentParams::validate() const {
  for (Param p : all_params()) {
    const double v = (*this)[p];
    if (!std::isfinite(v) || v < 0.0) {
      throw DomainError("independent parameter " + std::string(param_name(p)) +
                        " must be finite and non-negative");
    }
  }
}

bool BareParams::satisfies_ordering() const {
  return x_d >= x_q && x_q >= x_q1 && x_q1 >= x_d1 && x_d1 >= x_q2 && x_q2 >= x_d2 &&
         x_d2 >= 0.0 && T_d01 >= T_d02 && T_d02 >= 0.0 && T_q01 >= T_q02 && T_q02 >= 0.0;
}

BareParams independent_to_bare(const IndependentParams& p) {
  p.validate();
  BareParams b;
  b.H = p.H;
  b.D = p.D;
  b.x_d2 = p.xdpp;
  b.x_q2 = p.xdpp;  // fifth reactance difference is fixed at zero
  b.x_d1 = b.x_q2 + p.dx4;
  b.x_q1 = b.x_d1 + p.dx3;
  b.x_q = b.x_q1 + p.dx2;
  b.x_d = b.x_q + p.dx1;
  b.T_d02 = p.Tdpp;
  b.T_d01 = p.Tdpp + p.dTd;
  b.T_q02 = p.Tqpp;
  b.T_q01 = p.Tqpp + p.dTq;
  return b;
}

IndependentParams bare_to_independent(const BareParams& b) {
  if (!b.satisfies_ordering()) throw DomainError("bare parameters violate the ordering chain");
  if (b.x_q2 != b.x_d2) throw DomainError("x''_q must equal x''_d");
  IndependentParams p;
  p.H = b.H;
  p.D = b.D;
  p.dx1 = b.x_d - b.x_q;
  p.dx2 = b.x_q - b.x_q1;
  p.dx3 = b.x_q1 - b.x_d1;
  p.dx4 = b.x_d1 - b.x_q2;
  p.xdpp = b.x_d2;
  p.dTd = b.T_d01 - b.T_d02;
  p.dTq = b.T_q01 - b.T_q02;
  p.Tdpp = b.T_d02;
  p.Tqpp = b.T_q02;
  return p;
}

std::string_view state_name(State s) { return kStateNames[static_cast<std::size_t>(s)]; }

double& StateVector::operator[](State s) {
  switch (s) {
    case State::delta: return delta;
    case State::omega: return omega;
    case State::eq1: return eq1;
    case State::ed1: return ed1;
    case State::eq2: return eq2;
    case State::ed2: return ed2;
  }
  throw DomainError("unknown state");
}

double StateVector::operator[](State s) const { return const_cast<StateVector&>(*this)[s]; }

Eigen::Matrix<double, 6, 1> StateVector::to_vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v << delta, omega, eq1, ed1, eq2, ed2;
  return v;
}

StateVector StateVector::from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

QAxisCurrent default_q_axis_current() {
#ifdef SGID_IQ_AS_PRINTED
  return QAxisCurrent::as_printed;
#else
  return QAxisCurrent::subtransient_d;
#endif
}

AlgebraicVars algebraic_eval(const StateVector& s, const BareParams& b, const Constants& c,
                             QAxisCurrent form) {
  if (!(b.x_d2 > 0.0) || !(b.x_q2 > 0.0)) {
    throw DomainError("subtransient reactances must be positive");
  }
  AlgebraicVars a;
  a.v_d = c.v * std::sin(s.delta - c.vartheta);
  a.v_q = c.v * std::cos(s.delta - c.vartheta);
  a.i_d = (s.eq2 - a.v_q) / b.x_d2;
  const double emf = form == QAxisCurrent::subtransient_d ? s.ed2 : s.eq2;
  a.i_q = (a.v_d - emf) / b.x_q2;
  a.p_g = a.v_d * a.i_d + a.v_q * a.i_q;
  return a;
}

const std::array<Limit, 5>& limit_chain() { return kChain; }

std::string_view limit_name(Limit l) {
  switch (l) {
    case Limit::d_zero: return "d_zero";
    case Limit::h_zero: return "h_zero";
    case Limit::tdpp_zero: return "tdpp_zero";
    case Limit::tqpp_zero: return "tqpp_zero";
    case Limit::dx1_zero: return "dx1_zero";
  }
  return "unknown";
}

Param limit_param(Limit l) {
  switch (l) {
    case Limit::d_zero: return Param::D;
    case Limit::h_zero: return Param::H;
    case Limit::tdpp_zero: return Param::Tdpp;
    case Limit::tqpp_zero: return Param::Tqpp;
    case Limit::dx1_zero: return Param::dx1;
  }
  throw DomainError("unknown limit");
}

std::optional<Limit> limit_for_param(Param p) {
  for (Limit l : kChain) {
    if (limit_param(l) == p) return l;
  }
  return std::nullopt;
}

LimitFlags LimitFlags::chain_prefix(std::size_t depth) {
  if (depth > kChain.size()) throw DomainError("limit chain has only five members");
  LimitFlags f;
  for (std::size_t i = 0; i < depth; ++i) f = f.with(kChain[i]);
  return f;
}

bool LimitFlags::has(Limit l) const {
  switch (l) {
    case Limit::d_zero: return d_zero;
    case Limit::h_zero: return h_zero;
    case Limit::tdpp_zero: return tdpp_zero;
    case Limit::tqpp_zero: return tqpp_zero;
    case Limit::dx1_zero: return dx1_zero;
  }
  return false;
}

LimitFlags LimitFlags::with(Limit l) const {
  LimitFlags f = *this;
  switch (l) {
    case Limit::d_zero: f.d_zero = true; break;
    case Limit::h_zero: f.h_zero = true; break;
    case Limit::tdpp_zero: f.tdpp_zero = true; break;
    case Limit::tqpp_zero: f.tqpp_zero = true; break;
    case Limit::dx1_zero: f.dx1_zero = true; break;
  }
  return f;
}

std::size_t LimitFlags::depth() const {
  return static_cast<std::size_t>(std::count_if(kChain.begin(), kChain.end(),
                                                [this](Limit l) { return has(l); }));
}

bool LimitFlags::is_chain_prefix() const {
  bool gap = false;
  for (Limit l : kChain) {
    if (!has(l)) {
      gap = true;
    } else if (gap) {
      return false;
    }
  }
  return true;
}

std::optional<Limit> LimitFlags::next() const {
  for (Limit l : kChain) {
    if (!has(l)) return l;
  }
  return std::nullopt;
}

void LimitFlags::validate() const {
  if (!is_chain_prefix()) {
    throw DomainError("limit flags must be a prefix of the chain D, H, T''_d0, T''_q0, dx1 (got " +
                      describe() + ")");
  }
}

std::vector<Param> LimitFlags::active_params() const {
  std::vector<Param> out;
  for (Param p : all_params()) {
    auto l = limit_for_param(p);
    if (!l || !has(*l)) out.push_back(p);
  }
  return out;
}

std::string LimitFlags::describe() const {
  std::ostringstream os;
  os << '{';
  bool first = true;
  for (Limit l : kChain) {
    if (!has(l)) continue;
    if (!first) os << ',';
    os << limit_name(l);
    first = false;
  }
  os << '}';
  return os.str();
}

IndependentParams effective_params(const IndependentParams& p, const LimitFlags& flags) {
  IndependentParams e = p;
  for (Limit l : kChain) {
    if (flags.has(l)) e[limit_param(l)] = 0.0;
  }
  return e;
}

double solve_rotor_angle(const StateVector& s, const BareParams& b, const LimitFlags& flags,
                         const ModelSettings& settings, double warm_start) {
  const double theta = settings.constants.vartheta;
  double lo = theta;
  double hi = theta + std::numbers::pi / 2.0;
  const double g_lo = power_mismatch(s, lo, b, flags, settings);
  const double g_hi = power_mismatch(s, hi, b, flags, settings);
  if (!(g_lo < 0.0 && g_hi > 0.0)) {
    throw NumericalError("P_g = P_m has no root on the operating branch",
                         std::min(std::abs(g_lo), std::abs(g_hi)));
  }
  double x = (warm_start > lo && warm_start < hi) ? warm_start : 0.5 * (lo + hi);
  double g = power_mismatch(s, x, b, flags, settings);
  constexpr double eta = 1e-7;
  for (int iter = 0; iter < 100; ++iter) {
    if (std::abs(g) < kAngleTolerance) return x;
    if (g < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double slope = (power_mismatch(s, x + eta, b, flags, settings) -
                          power_mismatch(s, x - eta, b, flags, settings)) /
                         (2.0 * eta);
    double next = x - g / slope;
    if (!(slope > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;
    x = next;
    g = power_mismatch(s, x, b, flags, settings);
  }
  if (std::abs(g) < kAngleTolerance) return x;
  throw NumericalError("rotor angle solve did not converge", std::abs(g));
}

StateVector complete_state(const StateVector& s, const BareParams& b, const LimitFlags& flags,
                           const ModelSettings& settings) {
  StateVector out = s;
  if (flags.h_zero) out.delta = solve_rotor_angle(s, b, flags, settings, s.delta);
  slave_subtransient(out, b, flags, settings);
  return out;
}

RhsEvaluation rhs(const StateVector& s, const IndependentParams& p, const LimitFlags& flags,
                  const ModelSettings& settings) {
  flags.validate();
  settings.constants.validate();
  const BareParams b = independent_to_bare(effective_params(p, flags));
  check_model(b, flags);
  RhsEvaluation out;
  out.state = complete_state(s, b, flags, settings);
  out.algebraic = algebraic_eval(out.state, b, settings.constants, settings.iq_form);
  if (flags.h_zero) out.constraint_residual = std::abs(out.algebraic.p_g - settings.constants.p_m);
  fill_derivative(out, b, flags, settings.constants);
  return out;
}

double Trajectory::interpolate(const std::vector<double>& values, double t) const {
  const std::size_t n = fine_t_.size();
  if (n == 1) return values.front();
  const double h = (fine_t_.back() - fine_t_.front()) / static_cast<double>(n - 1);
  const double x = (t - fine_t_.front()) / h;
  std::size_t i = static_cast<std::size_t>(std::clamp(std::floor(x), 0.0, double(n - 2)));
  const double w = std::clamp(x - static_cast<double>(i), 0.0, 1.0);
  if (w == 0.0) return values[i];
  return (1.0 - w) * values[i] + w * values[i + 1];
}

StateVector Trajectory::assemble(const Eigen::VectorXd& dyn, double delta_guess) const {
  StateVector s;
  s.omega = settings_.constants.omega_0;
  s.delta = delta_guess;
  for (std::size_t i = 0; i < dynamic_states_.size(); ++i) {
    s[dynamic_states_[i]] = dyn[static_cast<Eigen::Index>(i)];
  }
  return complete_state(s, bare_, flags_, settings_);
}

StateVector Trajectory::at(double t) const {
  if (!contains(t)) throw DomainError("trajectory evaluated outside its span");
  const Eigen::VectorXd dyn = dynamic_(t);
  if (!flags_.h_zero) return assemble(dyn, 0.0);
  StateVector s = assemble(dyn, interpolate(fine_delta_, t));
  s.omega = interpolate(fine_omega_, t);
  return s;
}

Trajectory integrate(const IndependentParams& p, const LimitFlags& flags, const StateVector& ics,
                     double t_end, const IntegrationOptions& options) {
  flags.validate();
  options.settings.constants.validate();
  if (!(t_end >= options.t_start)) throw DomainError("t_end must not precede t_start");
  if (!(options.rtol > 0.0) || !(options.atol > 0.0)) {
    throw DomainError("integration tolerances must be positive");
  }

  Trajectory traj;
  traj.flags_ = flags;
  traj.settings_ = options.settings;
  traj.bare_ = independent_to_bare(effective_params(p, flags));
  check_model(traj.bare_, flags);
  traj.dynamic_states_ = dynamic_states(flags);

  const BareParams& b = traj.bare_;
  const ModelSettings& settings = traj.settings_;
  const Constants& c = settings.constants;
  const std::vector<State>& dyn = traj.dynamic_states_;

  const StateVector start = complete_state(ics, b, flags, settings);
  Eigen::VectorXd y0(static_cast<Eigen::Index>(dyn.size()));
  for (std::size_t i = 0; i < dyn.size(); ++i) y0[static_cast<Eigen::Index>(i)] = start[dyn[i]];

  double warm = start.delta;
  auto f = [&](double /*t*/, const Eigen::VectorXd& y, Eigen::VectorXd& dydt) {
    RhsEvaluation ev;
    ev.state.omega = c.omega_0;
    ev.state.delta = warm;
    for (std::size_t i = 0; i < dyn.size(); ++i) ev.state[dyn[i]] = y[static_cast<Eigen::Index>(i)];
    if (flags.h_zero) {
      ev.state.delta = solve_rotor_angle(ev.state, b, flags, settings, warm);
      warm = ev.state.delta;
    }
    slave_subtransient(ev.state, b, flags, settings);
    ev.algebraic = algebraic_eval(ev.state, b, c, settings.iq_form);
    fill_derivative(ev, b, flags, c);
    for (std::size_t i = 0; i < dyn.size(); ++i) {
      dydt[static_cast<Eigen::Index>(i)] = ev.derivative[dyn[i]];
    }
  };

  ode::Options ode_options;
  ode_options.rtol = options.rtol;
  ode_options.atol = options.atol;
  ode_options.initial_step = options.initial_step;
  ode_options.max_step = options.max_step;
  ode::DormandPrince solver(ode_options);
  ode::Result result = solver.integrate(f, options.t_start, y0, t_end);
  if (result.status != ode::Status::completed) {
    throw NumericalError(std::string("generator integration failed: ") +
                             ode::to_string(result.status),
                         result.last_step);
  }
  traj.dynamic_ = std::move(result.solution);

  if (flags.h_zero) {
    const double span = t_end - options.t_start;
    std::size_t k = 0;
    if (span > 0.0) {
      k = static_cast<std::size_t>(std::ceil(span / options.omega_fd_step - 1e-9));
      k = std::max<std::size_t>(k, 4);
    }
    const double h = k > 0 ? span / static_cast<double>(k) : 0.0;
    traj.fine_t_.resize(k + 1);
    traj.fine_delta_.resize(k + 1);
    traj.fine_omega_.assign(k + 1, start.omega);
    double guess = start.delta;
    for (std::size_t i = 0; i <= k; ++i) {
      const double t = i == k ? t_end : options.t_start + h * static_cast<double>(i);
      traj.fine_t_[i] = t;
      StateVector s = traj.assemble(traj.dynamic_(t), guess);
      traj.fine_delta_[i] = s.delta;
      guess = s.delta;
    }
    if (k > 0) {
      const std::vector<double> accel = second_derivative(traj.fine_delta_, h);
      for (std::size_t i = 1; i <= k; ++i) {
        traj.fine_omega_[i] = traj.fine_omega_[i - 1] +
                              0.5 * h * (accel[i - 1] + accel[i]) / c.omega_b;
      }
    }
  }

  traj.states_.reserve(traj.dynamic_.nodes().size());
  for (double t : traj.dynamic_.nodes()) traj.states_.push_back(traj.at(t));
  return traj;
}

void ObservationGrid::validate() const {
  if (!(t_start < t_end)) throw DomainError("observation grid needs t_start < t_end");
  if (!(dt > 0.0)) throw DomainError("observation grid needs dt > 0");
  if (observed.empty()) throw DomainError("observation grid observes no states");
}

std::vector<double> ObservationGrid::times() const {
  validate();
  const auto n = static_cast<std::size_t>(std::floor((t_end - t_start) / dt + 1e-9));
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out[k] = t_start + static_cast<double>(k) * dt;
  return out;
}

Eigen::VectorXd observe(const Trajectory& traj, const ObservationGrid& grid) {
  const std::vector<double> times = grid.times();
  if (times.front() < traj.t_begin() || times.back() > traj.t_end()) {
    throw DomainError("observation grid lies outside the trajectory span");
  }
  const auto m = static_cast<Eigen::Index>(grid.observed.size());
  Eigen::VectorXd y(static_cast<Eigen::Index>(times.size()) * m);
  for (std::size_t k = 0; k < times.size(); ++k) {
    const StateVector s = traj.at(times[k]);
    for (Eigen::Index j = 0; j < m; ++j) {
      y[static_cast<Eigen::Index>(k) * m + j] = s[grid.observed[static_cast<std::size_t>(j)]];
    }
  }
  return y;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const std::vector<double>& times) {
  os << "t,delta,omega,eq1,ed1,eq2,ed2\n";
  os << std::setprecision(15);
  for (double t : times) {
    const StateVector s = traj.at(t);
    os << t << ',' << s.delta << ',' << s.omega << ',' << s.eq1 << ',' << s.ed1 << ',' << s.eq2
       << ',' << s.ed2 << '\n';
  }
}

void write_params_json(std::ostream& os, const IndependentParams& p) {
  nlohmann::ordered_json j;
  for (Param q : all_params()) j[std::string(param_name(q))] = p[q];
  os << j.dump(2) << '\n';
}

IndependentParams read_params_json(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed parameter file: ") + e.what());
  }
  if (!j.is_object()) throw DomainError("parameter file must hold a JSON object");
  IndependentParams p;
  for (const auto& [key, value] : j.items()) {
    const std::optional<Param> q = param_from_name(key);
    if (!q) throw DomainError("unknown parameter '" + key + "'");
    if (!value.is_number()) throw DomainError("parameter '" + key + "' is not a number");
    p[*q] = value.get<double>();
  }
  p.validate();
  return p;
}

}  // namespace sgid
