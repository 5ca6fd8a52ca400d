#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "sgid/errors.hpp"
#include "sgid/model.hpp"

using namespace sgid;

namespace {

// Second transcription of the dynamics, written directly from the printed
// equations with nominal numbers substituted by hand.
struct Oracle {
  double vd, vq, id, iq, pg;
  double d_delta, d_omega, d_eq1, d_ed1, d_eq2, d_ed2;
};

Oracle nominal_oracle(bool iq_from_eq2) {
  const double delta = 0.5, omega = 0.98, eq1 = 2.13, ed1 = 0.02, eq2 = 1.93, ed2 = 0.02;
  const double V = 1.09, th = 0.0, wb = 120.0 * std::numbers::pi, vf0 = 4.2, Pm = 0.7;
  const double H = 2.53, D = 0.5;
  const double xd = 5.0, xq = 4.88, xq1 = 2.86, xd1 = 0.928, xq2 = 0.48, xd2 = 0.48;
  const double Td01 = 4.75, Td02 = 0.06, Tq01 = 1.5, Tq02 = 0.21;
  Oracle o{};
  o.vd = V * std::sin(delta - th);
  o.vq = V * std::cos(delta - th);
  o.id = (eq2 - o.vq) / xd2;
  o.iq = (o.vd - (iq_from_eq2 ? eq2 : ed2)) / xq2;
  o.pg = o.vd * o.id + o.vq * o.iq;
  o.d_delta = wb * (omega - 1.0);
  o.d_omega = (Pm - o.pg - D * (omega - 1.0)) / H;
  o.d_eq1 = (-eq1 - (xd - xd1) * o.id + vf0) / Td01;
  o.d_ed1 = (-ed1 + (xq - xq1) * o.iq) / Tq01;
  o.d_eq2 = (-eq2 + eq1 - (xd1 - xd2) * o.id) / Td02;
  o.d_ed2 = (-ed2 + ed1 + (xq1 - xq2) * o.iq) / Tq02;
  return o;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

double max_rel_dev(const Trajectory& ref, const Trajectory& red, State s) {
  double num = 0.0, scale = 0.0;
  for (double t = 3.0; t <= 5.0 + 1e-12; t += 0.01) {
    const double a = ref.at(t)[s], b = red.at(t)[s];
    num = std::max(num, std::abs(a - b));
    scale = std::max(scale, std::abs(a));
  }
  return num / scale;
}

}  // namespace

TEST_SUITE("parameters") {
  TEST_CASE("nominal independent parameters map to the tabulated bare values") {
    const BareParams b = independent_to_bare(IndependentParams::nominal());
    CHECK(b.x_d == doctest::Approx(5.0));
    CHECK(b.x_q == doctest::Approx(4.88));
    CHECK(b.x_q1 == doctest::Approx(2.86));
    CHECK(b.x_d1 == doctest::Approx(0.928));
    CHECK(b.x_q2 == doctest::Approx(0.48));
    CHECK(b.x_d2 == doctest::Approx(0.48));
    CHECK(b.T_d01 == doctest::Approx(4.75));
    CHECK(b.T_d02 == doctest::Approx(0.06));
    CHECK(b.T_q01 == doctest::Approx(1.5));
    CHECK(b.T_q02 == doctest::Approx(0.21));
    CHECK(b.H == 2.53);
    CHECK(b.D == 0.5);
    CHECK(b.satisfies_ordering());
  }

  TEST_CASE("collapsed chain") {
    IndependentParams p;
    p.dx1 = p.dx2 = p.dx3 = p.dx4 = p.dTd = p.dTq = 0.0;
    const BareParams b = independent_to_bare(p);
    for (double x : {b.x_d, b.x_q, b.x_q1, b.x_d1, b.x_q2, b.x_d2}) CHECK(x == 0.48);
    CHECK(b.T_d01 == 0.06);
    CHECK(b.T_d02 == 0.06);
    CHECK(b.T_q01 == 0.21);
  }

  TEST_CASE("negative fields are rejected") {
    for (Param q : all_params()) {
      IndependentParams p;
      p[q] = -1e-3;
      CHECK_THROWS_AS(independent_to_bare(p), DomainError);
    }
  }

  TEST_CASE("random non-negative inputs satisfy the ordering and round trip") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (int trial = 0; trial < 500; ++trial) {
      std::array<double, kNumParams> a{};
      for (double& v : a) v = u(rng);
      if (trial % 7 == 0) a[trial % kNumParams] = 0.0;
      const IndependentParams p = IndependentParams::from_array(a);
      const BareParams b = independent_to_bare(p);
      REQUIRE(b.satisfies_ordering());
      const IndependentParams back = bare_to_independent(b);
      for (Param q : all_params()) CHECK(back[q] == doctest::Approx(p[q]).epsilon(1e-13));
    }
  }

  TEST_CASE("names round trip in table order") {
    std::size_t i = 0;
    for (Param q : all_params()) {
      CHECK(static_cast<std::size_t>(q) == i++);
      CHECK(param_from_name(param_name(q)) == q);
    }
    CHECK_FALSE(param_from_name("dx5").has_value());
  }
}

TEST_SUITE("algebraic block") {
  TEST_CASE("zero load angle") {
    StateVector s;
    s.delta = 0.0;
    const AlgebraicVars a =
        algebraic_eval(s, independent_to_bare(IndependentParams::nominal()), Constants{});
    CHECK(a.v_d == 0.0);
    CHECK(a.v_q == 1.09);
  }

  TEST_CASE("formula substitution oracle, both q-axis forms") {
    const BareParams b = independent_to_bare(IndependentParams::nominal());
    for (bool printed : {false, true}) {
      const Oracle o = nominal_oracle(printed);
      const AlgebraicVars a = algebraic_eval(StateVector::initial(), b, Constants{},
                                             printed ? QAxisCurrent::as_printed
                                                     : QAxisCurrent::subtransient_d);
      CHECK(close_rel(a.v_d, o.vd, 1e-14));
      CHECK(close_rel(a.v_q, o.vq, 1e-14));
      CHECK(close_rel(a.i_d, o.id, 1e-13));
      CHECK(close_rel(a.i_q, o.iq, 1e-13));
      CHECK(close_rel(a.p_g, o.pg, 1e-13));
      CHECK(a.p_g == a.v_d * a.i_d + a.v_q * a.i_q);
    }
  }

  TEST_CASE("zero subtransient reactance is rejected") {
    IndependentParams p;
    p.xdpp = 0.0;
    CHECK_THROWS_AS(algebraic_eval(StateVector::initial(), independent_to_bare(p), Constants{}),
                    DomainError);
  }
}

TEST_SUITE("dynamics") {
  TEST_CASE("synchronous speed freezes the rotor angle") {
    StateVector s;
    s.omega = 1.0;
    CHECK(rhs(s, IndependentParams::nominal(), LimitFlags::none()).derivative.delta == 0.0);
  }

  TEST_CASE("right-hand side matches a second transcription") {
    for (bool printed : {false, true}) {
      ModelSettings ms;
      ms.iq_form = printed ? QAxisCurrent::as_printed : QAxisCurrent::subtransient_d;
      const Oracle o = nominal_oracle(printed);
      const RhsEvaluation r =
          rhs(StateVector::initial(), IndependentParams::nominal(), LimitFlags::none(), ms);
      CHECK(close_rel(r.derivative.delta, o.d_delta, 1e-12));
      CHECK(close_rel(r.derivative.omega, o.d_omega, 1e-12));
      CHECK(close_rel(r.derivative.eq1, o.d_eq1, 1e-12));
      CHECK(close_rel(r.derivative.ed1, o.d_ed1, 1e-12));
      CHECK(close_rel(r.derivative.eq2, o.d_eq2, 1e-12));
      CHECK(close_rel(r.derivative.ed2, o.d_ed2, 1e-12));
      for (bool d : r.dynamic) CHECK(d);
    }
  }

  TEST_CASE("flags must form a chain prefix") {
    LimitFlags f;
    f.h_zero = true;
    CHECK_THROWS_AS(f.validate(), DomainError);
    CHECK_FALSE(f.is_chain_prefix());
    for (std::size_t d = 0; d <= 5; ++d) {
      const LimitFlags g = LimitFlags::chain_prefix(d);
      CHECK(g.is_chain_prefix());
      CHECK(g.depth() == d);
      CHECK(g.active_params().size() == kNumParams - d);
    }
    CHECK_FALSE(LimitFlags::chain_prefix(5).next().has_value());
    CHECK(LimitFlags::chain_prefix(2).next() == Limit::tdpp_zero);
  }

  TEST_CASE("algebraic rotor angle satisfies the power balance") {
    const LimitFlags f = LimitFlags::chain_prefix(2);
    const RhsEvaluation r = rhs(StateVector::initial(), IndependentParams::nominal(), f);
    CHECK(r.constraint_residual < 1e-12);
    CHECK(std::abs(r.algebraic.p_g - 0.7) < 1e-12);
    CHECK_FALSE(r.dynamic[static_cast<std::size_t>(State::delta)]);
    CHECK_FALSE(r.dynamic[static_cast<std::size_t>(State::omega)]);
    CHECK(r.state.delta > 0.0);
    CHECK(r.state.delta < std::numbers::pi / 2);
  }

  TEST_CASE("slaved subtransient EMFs follow the algebraic relations") {
    const LimitFlags f = LimitFlags::chain_prefix(5);
    const IndependentParams p = effective_params(IndependentParams::nominal(), f);
    const BareParams b = independent_to_bare(p);
    const RhsEvaluation r = rhs(StateVector::initial(), p, f);
    const AlgebraicVars& a = r.algebraic;
    CHECK(std::abs(r.state.eq2 - (r.state.eq1 - (b.x_d1 - b.x_d2) * a.i_d)) < 1e-12);
    CHECK(std::abs(r.state.ed2 - (r.state.ed1 + (b.x_q1 - b.x_q2) * a.i_q)) < 1e-12);
    CHECK(b.x_d == b.x_q);
  }

  TEST_CASE("limit flags zero their parameters") {
    const IndependentParams p = effective_params(IndependentParams::nominal(), LimitFlags::chain_prefix(5));
    CHECK(p.D == 0.0);
    CHECK(p.H == 0.0);
    CHECK(p.Tdpp == 0.0);
    CHECK(p.Tqpp == 0.0);
    CHECK(p.dx1 == 0.0);
    CHECK(p.dx2 == 2.02);
  }
}

TEST_SUITE("integration") {
  TEST_CASE("zero-length integration returns the initial state") {
    const Trajectory t = integrate(IndependentParams::nominal(), LimitFlags::none(),
                                   StateVector::initial(), 0.0);
    REQUIRE(t.times().size() == 1);
    CHECK(t.states().front() == StateVector::initial());
  }

  TEST_CASE("nominal response decays toward equilibrium") {
    const Trajectory t = integrate(IndependentParams::nominal(), LimitFlags::none(),
                                   StateVector::initial(), 5.0);
    for (std::size_t i = 1; i < t.times().size(); ++i) CHECK(t.times()[i] > t.times()[i - 1]);
    CHECK(t.states().size() == t.times().size());
    double early = 0.0, late = 0.0;
    for (double s = 3.0; s < 3.5; s += 0.01) early = std::max(early, std::abs(t.at(s).omega - 1.0));
    for (double s = 4.5; s < 5.0; s += 0.01) late = std::max(late, std::abs(t.at(s).omega - 1.0));
    CHECK(late < early);
    CHECK(std::abs(t.at(5.0).omega - 1.0) < 1e-2);
  }

  TEST_CASE("halving the tolerance barely moves the observations") {
    ObservationGrid g;
    IntegrationOptions a, b;
    b.rtol = b.atol = 0.5e-7;
    const Eigen::VectorXd ya = observe(integrate(IndependentParams::nominal(), LimitFlags::none(),
                                                 StateVector::initial(), 5.0, a), g);
    const Eigen::VectorXd yb = observe(integrate(IndependentParams::nominal(), LimitFlags::none(),
                                                 StateVector::initial(), 5.0, b), g);
    CHECK((ya - yb).cwiseAbs().maxCoeff() / yb.cwiseAbs().maxCoeff() < 1e-6);
  }

  TEST_CASE("observation is time-major and equals direct evaluation") {
    ObservationGrid g;
    const Trajectory t = integrate(IndependentParams::nominal(), LimitFlags::none(),
                                   StateVector::initial(), 5.0);
    const Eigen::VectorXd y = observe(t, g);
    REQUIRE(y.size() == 606);
    const std::vector<double> times = g.times();
    REQUIRE(times.size() == 101);
    for (std::size_t k = 0; k < times.size(); k += 10) {
      const StateVector s = t.at(times[k]);
      for (std::size_t j = 0; j < 6; ++j) {
        CHECK(y[static_cast<Eigen::Index>(6 * k + j)] == s[static_cast<State>(j)]);
      }
    }
  }

  TEST_CASE("constant trajectory gives identical blocks") {
    // Equilibrium of the reduced model: start from its own long-run state.
    const Trajectory settle = integrate(IndependentParams::nominal(), LimitFlags::none(),
                                        StateVector::initial(), 400.0);
    const Trajectory t = integrate(IndependentParams::nominal(), LimitFlags::none(),
                                   settle.at(400.0), 5.0);
    const Eigen::VectorXd y = observe(t, ObservationGrid{});
    for (Eigen::Index k = 1; k < 101; ++k) {
      CHECK((y.segment(6 * k, 6) - y.head(6)).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("grid outside the span is rejected") {
    const Trajectory t = integrate(IndependentParams::nominal(), LimitFlags::none(),
                                   StateVector::initial(), 4.0);
    CHECK_THROWS_AS(observe(t, ObservationGrid{}), DomainError);
    ObservationGrid bad;
    bad.dt = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
  }

  TEST_CASE("vanishing damping approaches the damping-free model") {
    IntegrationOptions o;
    IndependentParams p;
    p.D = 1e-8;
    const Eigen::VectorXd a =
        observe(integrate(p, LimitFlags::none(), StateVector::initial(), 5.0, o), ObservationGrid{});
    const Eigen::VectorXd b = observe(integrate(IndependentParams::nominal(),
                                                LimitFlags::chain_prefix(1),
                                                StateVector::initial(), 5.0, o),
                                      ObservationGrid{});
    CHECK((a - b).cwiseAbs().maxCoeff() < 10.0 * 1e-7 * std::max(1.0, b.cwiseAbs().maxCoeff()));
  }

  TEST_CASE("power balance identity holds at every accepted step") {
    const IndependentParams p = IndependentParams::nominal();
    const BareParams b = independent_to_bare(p);
    const Trajectory t = integrate(p, LimitFlags::none(), StateVector::initial(), 5.0);
    for (const StateVector& s : t.states()) {
      const AlgebraicVars a = algebraic_eval(s, b, Constants{});
      CHECK(a.p_g == a.v_d * a.i_d + a.v_q * a.i_q);
    }
  }

  TEST_CASE("reduced model tracks the full model") {
    const IndependentParams p = IndependentParams::nominal();
    const Trajectory full = integrate(p, LimitFlags::none(), StateVector::initial(), 5.0);
    IntegrationOptions o;
    o.t_start = 3.0;
    const LimitFlags all = LimitFlags::chain_prefix(5);
    const Trajectory red = integrate(effective_params(p, all), all, full.at(3.0), 5.0, o);
    CHECK(max_rel_dev(full, red, State::delta) <= 0.05);
    CHECK(max_rel_dev(full, red, State::omega) <= 0.05);
    CHECK(max_rel_dev(full, red, State::eq1) <= 0.05);
    CHECK(max_rel_dev(full, red, State::ed1) <= 0.05);
    CHECK(max_rel_dev(full, red, State::eq2) <= 0.15);
    CHECK(max_rel_dev(full, red, State::ed2) <= 0.15);
  }

  TEST_CASE("trajectory CSV has the fixed header") {
    const Trajectory t = integrate(IndependentParams::nominal(), LimitFlags::none(),
                                   StateVector::initial(), 1.0);
    std::ostringstream os;
    write_trajectory_csv(os, t, {0.0, 0.5, 1.0});
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,delta,omega,eq1,ed1,eq2,ed2");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3);
  }
}
