#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sgid/errors.hpp"
#include "sgid/harmonics.hpp"

using namespace sgid;

namespace {

Eigen::MatrixXd uniform_points(int n, int d, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

Eigen::MatrixXd grid2(int n) {
  Eigen::MatrixXd x(n * n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) x.row(i * n + j) << static_cast<double>(i) / (n - 1), static_cast<double>(j) / (n - 1);
  }
  return x;
}

}  // namespace

TEST_SUITE("geometric harmonics") {
  TEST_CASE("training prediction equals the truncated projection") {
    const Eigen::MatrixXd x = uniform_points(150, 3, 1);
    Eigen::MatrixXd f(150, 2);
    f.col(0) = (3.0 * x.col(0)).array().sin().matrix();
    f.col(1) = x.col(1).cwiseProduct(x.col(2));
    GHOptions o;
    o.retain = 40;
    const GHModel m = gh_fit(x, f, 0.05, o);
    CHECK(m.retained() == 40);
    const GHPrediction p = gh_predict(m, x);
    CHECK((p.values - gh_projection(m)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(p.nearest_sq_distance.cwiseAbs().maxCoeff() < 1e-20);
    for (Eigen::Index a = 1; a < m.sigma.size(); ++a) CHECK(m.sigma[a] <= m.sigma[a - 1]);
    CHECK(m.sigma.minCoeff() > 0.0);
  }

  TEST_CASE("basis eigenvector is reproduced") {
    const Eigen::MatrixXd x = uniform_points(100, 2, 2);
    GHOptions o;
    o.retain = 30;
    const GHModel probe = gh_fit(x, Eigen::MatrixXd::Ones(100, 1), 0.1, o);
    const Eigen::MatrixXd psi0 = probe.psi.col(0);
    const GHModel m = gh_fit(x, psi0, 0.1, o);
    CHECK((gh_predict(m, x).values - psi0).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("constant target concentrates on the top eigenvector") {
    const Eigen::MatrixXd x = uniform_points(200, 2, 3);
    GHOptions o;
    o.retain = 60;
    const GHModel m = gh_fit(x, Eigen::MatrixXd::Constant(200, 1, 2.0), 0.5, o);
    const double total = m.coefficients.squaredNorm();
    CHECK(m.coefficients(0, 0) * m.coefficients(0, 0) / total > 0.9);
    const Eigen::MatrixXd inner = uniform_points(50, 2, 4, 0.25, 0.75);
    const GHPrediction p = gh_predict(m, inner);
    CHECK((p.values.array() - 2.0).abs().maxCoeff() < 1e-3);
    CHECK(gh_gradient(m, Eigen::Vector2d(0.5, 0.5)).cwiseAbs().maxCoeff() < 1e-2);
  }

  TEST_CASE("smooth function at midpoints") {
    const int n = 200;
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = 2.0 * M_PI * i / (n - 1);
    const Eigen::MatrixXd f = x.array().sin().matrix();
    GHOptions o;
    o.delta_rule = true;
    o.delta = 1e-12;
    const GHModel m = gh_fit(x, f, 0.05, o);
    double worst = 0.0;
    for (int i = 30; i < n - 30; ++i) {
      const double mid = 0.5 * (x(i, 0) + x(i + 1, 0));
      const double pred = gh_predict_point(m, Eigen::VectorXd::Constant(1, mid))[0];
      worst = std::max(worst, std::abs(pred - std::sin(mid)));
    }
    CHECK(worst < 1e-3);
  }

  TEST_CASE("far extrapolation decays") {
    const Eigen::MatrixXd x = uniform_points(80, 2, 5);
    const GHModel m = gh_fit(x, Eigen::MatrixXd::Constant(80, 1, 1.0), 0.01, GHOptions{20, 1e-9, false});
    const GHPrediction p = gh_predict(m, Eigen::RowVector2d(40.0, -40.0));
    CHECK(std::abs(p.values(0, 0)) < 1e-12);
    CHECK(p.nearest_sq_distance[0] > 1000.0);
  }

  TEST_CASE("gradient matches central differences") {
    const Eigen::MatrixXd x = uniform_points(200, 3, 6);
    Eigen::MatrixXd f(200, 2);
    f.col(0) = (2.0 * x.col(0) + x.col(1)).array().sin().matrix();
    f.col(1) = x.col(2).array().square().matrix() - x.col(0);
    GHOptions o;
    o.retain = 60;
    const GHModel m = gh_fit(x, f, 0.08, o);
    const Eigen::MatrixXd pts = uniform_points(20, 3, 7, 0.2, 0.8);
    const double h = 1e-5;
    for (int i = 0; i < 20; ++i) {
      const Eigen::VectorXd p = pts.row(i).transpose();
      const Eigen::MatrixXd g = gh_gradient(m, p);
      REQUIRE(g.rows() == 3);
      REQUIRE(g.cols() == 2);
      Eigen::MatrixXd fd(3, 2);
      for (int k = 0; k < 3; ++k) {
        Eigen::VectorXd a = p, b = p;
        a[k] += h;
        b[k] -= h;
        fd.row(k) = ((gh_predict_point(m, a) - gh_predict_point(m, b)) / (2 * h)).transpose();
      }
      CHECK((g - fd).norm() <= 1e-4 * g.norm());
    }
  }

  TEST_CASE("linear function has its slope as gradient") {
    const Eigen::MatrixXd x = grid2(25);
    const Eigen::MatrixXd f = 2.0 * x.col(0) - x.col(1);
    GHOptions o;
    o.retain = 150;
    const GHModel m = gh_fit(x, f, 0.02, o);
    for (const Eigen::Vector2d p : {Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.31, 0.62), Eigen::Vector2d(0.7, 0.35)}) {
      const Eigen::MatrixXd g = gh_gradient(m, p);
      CHECK(g(0, 0) == doctest::Approx(2.0).epsilon(0.02));
      CHECK(g(1, 0) == doctest::Approx(-1.0).epsilon(0.02));
    }
  }

  TEST_CASE("more eigenpairs never worsen the training fit") {
    const Eigen::MatrixXd x = uniform_points(120, 2, 8);
    const Eigen::MatrixXd f = (4.0 * x.col(0)).array().cos().matrix() + x.col(1);
    double last = std::numeric_limits<double>::infinity();
    for (std::size_t r : {5, 10, 20, 40, 80}) {
      GHOptions o;
      o.retain = r;
      const GHModel m = gh_fit(x, f, 0.05, o);
      const double rms = (gh_predict(m, x).values - f).norm();
      CHECK(rms <= last + 1e-12);
      last = rms;
    }
  }

  TEST_CASE("delta rule drops tiny eigenvalues") {
    const Eigen::MatrixXd x = uniform_points(60, 1, 9);
    GHOptions o;
    o.delta_rule = true;
    o.delta = 1e-6;
    const GHModel m = gh_fit(x, x, 0.5, o);
    CHECK(m.retained() < 60);
    CHECK(m.sigma.minCoeff() > 1e-6 * m.sigma[0]);
    GHOptions fixed;
    fixed.retain = 60;
    const GHModel f = gh_fit(x, x, 0.5, fixed);
    CHECK(f.retained() < 60);
    CHECK_FALSE(f.warnings.empty());
  }

  TEST_CASE("preconditions") {
    const Eigen::MatrixXd x = uniform_points(10, 2, 10);
    CHECK_THROWS_AS(gh_fit(x, Eigen::MatrixXd::Ones(9, 1), 0.1), DomainError);
    CHECK_THROWS_AS(gh_fit(x, Eigen::MatrixXd::Ones(10, 1), 0.1), DomainError);  // retain 250 > 10
    CHECK_THROWS_AS(gh_fit(x, Eigen::MatrixXd::Ones(10, 1), -1.0, GHOptions{5, 1e-9, false}), DomainError);
    const GHModel m = gh_fit(x, Eigen::MatrixXd::Ones(10, 1), 0.1, GHOptions{5, 1e-9, false});
    CHECK_THROWS_AS(gh_predict_point(m, Eigen::VectorXd::Zero(3)), DomainError);
  }

  TEST_CASE("JSON round trip") {
    const Eigen::MatrixXd x = uniform_points(40, 2, 11);
    const GHModel m = gh_fit(x, x.col(0), 0.1, GHOptions{15, 1e-9, false});
    std::stringstream ss;
    write_gh_json(ss, m);
    const GHModel r = read_gh_json(ss);
    const Eigen::MatrixXd pts = uniform_points(5, 2, 12);
    CHECK((gh_predict(m, pts).values - gh_predict(r, pts).values).cwiseAbs().maxCoeff() < 1e-12);
    std::stringstream bad("{\"epsilon_star\": 1}");
    CHECK_THROWS_AS(read_gh_json(bad), DomainError);
  }
}

TEST_SUITE("inverse function checks") {
  TEST_CASE("identity map has unit determinant") {
    const Eigen::MatrixXd x = grid2(25);
    const GHModel m = gh_fit(x, x, 0.02, GHOptions{150, 1e-9, false});
    Eigen::MatrixXd pts(4, 2);
    pts << 0.5, 0.5, 0.3, 0.6, 0.7, 0.4, 0.45, 0.55;
    const JacobianReport r = jacobian_report(m, pts);
    CHECK(r.sign_consistent);
    for (double d : r.determinants) CHECK(d == doctest::Approx(1.0).epsilon(0.05));
    CHECK(r.min_abs > 0.9);
  }

  TEST_CASE("orientation reversal is detected") {
    const Eigen::MatrixXd x = grid2(20);
    Eigen::MatrixXd swapped(x.rows(), 2);
    swapped << x.col(1), x.col(0);
    const GHModel m = gh_fit(x, swapped, 0.03, GHOptions{120, 1e-9, false});
    const JacobianReport r = jacobian_report(m, Eigen::RowVector2d(0.5, 0.5));
    CHECK(r.determinants[0] < 0.0);
  }

  TEST_CASE("mixed signs are not consistent") {
    // f(x, y) = (x^2, y) folds the square along x = 0.5 after centering
    Eigen::MatrixXd x = grid2(21);
    Eigen::MatrixXd t(x.rows(), 2);
    t << (x.col(0).array() - 0.5).square().matrix(), x.col(1);
    const GHModel m = gh_fit(x, t, 0.02, GHOptions{150, 1e-9, false});
    Eigen::MatrixXd pts(2, 2);
    pts << 0.25, 0.5, 0.75, 0.5;
    const JacobianReport r = jacobian_report(m, pts);
    CHECK_FALSE(r.sign_consistent);
  }

  TEST_CASE("non-square map is rejected") {
    const Eigen::MatrixXd x = uniform_points(20, 2, 13);
    const GHModel m = gh_fit(x, x.col(0), 0.1, GHOptions{10, 1e-9, false});
    CHECK_THROWS_AS(jacobian_report(m, x), DomainError);
  }
}
