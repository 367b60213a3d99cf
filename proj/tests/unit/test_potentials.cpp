#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "catalog.hpp"
#include "plmc/potentials.hpp"

using namespace plmc;
using plmc::test::vec;

namespace {

// Points inside the ball on which M is certified, away from the minimizer
// where power potentials with a < 3 lose smoothness.
std::vector<Vector> test_points(const Potential& pot, std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const auto p = static_cast<Eigen::Index>(pot.dim());
  const double R = pot.lipschitz_radius();
  std::vector<Vector> out;
  while (out.size() < n) {
    Vector d(p);
    for (Eigen::Index i = 0; i < p; ++i) d(i) = nd(gen);
    const double r = R * std::pow(ud(gen), 1.0 / static_cast<double>(p));
    Vector x = r * d / d.norm();
    if (x.norm() > R) continue;
    if (pot.minimizer() && (x - *pot.minimizer()).norm() < 1e-2) continue;
    out.push_back(x);
  }
  return out;
}

}  // namespace

TEST_SUITE("potentials") {
  TEST_CASE("gradient examples") {
    const auto g = Potential::gaussian(Matrix::Identity(2, 2));
    CHECK(grad(g, Vector::Zero(2)).norm() == 0.0);
    CHECK(grad(Potential::cubic(vec({0.0})), vec({2.0}))(0) == doctest::Approx(12.0));
    const Vector pw = grad(Potential::power(2.0, vec({0.0, 0.0})), vec({1.0, 1.0}));
    CHECK(pw(0) == doctest::Approx(2.0));
    CHECK(pw(1) == doctest::Approx(2.0));
    const Vector ph = grad(Potential::pseudo_huber(1.0, vec({0.0})), vec({1.0}));
    CHECK(ph(0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    const Vector pw3 = grad(Potential::power(3.0, vec({1.0, 0.0})), vec({1.0, 2.0}));
    CHECK(pw3(1) == doctest::Approx(3.0 * 2.0 * 2.0));
  }

  TEST_CASE("gradient input errors") {
    const auto c = Potential::cubic(vec({0.0, 0.0}));
    CHECK_THROWS_AS(grad(c, vec({1.0})), std::invalid_argument);
    CHECK_THROWS_AS(grad(c, vec({NAN, 0.0})), std::invalid_argument);
    CHECK_THROWS_AS(Potential::power(1.5, vec({0.0})), std::invalid_argument);
  }

  TEST_CASE("penalized gradient examples") {
    const auto c = Potential::cubic(vec({0.0}));
    CHECK(penalized_grad(c, 0.0, vec({1.5}))(0) == grad(c, vec({1.5}))(0));
    const Vector g = penalized_grad(Potential::gaussian(Matrix::Identity(2, 2)), 1.0, vec({1.0, 0.0}));
    CHECK(g(0) == doctest::Approx(2.0));
    CHECK(g(1) == doctest::Approx(0.0));
    CHECK(penalized_grad(c, 3.0, vec({1.0}))(0) == doctest::Approx(6.0));
    CHECK_THROWS_AS(penalized_grad(c, -1.0, vec({1.0})), std::invalid_argument);

    const PenalizedPotential fg{c, 3.0};
    CHECK(fg.m() == doctest::Approx(c.m() + 3.0));
    CHECK(fg.M() == doctest::Approx(c.M() + 3.0));
    CHECK(fg.value(vec({1.0})) == doctest::Approx(1.0 + 1.5));
  }

  TEST_CASE("penalized minimizer examples") {
    const auto g = Potential::gaussian(Matrix::Identity(3, 3));
    for (double gamma : {0.1, 1.0, 10.0}) {
      CHECK(penalized_minimizer(g, gamma, 1e-12).norm() < 1e-12);
    }
    const auto shifted = Potential::gaussian(Matrix::Identity(1, 1), vec({1.0}));
    CHECK(penalized_minimizer(shifted, 1.0, 1e-12)(0) == doctest::Approx(0.5).epsilon(1e-12));
    const double x = penalized_minimizer(Potential::cubic(vec({1.0})), 3.0, 1e-12)(0);
    CHECK(x == doctest::Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-10));
    CHECK(x == doctest::Approx(0.381966).epsilon(1e-6));
  }

  TEST_CASE("penalized minimizer preconditions") {
    const auto c = Potential::cubic(vec({1.0}));
    CHECK_THROWS_AS(penalized_minimizer(c, 0.0, 1e-10), std::invalid_argument);
    CHECK_THROWS_AS(penalized_minimizer(c, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(penalized_minimizer(c, 1.0, 1e-300, 1), ConvergenceError);
  }

  TEST_CASE("penalized minimizer is stationary and inside the ball of radius ||x*||") {
    for (const auto& [name, pot] : test::catalog()) {
      CAPTURE(name);
      for (double gamma : {1e-3, 0.1, 1.0, 30.0}) {
        CAPTURE(gamma);
        const Vector x = penalized_minimizer(pot, gamma, 1e-10);
        CHECK(penalized_grad(pot, gamma, x).norm() <= 1e-10);
        CHECK(x.norm() <= pot.minimizer()->norm() + 1e-10);
      }
    }
  }

  TEST_CASE("target moment examples") {
    const auto g = Potential::gaussian(Matrix::Identity(1, 1));
    CHECK(target_moment(g, 0.0, 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(target_moment(g, 0.0, 4) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(target_moment(g, 1.0, 2) == doctest::Approx(0.5).epsilon(1e-12));
    // The quadrature path against the closed form: a gaussian written as a
    // custom potential.
    CustomParams cp;
    cp.dim = 1;
    cp.m = 1.0;
    cp.M = 1.0;
    cp.value = [](std::span<const double> x) { return 0.5 * x[0] * x[0]; };
    cp.gradient = [](std::span<const double> x, std::span<double> gr) { gr[0] = x[0]; };
    cp.minimizer = vec({0.0});
    const auto custom = Potential::custom(cp);
    CHECK(std::abs(target_moment(custom, 0.0, 2) - 1.0) < 1e-8);
    CHECK(std::abs(target_moment(custom, 0.0, 4) - 3.0) < 1e-8);
    CHECK(std::abs(target_moment(custom, 1.0, 2) - 0.5) < 1e-8);
  }

  TEST_CASE("target moment domain") {
    CHECK_THROWS_AS(target_moment(Potential::cubic(vec({1.0, 1.0})), 0.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(target_moment(Potential::cubic(vec({1.0})), 0.0, 3), std::invalid_argument);
    // multi-dimensional gaussians have closed forms
    const Matrix H = test::mat2(2.0, 0.0, 4.0);
    CHECK(target_moment(Potential::gaussian(H), 0.0, 2) == doctest::Approx(0.5 + 0.25));
  }

  TEST_CASE("gradient matches finite differences on 100 random points") {
    for (const auto& [name, pot] : test::catalog()) {
      CAPTURE(name);
      for (const Vector& x : test_points(pot, 100, 11)) {
        const Vector g = pot.gradient(x);
        const Vector fd = test::fd_gradient(pot, x);
        CHECK((g - fd).norm() <= 1e-6 * std::max(1.0, g.norm()));
      }
    }
  }

  TEST_CASE("finite-difference Hessian spectrum lies in [m, M] on the certified ball") {
    for (const auto& [name, pot] : test::catalog()) {
      CAPTURE(name);
      CHECK(pot.m() <= pot.M());
      const auto p = static_cast<Eigen::Index>(pot.dim());
      for (const Vector& x : test_points(pot, 50, 12)) {
        Matrix Hfd(p, p);
        const double e = 1e-5;
        for (Eigen::Index i = 0; i < p; ++i) {
          Vector xp = x, xm = x;
          xp(i) += e;
          xm(i) -= e;
          Hfd.col(i) = (pot.gradient(xp) - pot.gradient(xm)) / (2.0 * e);
        }
        const Matrix S = 0.5 * (Hfd + Hfd.transpose());
        const Eigen::SelfAdjointEigenSolver<Matrix> es(S);
        const double tol = 1e-5 * std::max(1.0, pot.M());
        CHECK(es.eigenvalues().minCoeff() >= pot.m() - tol);
        CHECK(es.eigenvalues().maxCoeff() <= pot.M() + tol);
      }
    }
  }

  TEST_CASE("gradient vanishes at the minimizer") {
    for (const auto& [name, pot] : test::catalog()) {
      CAPTURE(name);
      REQUIRE(pot.minimizer().has_value());
      CHECK(pot.gradient(*pot.minimizer()).norm() <= 1e-12);
    }
  }

  TEST_CASE("batch gradient equals the pointwise gradient") {
    for (const auto& [name, pot] : test::catalog()) {
      CAPTURE(name);
      const auto pts = test_points(pot, 70, 13);
      const std::size_t p = pot.dim();
      std::vector<double> xs, gs(pts.size() * p);
      for (const auto& x : pts) xs.insert(xs.end(), x.data(), x.data() + p);
      pot.gradient_batch(xs, gs);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vector g = pot.gradient(pts[i]);
        for (std::size_t d = 0; d < p; ++d) {
          CHECK(gs[i * p + d] == doctest::Approx(g(static_cast<Eigen::Index>(d))).epsilon(1e-13));
        }
      }
    }
  }

  TEST_CASE("||x_gamma|| is non-increasing in gamma") {
    for (const auto& [name, pot] : test::catalog()) {
      CAPTURE(name);
      double prev = INFINITY;
      for (int i = 0; i <= 40; ++i) {
        const double gamma = std::pow(10.0, -3.0 + 0.15 * i);
        const double r = penalized_minimizer(pot, gamma, 1e-12).norm();
        CHECK(r <= prev + 1e-8);
        prev = r;
      }
    }
  }

  TEST_CASE("mu2(pi_gamma) is non-increasing and its derivative is (mu2^2 - mu4)/2") {
    const std::vector<Potential> pots = {
        Potential::gaussian(Matrix::Identity(1, 1), vec({0.5})),
        Potential::cubic(vec({1.0})),
        Potential::power(2.5, vec({0.5})),
        Potential::pseudo_huber(1.0, vec({1.0})),
    };
    for (const auto& pot : pots) {
      CAPTURE(to_string(pot.kind()));
      double prev = INFINITY;
      for (int i = 0; i < 12; ++i) {
        const double gamma = 0.05 * i * i;
        const double mu2 = target_moment(pot, gamma, 2);
        CHECK(mu2 <= prev + 1e-10);
        prev = mu2;
        if (gamma > 0.0) {
          const double d = 1e-4;
          const double fd = (target_moment(pot, gamma + d, 2) - target_moment(pot, gamma - d, 2)) / (2 * d);
          const double identity = 0.5 * (mu2 * mu2 - target_moment(pot, gamma, 4));
          CHECK(std::abs(fd - identity) <= 1e-4);
        }
      }
    }
  }
}
