#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "catalog.hpp"
#include "plmc/exactlaw.hpp"

using namespace plmc;
using plmc::test::vec;

namespace {

GaussianLaw random_law(std::mt19937_64& gen, Eigen::Index p) {
  std::normal_distribution<double> nd;
  Matrix B(p, p);
  Vector mu(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    mu(i) = nd(gen);
    for (Eigen::Index j = 0; j < p; ++j) B(i, j) = nd(gen);
  }
  return {mu, B * B.transpose() + 1e-3 * Matrix::Identity(p, p)};
}

GaussianLaw scalar(double mean, double var) {
  return {vec({mean}), Matrix::Constant(1, 1, var)};
}

}  // namespace

TEST_SUITE("exactlaw") {
  TEST_CASE("OU variance from a point mass") {
    std::vector<double> t;
    for (int i = 0; i <= 50; ++i) t.push_back(0.1 * i);
    const auto laws = propagate_gaussian_pld(Matrix::Identity(1, 1), PenaltySchedule::zero(), 1.0, t,
                                             GaussianLaw::dirac(vec({0.0})));
    REQUIRE(laws.size() == t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double exact = 1.0 - std::exp(-2.0 * t[i]);
      CHECK(std::abs(laws[i].cov(0, 0) - exact) <= 1e-6 * std::max(exact, 1e-12));
    }
    CHECK(laws[10].cov(0, 0) == doctest::Approx(0.864665).epsilon(1e-6));
  }

  TEST_CASE("long-time limits") {
    Matrix H(2, 2);
    H << 2.0, 0.5, 0.5, 1.0;
    const std::vector<double> t{0.0, 40.0};
    const auto laws = propagate_gaussian_pld(H, PenaltySchedule::zero(), 1.0, t, GaussianLaw::dirac(vec({3.0, -1.0})));
    CHECK((laws.back().cov - H.inverse()).norm() < 1e-9);
    CHECK(laws.back().mean.norm() < 1e-9);
    const double c = 0.7;
    const auto pen = propagate_gaussian_pld(Matrix::Identity(1, 1), PenaltySchedule::constant(c), 1.0, t,
                                            GaussianLaw::dirac(vec({0.0})));
    CHECK(pen.back().cov(0, 0) == doctest::Approx(1.0 / (1.0 + c)).epsilon(1e-9));
    const auto hot = propagate_gaussian_pld(Matrix::Identity(1, 1), PenaltySchedule::zero(), 0.25, t,
                                            GaussianLaw::dirac(vec({0.0})));
    CHECK(hot.back().cov(0, 0) == doctest::Approx(0.25).epsilon(1e-9));
  }

  TEST_CASE("time-varying penalty against the scalar closed form") {
    // alpha = 1/(A + 2t), lambda = 1, init N(1, 0): mean = e^{-t} (A / (A + 2t))^{1/2}
    const double A = 2.0;
    const std::vector<double> t{0.0, 0.5, 1.0, 3.0};
    const auto laws = propagate_gaussian_pld(Matrix::Identity(1, 1), make_pld_optimal(A), 1.0, t,
                                             GaussianLaw::dirac(vec({1.0})));
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double mean = std::exp(-t[i]) * std::sqrt(A / (A + 2.0 * t[i]));
      CHECK(laws[i].mean(0) == doctest::Approx(mean).epsilon(1e-6));
    }
  }

  TEST_CASE("shifted target mean") {
    const Vector mu = vec({1.0, 2.0});
    const std::vector<double> t{0.0, 50.0};
    const auto laws = propagate_gaussian_pld(test::mat2(1.0, 0.0, 3.0), PenaltySchedule::zero(), 1.0, t,
                                             GaussianLaw::dirac(vec({0.0, 0.0})), &mu);
    CHECK((laws.back().mean - mu).norm() < 1e-9);
  }

  TEST_CASE("input validation") {
    const std::vector<double> t{0.0, 1.0};
    const auto d = GaussianLaw::dirac(vec({0.0, 0.0}));
    CHECK_THROWS_AS(propagate_gaussian_pld(test::mat2(1.0, 2.0, 1.0), PenaltySchedule::zero(), 1.0, t, d),
                    std::invalid_argument);
    Matrix asym(2, 2);
    asym << 1.0, 0.1, 0.0, 1.0;
    CHECK_THROWS_AS(propagate_gaussian_pld(asym, PenaltySchedule::zero(), 1.0, t, d), std::invalid_argument);
    const std::vector<double> bad{0.0, 1.0, 0.5};
    CHECK_THROWS_AS(propagate_gaussian_pld(Matrix::Identity(2, 2), PenaltySchedule::zero(), 1.0, bad, d),
                    std::invalid_argument);
    CHECK_THROWS_AS(w2_gaussian(d, GaussianLaw::dirac(vec({0.0}))), std::invalid_argument);
    GaussianLaw neg{vec({0.0}), Matrix::Constant(1, 1, -1.0)};
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
  }

  TEST_CASE("w2_gaussian examples") {
    std::mt19937_64 gen(3);
    const auto a = random_law(gen, 3);
    CHECK(w2_gaussian(a, a) < 1e-7);
    const Vector mu = vec({3.0, -4.0});
    CHECK(w2_gaussian({Vector::Zero(2), Matrix::Identity(2, 2)}, {mu, Matrix::Identity(2, 2)}) ==
          doctest::Approx(5.0));
    CHECK(w2_gaussian(scalar(0.0, 1.0), scalar(0.0, 4.0)) == doctest::Approx(1.0));
    const auto b = random_law(gen, 3);
    CHECK(w2_gaussian(a, b) == doctest::Approx(w2_gaussian(b, a)).epsilon(1e-9));
  }

  TEST_CASE("commuting covariances reduce to the diagonal formula") {
    GaussianLaw a{vec({0.0, 0.0}), test::mat2(1.0, 0.0, 9.0)};
    GaussianLaw b{vec({0.0, 1.0}), test::mat2(4.0, 0.0, 1.0)};
    CHECK(w2_gaussian(a, b) == doctest::Approx(std::sqrt(1.0 + 1.0 + 4.0)));
  }

  TEST_CASE("triangle inequality on random triples") {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 200; ++i) {
      const auto a = random_law(gen, 3), b = random_law(gen, 3), c = random_law(gen, 3);
      CHECK(w2_gaussian(a, c) <= w2_gaussian(a, b) + w2_gaussian(b, c) + 1e-9);
    }
  }

  TEST_CASE("exact LD contraction from a point mass") {
    std::vector<double> t;
    for (int i = 0; i <= 100; ++i) t.push_back(0.05 * i);
    const auto laws = propagate_gaussian_pld(Matrix::Identity(1, 1), PenaltySchedule::zero(), 1.0, t,
                                             GaussianLaw::dirac(vec({0.0})));
    const auto pi = gaussian_target(Matrix::Identity(1, 1), vec({0.0}));
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double w = w2_gaussian(laws[i], pi);
      CHECK(std::abs(w - (1.0 - std::sqrt(1.0 - std::exp(-2.0 * t[i])))) < 1e-7);
      CHECK(w <= std::exp(-t[i]) + 1e-12);
    }
  }

  TEST_CASE("penalized gaussian target") {
    const auto pi = gaussian_target(test::mat2(1.0, 0.0, 3.0), vec({1.0, 1.0}), 1.0);
    CHECK(pi.cov(0, 0) == doctest::Approx(0.5));
    CHECK(pi.cov(1, 1) == doctest::Approx(0.25));
    CHECK(pi.mean(0) == doctest::Approx(0.5));
    CHECK(pi.mean(1) == doctest::Approx(0.75));
  }

  TEST_CASE("psd square root clamps tiny negative eigenvalues") {
    Matrix S = test::mat2(1.0, 1.0, 1.0);
    S(1, 1) -= 1e-14;
    const Matrix R = psd_sqrt(S);
    CHECK(R.allFinite());
    CHECK((R * R - S).norm() < 1e-6);
  }
}
