#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <vector>

#include "catalog.hpp"
#include "plmc/bounds.hpp"
#include "plmc/dynamics.hpp"
#include "plmc/exactlaw.hpp"
#include "plmc/metrics.hpp"

using namespace plmc;
using plmc::test::vec;

namespace {

Potential flat(std::size_t dim = 1) {
  CustomParams cp;
  cp.dim = dim;
  cp.m = 0.0;
  cp.M = 1.0;
  cp.value = [](std::span<const double>) { return 0.0; };
  cp.gradient = [](std::span<const double>, std::span<double> g) {
    for (double& v : g) v = 0.0;
  };
  cp.name = "flat";
  return Potential::custom(cp);
}

Potential half_square(std::size_t dim = 1) {
  return Potential::gaussian(Matrix::Identity(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim)));
}

struct Moments {
  double mean = 0.0, var = 0.0;
};

Moments increment_moments(const Ensemble& before, const Ensemble& after) {
  const double n = static_cast<double>(before.states.size());
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < before.states.size(); ++i) {
    const double d = after.states[i] - before.states[i];
    s1 += d;
    s2 += d * d;
  }
  const double mean = s1 / n;
  return {mean, s2 / n - mean * mean};
}

// Brownian step check: increments N(0, 2h) within 3 standard errors.
void check_brownian(const Ensemble& before, const Ensemble& after, double h) {
  const auto mo = increment_moments(before, after);
  const double n = static_cast<double>(before.states.size());
  CHECK(std::abs(mo.mean) < 3.0 * std::sqrt(2.0 * h / n));
  CHECK(std::abs(mo.var - 2.0 * h) < 3.0 * 2.0 * h * std::sqrt(2.0 / n));
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("euler update, noise zeroed") {
    std::vector<double> x{1.0}, g{1.0}, eta{0.0};
    euler_update(x, g, 0.0, 0.1, 1.0, eta);
    CHECK(x[0] == doctest::Approx(0.9));
    x = {1.0};
    euler_update(x, g, 1.0, 0.1, 1.0, eta);
    CHECK(x[0] == doctest::Approx(0.8));
    x = {1.0};
    eta = {1.0};
    euler_update(x, g, 0.0, 0.1, 0.5, eta);
    CHECK(x[0] == doctest::Approx(0.9 + std::sqrt(0.1)));
  }

  TEST_CASE("randomized midpoint update, noise zeroed") {
    const auto pot = half_square();
    std::vector<double> theta{1.0}, zeta(1), z{0.0};
    midpoint_update(pot, theta, 0.5, 0.1, 0.0, 0.0, z, z, zeta);
    CHECK(zeta[0] == doctest::Approx(0.95));
    CHECK(theta[0] == doctest::Approx(0.905));
  }

  TEST_CASE("penalized midpoint update, noise zeroed") {
    const auto pot = half_square();
    std::vector<double> theta{1.0}, zeta(1), z{0.0};
    midpoint_update(pot, theta, 0.5, 0.1, 1.0, 1.0, z, z, zeta);
    CHECK(zeta[0] == doctest::Approx(0.9));
    CHECK(theta[0] == doctest::Approx(0.82));
  }

  TEST_CASE("parallel midpoint update, noise zeroed") {
    const auto pot = half_square();
    std::vector<double> theta{1.0}, offsets{0.25, 0.75}, eta(3, 0.0);
    parallel_midpoint_update(pot, theta, offsets, 0.1, eta);
    CHECK(theta[0] == doctest::Approx(1.0 - 0.05 * (0.975 + 0.925)));
    CHECK(theta[0] == doctest::Approx(0.905));
  }

  TEST_CASE("parallel update with R = 1 equals the single midpoint update") {
    const auto pot = Potential::cubic(vec({0.3, -0.2}));
    const CounterRng rng(9);
    for (std::uint64_t i = 0; i < 50; ++i) {
      const double u = rng.uniform(i, 0, 0);
      std::vector<double> eta{rng.normal(i, 0, 0), rng.normal(i, 0, 1), rng.normal(i, 0, 2),
                              rng.normal(i, 0, 3)};
      std::vector<double> a{0.1, 0.2}, b = a, zeta(2);
      midpoint_update(pot, a, u, 0.01, 0.0, 0.0, std::span(eta).first(2), std::span(eta).last(2), zeta);
      std::vector<double> off{u};
      parallel_midpoint_update(pot, b, off, 0.01, eta);
      // same arithmetic up to floating-point contraction
      for (std::size_t d = 0; d < 2; ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-14));
    }
  }

  TEST_CASE("bridge accumulation matrix is the Cholesky factor of the Gram matrix") {
    const std::vector<double> offsets{0.2, 0.7, 1.0};
    Matrix L(3, 3);
    for (int j = 0; j < 3; ++j) {
      std::vector<double> eta(3, 0.0), out(3);
      eta[static_cast<std::size_t>(j)] = 1.0;
      bridge_increments(offsets, 1.0, 1, eta, out);
      for (int i = 0; i < 3; ++i) L(i, j) = out[static_cast<std::size_t>(i)];
    }
    Matrix gram(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) gram(i, j) = std::min(offsets[i], offsets[j]);
    const Matrix chol = Eigen::LLT<Matrix>(gram).matrixL();
    CHECK((L - chol).norm() < 1e-14);
  }

  TEST_CASE("bridge increments keep the original order") {
    // unsorted offsets: the Gram matrix still reads min(u_i, u_j) h
    const std::vector<double> offsets{0.7, 0.2, 1.0};
    const double h = 0.5;
    Matrix L(3, 3);
    for (int j = 0; j < 3; ++j) {
      std::vector<double> eta(3, 0.0), out(3);
      eta[static_cast<std::size_t>(j)] = 1.0;
      bridge_increments(offsets, h, 1, eta, out);
      for (int i = 0; i < 3; ++i) L(i, j) = out[static_cast<std::size_t>(i)];
    }
    const Matrix gram = L * L.transpose();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(gram(i, j) == doctest::Approx(std::min(offsets[i], offsets[j]) * h).epsilon(1e-14));
  }

  TEST_CASE("bridge time validation") {
    std::vector<double> eta(2, 0.0);
    const std::vector<double> outside{3.0, 4.0};
    CHECK_THROWS_AS(sample_bridge_increments(outside, 3.0, 0.1, 1, eta), std::invalid_argument);
    const std::vector<double> beyond{4.5, 4.0};
    CHECK_THROWS_AS(sample_bridge_increments(beyond, 3.0, 0.1, 1, eta), std::invalid_argument);
    const std::vector<double> last_not_end{3.5, 3.7};
    CHECK_THROWS_AS(sample_bridge_increments(last_not_end, 3.0, 0.1, 1, eta), std::invalid_argument);
    const std::vector<double> ok{3.5, 4.0};
    CHECK(sample_bridge_increments(ok, 3.0, 0.1, 1, eta).size() == 2);
  }

  TEST_CASE("bridge laws over 1e5 draws") {
    const CounterRng rng(77);
    const std::size_t n = 100000;
    const double h = 0.1, k = 5.0;
    SUBCASE("single time: one Wiener increment") {
      const std::vector<double> times{k + 1.0};
      double s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto xi = sample_bridge_increments(times, k, h, 1, rng, i, 0);
        s2 += xi[0] * xi[0];
      }
      CHECK(std::abs(s2 / n - h) < 3.0 * h * std::sqrt(2.0 / n));
    }
    SUBCASE("one midpoint at k + 0.3") {
      const std::vector<double> times{k + 0.3, k + 1.0};
      double c = 0.0, c2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto xi = sample_bridge_increments(times, k, h, 1, rng, i, 1);
        const double v = xi[0] * xi[1] / h;
        c += v;
        c2 += v * v;
      }
      const double mean = c / n, se = std::sqrt((c2 / n - mean * mean) / n);
      CHECK(std::abs(mean - 0.3) < 3.0 * se);
    }
    SUBCASE("Gram matrix of three times in two dimensions") {
      const std::vector<double> times{k + 0.7, k + 0.2, k + 1.0};
      const std::size_t p = 2;
      double s[3][3] = {}, s2[3][3] = {};
      for (std::size_t i = 0; i < n; ++i) {
        const auto xi = sample_bridge_increments(times, k, h, p, rng, i, 2);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) {
            double dot = 0.0;
            for (std::size_t d = 0; d < p; ++d) dot += xi[a * p + d] * xi[b * p + d];
            const double v = dot / (h * p);
            s[a][b] += v;
            s2[a][b] += v * v;
          }
      }
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          const double mean = s[a][b] / n;
          const double se = std::sqrt((s2[a][b] / n - mean * mean) / n);
          CHECK(std::abs(mean - (std::min(times[a], times[b]) - k)) < 4.0 * se);
        }
    }
  }

  TEST_CASE("flat potential gives Brownian steps for every variant") {
    const std::size_t n = 100000;
    const double h = 0.05;
    const auto pot = flat();
    const Ensemble e0 = Ensemble::dirac(n, vec({0.5}), 31);
    check_brownian(e0, step_euler(e0, pot, PenaltySchedule::zero(), h, 1.0), h);
    check_brownian(e0, step_rlmc(e0, pot, h), h);
    check_brownian(e0, step_rlmc_parallel(e0, pot, h, 3), h);
    check_brownian(e0, step_midpoint_pld(e0, pot, PenaltySchedule::zero(), h), h);
    // tempered: variance 2 tau h
    const auto tp = step_euler(e0, pot, PenaltySchedule::zero(), h, 0.25);
    const auto mo = increment_moments(e0, tp);
    CHECK(std::abs(mo.var - 0.5 * h) < 3.0 * 0.5 * h * std::sqrt(2.0 / n));
  }

  TEST_CASE("steppers advance time and step index") {
    const auto pot = half_square();
    const Ensemble e0 = Ensemble::dirac(10, vec({1.0}), 1);
    const auto e1 = step_rlmc(e0, pot, 0.1);
    CHECK(e1.t == doctest::Approx(0.1));
    CHECK(e1.step_index == 1);
    CHECK(e1.master_seed == 1);
    const auto e2 = step_euler(e1, pot, PenaltySchedule::zero(), 0.1, 1.0);
    CHECK(e2.t == doctest::Approx(0.2));
    CHECK(e2.step_index == 2);
  }

  TEST_CASE("zero-penalty midpoint step is bitwise the randomized midpoint step") {
    const auto pot = Potential::cubic(vec({0.5, 1.0}));
    Ensemble e = Ensemble::dirac(300, vec({0.0, 0.0}), 5);
    for (int k = 0; k < 5; ++k) {
      const auto a = step_rlmc(e, pot, 0.01);
      const auto b = step_midpoint_pld(e, pot, PenaltySchedule::zero(), 0.01);
      CHECK(a == b);
      e = a;
    }
  }

  TEST_CASE("parallel variant with R = 1 reproduces the randomized midpoint step") {
    const auto pot = half_square();
    const std::size_t n = 100000;
    Ensemble e = Ensemble::dirac(n, vec({1.0}), 8);
    const auto a = step_rlmc(e, pot, 0.1);
    const auto b = step_rlmc_parallel(e, pot, 0.1, 1);
    // same draws, so pathwise equal up to floating-point contraction
    for (std::size_t i = 0; i < n; i += 997) CHECK(a.states[i] == doctest::Approx(b.states[i]).epsilon(1e-13));
    // and in law against an independent stream
    Ensemble e2 = Ensemble::dirac(n, vec({1.0}), 9);
    const auto c = step_rlmc_parallel(e2, pot, 0.1, 1);
    const auto ma = increment_moments(e, a), mc = increment_moments(e2, c);
    CHECK(std::abs(ma.mean - mc.mean) < 4.0 * std::sqrt((ma.var + mc.var) / n));
    CHECK(std::abs(ma.var - mc.var) < 4.0 * std::sqrt(2.0 * (ma.var * ma.var + mc.var * mc.var) / n));
  }

  TEST_CASE("non-finite states raise DivergenceError") {
    const auto pot = Potential::cubic(vec({0.0}));
    Ensemble e = Ensemble::dirac(4, vec({1e200}), 1);
    CHECK_THROWS_AS(step_euler(e, pot, PenaltySchedule::zero(), 0.01, 1.0), DivergenceError);
  }

  TEST_CASE("validate enforces h (M + alpha(0)) < 1 and warns above 1/4") {
    const auto pot = half_square();
    SamplerConfig cfg;
    cfg.variant = Variant::pld_euler;
    cfg.n_paths = 10;
    cfg.h = 0.1;
    CHECK(validate(cfg, pot, PenaltySchedule::zero()).empty());
    cfg.h = 0.3;
    CHECK_FALSE(validate(cfg, pot, PenaltySchedule::zero()).empty());
    cfg.h = 1.0;
    CHECK_THROWS_AS(validate(cfg, pot, PenaltySchedule::zero()), std::invalid_argument);
    cfg.h = 0.7;
    CHECK_NOTHROW(validate(cfg, pot, PenaltySchedule::zero()));
    CHECK_THROWS_AS(validate(cfg, pot, PenaltySchedule::constant(0.5)), std::invalid_argument);
    cfg.h = 0.1;
    cfg.tau = 0.0;
    CHECK_THROWS_AS(validate(cfg, pot, PenaltySchedule::zero()), std::invalid_argument);
    cfg.tau = 1.0;
    cfg.R = 0;
    CHECK_THROWS_AS(validate(cfg, pot, PenaltySchedule::zero()), std::invalid_argument);
    cfg.R = 1;
    cfg.n_paths = 0;
    CHECK_THROWS_AS(validate(cfg, pot, PenaltySchedule::zero()), std::invalid_argument);
  }

  TEST_CASE("geometric checkpoints") {
    const auto c = geometric_checkpoints(100000, 20);
    CHECK(c.front() == 0);
    CHECK(c.back() == 100000);
    for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i] > c[i - 1]);
    CHECK(c.size() >= 80);
    CHECK(c.size() <= 105);
    CHECK(geometric_checkpoints(0) == std::vector<std::uint64_t>{0});
  }

  TEST_CASE("variant names round-trip") {
    for (auto v : {Variant::ld_euler, Variant::pld_euler, Variant::tpld_euler, Variant::rlmc,
                   Variant::rlmc_parallel, Variant::pld_midpoint}) {
      CHECK(variant_from_string(to_string(v)) == v);
    }
    CHECK_THROWS(variant_from_string("leapfrog"));
  }

  TEST_CASE("run_chain with K = 0 returns the initial ensemble") {
    SamplerConfig cfg;
    cfg.n_steps = 0;
    cfg.n_paths = 17;
    cfg.x0 = vec({0.25, -1.0});
    cfg.master_seed = 3;
    const auto snaps = run_chain(cfg, half_square(2), PenaltySchedule::zero());
    REQUIRE(snaps.size() == 1);
    CHECK(snaps[0].step == 0);
    CHECK(snaps[0].ensemble == Ensemble::dirac(17, vec({0.25, -1.0}), 3));
  }

  TEST_CASE("run_chain is deterministic across repeats and thread counts") {
    const auto pot = Potential::pseudo_huber(1.0, vec({0.5, 0.0}));
    const auto sched = make_pld_optimal(2.0);
    for (auto variant : {Variant::pld_euler, Variant::rlmc, Variant::rlmc_parallel, Variant::pld_midpoint}) {
      CAPTURE(to_string(variant));
      SamplerConfig cfg;
      cfg.variant = variant;
      cfg.h = 0.05;
      cfg.n_steps = 40;
      cfg.n_paths = 1001;  // a partial final block
      cfg.R = variant == Variant::rlmc_parallel ? 3 : 1;
      cfg.master_seed = 99;
      cfg.checkpoints = {0, 7, 40};
      cfg.threads = 1;
      const auto a = run_chain(cfg, pot, sched);
      const auto b = run_chain(cfg, pot, sched);
      cfg.threads = 4;
      const auto c = run_chain(cfg, pot, sched);
      REQUIRE(a.size() == 3);
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].step == cfg.checkpoints[i]);
        CHECK(a[i].ensemble == b[i].ensemble);
        CHECK(a[i].ensemble == c[i].ensemble);
      }
    }
  }

  TEST_CASE("run_chain reports the failing step") {
    SamplerConfig cfg;
    cfg.variant = Variant::ld_euler;
    cfg.h = 0.01;
    cfg.n_steps = 100;
    cfg.n_paths = 4;
    cfg.x0 = vec({1e3});
    try {
      run_chain(cfg, Potential::cubic(vec({0.0})), PenaltySchedule::zero());
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("step ") != std::string::npos);
    }
  }

  TEST_CASE("Euler LD on a standard gaussian matches the exact law of the chain") {
    // ld_euler, h = 0.01, K = 2000 from the origin: v_{k+1} = (1 - h)^2 v_k + 2h
    // per coordinate; the continuous law is the h -> 0 limit of this recursion.
    SamplerConfig cfg;
    cfg.variant = Variant::ld_euler;
    cfg.h = 0.01;
    cfg.n_steps = 2000;
    cfg.n_paths = 100000;
    cfg.master_seed = 1234;
    cfg.checkpoints = {2000};
    cfg.threads = 0;
    const auto snaps = run_chain(cfg, half_square(), PenaltySchedule::zero());
    double s2 = 0.0, s4 = 0.0;
    for (double x : snaps.back().ensemble.states) {
      s2 += x * x;
      s4 += x * x * x * x;
    }
    const double n = static_cast<double>(cfg.n_paths);
    const double m2 = s2 / n, se = std::sqrt((s4 / n - m2 * m2) / n);
    double v = 0.0;
    for (int k = 0; k < 2000; ++k) v = (1 - cfg.h) * (1 - cfg.h) * v + 2 * cfg.h;
    CHECK(std::abs(m2 - v) < 3.0 * se);
    const double grid[2] = {0.0, 20.0};
    const auto exact = propagate_gaussian_pld(Matrix::Identity(1, 1), PenaltySchedule::zero(), 1.0, grid,
                                              GaussianLaw::dirac(vec({0.0})));
    // Euler bias of the stationary variance: 2 / (2 - h) - 1 = O(h)
    CHECK(std::abs(v - exact.back().cov(0, 0)) < cfg.h);
    CHECK(std::abs(m2 - exact.back().cov(0, 0)) < 3.0 * se + cfg.h);
  }

  TEST_CASE("gradient flow on a quadratic matches the closed form") {
    const std::vector<double> out{0.5, 1.0};
    const auto traj = integrate_pgf(half_square(2), PenaltySchedule::zero(), 1.0, 1e-3, out, vec({1.0, 2.0}));
    REQUIRE(traj.size() == 2);
    CHECK(traj[1].t == doctest::Approx(1.0));
    CHECK(std::abs(traj[1].x(0) - std::exp(-1.0)) < 1e-8);
    CHECK(std::abs(traj[1].x(1) - 2.0 * std::exp(-1.0)) < 1e-8);
    CHECK(traj[1].distance == doctest::Approx(std::sqrt(5.0) * std::exp(-1.0)));
  }

  TEST_CASE("penalized gradient flow rate on the two-dimensional cubic") {
    const auto pot = Potential::separable_cubic(vec({1.0, 2.0}), vec({5.0, 6.0}));
    const auto ac = assumption_a_constants(pot);
    const auto sched = make_pgf_optimal(ac.D, 0.5);
    std::vector<double> out;
    for (int i = 0; i <= 40; ++i) out.push_back(std::pow(10.0, 2.0 + 0.05 * i));
    const auto traj = integrate_pgf(pot, sched, 1e4, 1e-2, out);
    std::vector<double> t, d;
    for (const auto& pt : traj) {
      t.push_back(pt.t);
      d.push_back(pt.distance);
    }
    const double slope = rate_fit(t, d);
    CHECK(slope >= -0.6);
    CHECK(slope <= -0.4);
  }

  TEST_CASE("penalized gradient flow tracks the penalized minimizer") {
    const auto pot = Potential::cubic(vec({1.0}));
    const auto sched = make_pld_optimal(2.0);
    const std::vector<double> out{1e2, 1e3, 1e4};
    const auto traj = integrate_pgf(pot, sched, 1e4, 1e-2, out);
    for (const auto& pt : traj) {
      CAPTURE(pt.t);
      const double target = lambda_cubic(sched.alpha(pt.t), 1.0);
      CHECK(std::abs(pt.x(0) - target) <= sched.alpha(pt.t));
    }
  }

  TEST_CASE("unpenalized gradient flow distance is non-increasing") {
    const auto pot = Potential::cubic(vec({1.0, -2.0}));
    std::vector<double> out;
    for (int i = 1; i <= 200; ++i) out.push_back(0.05 * i);
    const auto traj = integrate_pgf(pot, PenaltySchedule::zero(), 10.0, 1e-3, out);
    for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj[i].distance <= traj[i - 1].distance + 1e-12);
  }

  TEST_CASE("gradient flow divergence is reported") {
    const std::vector<double> out{1.0};
    CHECK_THROWS_AS(integrate_pgf(Potential::cubic(vec({0.0})), PenaltySchedule::zero(), 1.0, 0.5, out,
                                  vec({1e3})),
                    DivergenceError);
  }
}
