#include "plmc/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "plmc/quadrature.hpp"

namespace plmc {

void BoundCurve::validate() const {
  if (t.size() != values.size()) throw std::invalid_argument("BoundCurve: size mismatch");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw std::invalid_argument("BoundCurve: grid not strictly increasing");
    }
    if (!(std::isfinite(values[i]) && values[i] >= 0.0)) {
      throw std::invalid_argument("BoundCurve: values must be finite and >= 0");
    }
  }
}

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// int_0^t g(s) ds on dyadic pieces [0,1], [1,2], [2,4], ... so that integrands
// concentrated near s = t at large t are resolved.
template <class G>
double integrate_dyadic(G&& g, double t) {
  if (t <= 0.0) return 0.0;
  double total = 0.0;
  double a = 0.0;
  double b = std::min(t, 1.0);
  while (a < t) {
    total += integrate(g, a, b, 1e-10).value;
    a = b;
    b = std::min(t, 2.0 * b);
  }
  return total;
}

}  // namespace

double bound_theorem1(const PenaltySchedule& sched, double m, double mu2, double t) {
  require(mu2 > 0.0, "bound_theorem1: mu2 must be > 0");
  require(t >= 0.0, "bound_theorem1: t must be >= 0");
  require(m >= 0.0, "bound_theorem1: m must be >= 0");
  const PenaltySchedule s = sched.with_m(m);
  require(m + s.alpha(t) > 0.0, "bound_theorem1: need m + alpha(t) > 0");
  const double bt = s.beta(t);
  auto integrand = [&](double u) {
    const double dp = s.alpha_prime(u);
    if (dp > 0.0) {
      std::ostringstream msg;
      msg << "bound_theorem1: schedule increases at t=" << u << " (alpha' = " << dp << ")";
      throw std::invalid_argument(msg.str());
    }
    if (dp == 0.0) return 0.0;
    return -dp * std::exp(s.beta(u) - bt) / std::sqrt(m + s.alpha(u));
  };
  const double integral = integrate_dyadic(integrand, t);
  const double at = s.alpha(t);
  return std::sqrt(mu2) * std::exp(-bt) + 11.0 * mu2 * (integral + at / std::sqrt(m + at));
}

double bound_prop1(double A, double mu2, double t) {
  require(A > 0.0 && mu2 > 0.0, "bound_prop1: A and mu2 must be > 0");
  require(t >= 0.0, "bound_prop1: t must be >= 0");
  return (std::sqrt(A * mu2) + 11.0 * mu2 * (1.0 + std::log1p(2.0 * t / A))) /
         std::sqrt(A + 2.0 * t);
}

double bound_prop1_simplified(double mu2, double t) {
  require(mu2 > 0.0, "bound_prop1_simplified: mu2 must be > 0");
  require(t >= 0.0, "bound_prop1_simplified: t must be >= 0");
  return 10.0 * mu2 * (1.0 + std::log1p(t / mu2)) / std::sqrt(mu2 + t);
}

double bound_prop2_tpld(double tau, double mu2_tau, double t) {
  require(tau > 0.0, "bound_prop2_tpld: tau must be > 0 (the bound blows up as tau -> 0)");
  require(mu2_tau > 0.0, "bound_prop2_tpld: mu2_tau must be > 0");
  require(t >= 0.0, "bound_prop2_tpld: t must be >= 0");
  return 10.0 * mu2_tau * (1.0 + std::log1p(t / mu2_tau)) / std::sqrt(tau * (mu2_tau + t));
}

double bound_pgf(double D, double q, const PenaltySchedule& sched, double norm_xstar, double t) {
  require(sched.m() == 0.0, "bound_pgf: schedule must have m = 0");
  require(q >= 0.0 && q <= 1.0, "bound_pgf: q must lie in [0, 1]");
  require(D >= 0.0 && norm_xstar >= 0.0, "bound_pgf: D and ||x*|| must be >= 0");
  require(t >= 0.0, "bound_pgf: t must be >= 0");
  const double bt = sched.beta(t);
  auto integrand = [&](double u) {
    const double dp = sched.alpha_prime(u);
    if (dp == 0.0) return 0.0;
    const double a = sched.alpha(u);
    if (!(a > 0.0) && q > 0.0) {
      std::ostringstream msg;
      msg << "bound_pgf: alpha vanishes at t=" << u << " while q > 0";
      throw std::invalid_argument(msg.str());
    }
    return std::abs(dp) * std::pow(a, -q) * std::exp(sched.beta(u) - bt);
  };
  const double integral = integrate_dyadic(integrand, t);
  return norm_xstar * (std::exp(-bt) + D * integral + D * std::pow(sched.alpha(t), 1.0 - q));
}

double bound_pgf2(double A, double D, double q, double norm_xstar, double t) {
  require(A > 0.0 && D > 0.0, "bound_pgf2: A and D must be > 0");
  require(q >= 0.0 && q < 1.0, "bound_pgf2: q must lie in [0, 1)");
  require(t >= 0.0 && norm_xstar >= 0.0, "bound_pgf2: t and ||x*|| must be >= 0");
  return (std::pow(A, 1.0 - q) + D + D * std::log1p(t / A)) * norm_xstar /
         std::pow(t + A, 1.0 - q);
}

double bias_bound_lemma1(double m, double gamma, double gamma_t, double mu2_gamma) {
  require(gamma_t >= gamma, "bias_bound_lemma1: need gamma_t >= gamma");
  require(m + gamma >= 0.0 && m + gamma_t > 0.0, "bias_bound_lemma1: need m + gamma_t > 0");
  require(mu2_gamma >= 0.0, "bias_bound_lemma1: mu2 must be >= 0");
  return 11.0 * (gamma_t - gamma) * mu2_gamma / std::sqrt(m + gamma_t);
}

double lambda_cubic(double gamma, double r_star) {
  require(gamma >= 0.0 && r_star >= 0.0, "lambda_cubic: gamma and r* must be >= 0");
  if (gamma == 0.0) return 1.0;
  if (r_star == 0.0) return 0.0;  // x_gamma = 0 = x*
  // 1 - gamma / (gamma/2 + S) with S^2 = 3 gamma r* + gamma^2/4, rewritten
  // without the cancellation at large gamma.
  const double S = std::sqrt(3.0 * gamma * r_star + 0.25 * gamma * gamma);
  const double d = 0.5 * gamma + S;
  return 3.0 * gamma * r_star / (d * d);
}

double power_lambda_solve(double a, double gamma, double r_star) {
  require(a >= 2.0, "power_lambda_solve: a must be >= 2");
  require(gamma >= 0.0, "power_lambda_solve: gamma must be >= 0");
  require(r_star > 0.0, "power_lambda_solve: r* must be > 0");
  if (gamma == 0.0) return 0.0;
  const double s = gamma / (a * std::pow(r_star, a - 2.0));
  // phi(l) = l^{a-1} - s (1 - l) is increasing on [0, 1], phi(0) < 0 < phi(1).
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (std::pow(mid, a - 1.0) - s * (1.0 - mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

AssumptionAConstants assumption_a_constants(const AssumptionASpec& spec) {
  switch (spec.kind) {
    case AssumptionAKind::locally_strongly_convex:
      require(spec.m_star > 0.0, "assumption_a_constants: m* must be > 0");
      return {1.0 / spec.m_star, 0.0};
    case AssumptionAKind::cubic:
      require(spec.r_star > 0.0, "assumption_a_constants: ||x*|| must be > 0");
      return {1.0 / std::sqrt(3.0 * spec.r_star), 0.5};
    case AssumptionAKind::power: {
      require(spec.a >= 2.0, "assumption_a_constants: a must be >= 2");
      require(spec.r_star > 0.0, "assumption_a_constants: ||x*|| must be > 0");
      const double base = 1.0 / (spec.a * std::pow(spec.r_star, spec.a - 2.0));
      return {std::pow(base, 1.0 / (spec.a - 1.0)), (spec.a - 2.0) / (spec.a - 1.0)};
    }
    case AssumptionAKind::separable_cubic: {
      // Coordinatewise cubic bounds with penalty gamma / w_i, then summed in
      // quadrature: D ||x*|| = sqrt(sum_i |x*_i| / (3 w_i)).
      require(spec.weights.size() == spec.xstar.size() && spec.xstar.size() > 0,
              "assumption_a_constants: weights/x* size mismatch");
      require((spec.weights.array() > 0.0).all(), "assumption_a_constants: weights must be > 0");
      const double r = spec.xstar.norm();
      require(r > 0.0, "assumption_a_constants: ||x*|| must be > 0");
      const double s = (spec.xstar.array().abs() / (3.0 * spec.weights.array())).sum();
      return {std::sqrt(s) / r, 0.5};
    }
  }
  throw std::invalid_argument("assumption_a_constants: unknown kind");
}

AssumptionAConstants assumption_a_constants(const Potential& pot) {
  AssumptionASpec spec;
  const auto& params = pot.params();
  if (const auto* g = std::get_if<GaussianParams>(&params)) {
    (void)g;
    spec.kind = AssumptionAKind::locally_strongly_convex;
    spec.m_star = pot.m();
  } else if (const auto* c = std::get_if<CubicParams>(&params)) {
    spec.kind = AssumptionAKind::cubic;
    spec.r_star = c->xstar.norm();
  } else if (const auto* pw = std::get_if<PowerParams>(&params)) {
    spec.kind = AssumptionAKind::power;
    spec.a = pw->a;
    spec.r_star = pw->xstar.norm();
  } else if (const auto* ph = std::get_if<PseudoHuberParams>(&params)) {
    // Hessian eigenvalues of sqrt(|y|^2 + b^2) are >= b^2 / (|y|^2 + b^2)^{3/2};
    // all x_gamma lie in the ball of radius ||x*||, where |x - x*| <= 2||x*||.
    const double r = ph->xstar.norm();
    spec.kind = AssumptionAKind::locally_strongly_convex;
    spec.m_star = ph->b * ph->b / std::pow(4.0 * r * r + ph->b * ph->b, 1.5);
  } else if (const auto* sc = std::get_if<SeparableCubicParams>(&params)) {
    spec.kind = AssumptionAKind::separable_cubic;
    spec.weights = sc->weights;
    spec.xstar = sc->xstar;
  } else {
    throw std::invalid_argument("assumption_a_constants: no certified constants for " +
                                to_string(pot.kind()));
  }
  return assumption_a_constants(spec);
}

AssumptionAReport verify_assumption_a(const Potential& pot, double D, double q,
                                      std::span<const double> gamma_grid, double tol) {
  require(pot.minimizer().has_value(), "verify_assumption_a: potential needs a minimizer");
  require(gamma_grid.size() >= 2, "verify_assumption_a: need at least two gamma values");
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    require(gamma_grid[i] > 0.0, "verify_assumption_a: gamma grid must be positive");
    require(i == 0 || gamma_grid[i] > gamma_grid[i - 1],
            "verify_assumption_a: gamma grid must be increasing");
  }
  const double r = pot.minimizer()->norm();
  std::vector<Vector> xs;
  xs.reserve(gamma_grid.size());
  std::optional<Vector> start;
  for (double g : gamma_grid) {
    try {
      xs.push_back(penalized_minimizer(pot, g, 1e-12, 200, start));
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "verify_assumption_a: minimizer failed at gamma=" << g << ": " << e.what();
      throw ConvergenceError(msg.str());
    }
    start = xs.back();
  }
  AssumptionAReport rep;
  rep.worst_ratio = -1.0;
  for (std::size_t skip = 1; skip <= 2; ++skip) {
    for (std::size_t i = 0; i + skip < gamma_grid.size(); ++i) {
      const double g = gamma_grid[i], gt = gamma_grid[i + skip];
      const double lhs = (xs[i] - xs[i + skip]).norm();
      const double rhs = D * (gt - g) * r / std::pow(gt, q);
      ++rep.pairs;
      const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0);
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.gamma = g;
        rep.gamma_t = gt;
        rep.lhs = lhs;
        rep.rhs = rhs;
      }
      if (lhs > rhs + tol && rep.pass) {
        rep.pass = false;
        rep.counterexample = std::array<double, 4>{g, gt, lhs, rhs};
      }
    }
  }
  return rep;
}

BoundCurve tabulate(std::span<const double> t, const std::string& label,
                    const std::function<double(double)>& bound, BoundParams params) {
  BoundCurve c;
  c.t.assign(t.begin(), t.end());
  c.values.reserve(t.size());
  for (double x : t) c.values.push_back(bound(x));
  c.label = label;
  c.params = params;
  c.validate();
  return c;
}

}  // namespace plmc
