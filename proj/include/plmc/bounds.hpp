#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plmc/potentials.hpp"
#include "plmc/schedules.hpp"

namespace plmc {

struct BoundParams {
  std::optional<double> m, mu2, A, D, q, tau, norm_xstar;
};

// A time grid with bound or measured values.
struct BoundCurve {
  std::vector<double> t;
  std::vector<double> values;
  std::string label;
  BoundParams params;

  // Throws unless t is strictly increasing and values are finite and >= 0.
  void validate() const;
};

// sqrt(mu2) e^{-beta(t)} + 11 mu2 [ int_0^t |alpha'(s)| e^{beta(s) - beta(t)}
// / sqrt(m + alpha(s)) ds + alpha(t) / sqrt(m + alpha(t)) ], with beta built
// from m (the schedule's own m is ignored).
double bound_theorem1(const PenaltySchedule& sched, double m, double mu2, double t);

// (sqrt(A mu2) + 11 mu2 (1 + log(1 + 2t/A))) / sqrt(A + 2t)
double bound_prop1(double A, double mu2, double t);
// 10 mu2 (1 + log(1 + t/mu2)) / sqrt(mu2 + t), the A = 2 mu2 form.
double bound_prop1_simplified(double mu2, double t);

// 10 mu2_tau (1 + log(1 + t/mu2_tau)) / sqrt(tau (mu2_tau + t))
double bound_prop2_tpld(double tau, double mu2_tau, double t);

// ||x*|| (e^{-beta(t)} + D int_0^t |alpha'| alpha^{-q} e^{beta(s)-beta(t)} ds
// + D alpha(t)^{1-q}). Requires sched.m() == 0.
double bound_pgf(double D, double q, const PenaltySchedule& sched, double norm_xstar, double t);

// (A^{1-q} + D + D log(1 + t/A)) ||x*|| / (t + A)^{1-q}
double bound_pgf2(double A, double D, double q, double norm_xstar, double t);

// 11 (gamma_t - gamma) mu2(pi_gamma) / sqrt(m + gamma_t)
double bias_bound_lemma1(double m, double gamma, double gamma_t, double mu2_gamma);

// Cubic f = ||x - x*||^3: x_gamma = lambda_gamma x*.
double lambda_cubic(double gamma, double r_star);

// Power f = ||x - x*||^a: lambda^{a-1} = s (1 - lambda), s = gamma / (a r*^{a-2});
// x_gamma = (1 - lambda) x* in this convention.
double power_lambda_solve(double a, double gamma, double r_star);

enum class AssumptionAKind { locally_strongly_convex, cubic, power, separable_cubic };

struct AssumptionASpec {
  AssumptionAKind kind = AssumptionAKind::cubic;
  double m_star = 0.0;  // locally_strongly_convex
  double r_star = 0.0;  // cubic, power
  double a = 2.0;       // power
  Vector weights;       // separable_cubic
  Vector xstar;         // separable_cubic
};

struct AssumptionAConstants {
  double D = 0.0;
  double q = 0.0;
};

AssumptionAConstants assumption_a_constants(const AssumptionASpec& spec);
// Picks the spec matching a catalog potential (gaussian and pseudo_huber use
// the locally strongly convex form on the ball of radius ||x*||).
AssumptionAConstants assumption_a_constants(const Potential& pot);

struct AssumptionAReport {
  bool pass = true;
  double worst_ratio = 0.0;  // max lhs / rhs
  double gamma = 0.0, gamma_t = 0.0;  // the worst pair
  double lhs = 0.0, rhs = 0.0;
  std::size_t pairs = 0;
  // First violated pair, if any.
  std::optional<std::array<double, 4>> counterexample;  // gamma, gamma_t, lhs, rhs
};

// Checks ||x_g - x_gt|| <= D (gt - g) ||x*|| / gt^q + tol over adjacent and
// skip-one pairs of the grid.
AssumptionAReport verify_assumption_a(const Potential& pot, double D, double q,
                                      std::span<const double> gamma_grid, double tol);

// Q(t) for each t, labelled.
BoundCurve tabulate(std::span<const double> t, const std::string& label,
                    const std::function<double(double)>& bound, BoundParams params = {});

}  // namespace plmc
