#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plmc/potentials.hpp"

namespace plmc {

struct CheckReport {
  std::string name;
  bool pass = true;
  nlohmann::json measured = nlohmann::json::object();
  nlohmann::json tolerances = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  double wall_time_s = 0.0;
  std::string error_budget;  // how statistical tolerances were set
  // First violated comparison: inputs and both sides.
  nlohmann::json counterexample = nullptr;

  nlohmann::json to_json() const;
};

// Finite differences of mu2(pi_gamma) (step 1e-4; one-sided at gamma < 1e-4)
// against (mu2^2 - mu4) / 2 at each grid point. Needs >= 2 grid values.
CheckReport check_mu2_derivative(const Potential& pot, std::span<const double> gamma_grid,
                                 double tol = 1e-4);

// Scalar family N(0, 1/(m + gamma)): exact W2 versus bias_bound_lemma1.
CheckReport check_lemma1_gaussian(std::span<const double> m_grid,
                                  std::span<const std::pair<double, double>> gamma_pairs);

// Empirical law of the midpoint noise pair (xi', xi) at each fixed u, the
// independence of xi' and xi - xi', and the Gram matrix of three bridge
// increments, each against theory at 4 standard errors.
CheckReport check_coupling_laws(double h, std::span<const double> u_grid, std::size_t n_draws,
                                std::uint64_t seed);

// Stationary error of the randomized midpoint chain and of Euler LMC on the
// diagonal Gaussian f(x) = sum_i lambda_i x_i^2 / 2. Each of n paths starts
// from an exact draw of the target; a reference exact diffusion is driven by
// the same Wiener increments, so its states are exact target samples coupled
// to the chains. The error at step size h is the root mean square, over
// `snapshots` states spaced `spacing` apart after `burn_in`, of the assignment
// W2 between the n chain states and the n reference states. Passes when RLMC
// is below LMC at every h and the RLMC log-log slope is >= min_slope.
struct MidpointOrderResult {
  std::vector<double> h, rlmc, lmc;
  double rlmc_slope = 0.0, lmc_slope = 0.0;
};
MidpointOrderResult midpoint_order_errors(const Vector& lambda, std::span<const double> hs,
                                          std::size_t n, std::size_t snapshots, double spacing,
                                          double burn_in, std::uint64_t seed);
CheckReport check_rlmc_order(const Vector& lambda, std::span<const double> hs, std::size_t n,
                             std::size_t snapshots, double spacing, double burn_in,
                             std::uint64_t seed, double min_slope = 1.0);

struct RateCheck {
  std::string name;
  std::vector<double> t;
  std::vector<double> values;
  double t_lo = 0.0, t_hi = 0.0;
  double slope_lo = 0.0, slope_hi = 0.0;
};

// Slope fits (>= 5 points in each window) against the declared intervals.
CheckReport rate_suite(std::span<const RateCheck> checks);

// Canned rate checks: synthetic 1/sqrt(t), the log(t)/sqrt(t) form of the PLD bound
// and the penalized gradient flow on the two-dimensional cubic.
std::vector<RateCheck> default_rate_checks();

std::vector<std::string> suite_names();
// "lemmas", "coupling", "rates", "assumption_a" or "all".
std::vector<CheckReport> run_suite(const std::string& name, std::uint64_t seed = 1);

nlohmann::json report_json(std::span<const CheckReport> reports);

}  // namespace plmc
