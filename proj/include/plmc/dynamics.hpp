#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plmc/potentials.hpp"
#include "plmc/random.hpp"
#include "plmc/schedules.hpp"

namespace plmc {

// Non-finite state after a step or a runaway trajectory.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// n_paths x dim states (row-major) at a common time. The randomness of every
// step is a function of (master_seed, path, step_index, draw) only.
struct Ensemble {
  std::size_t n_paths = 0;
  std::size_t dim = 0;
  std::vector<double> states;
  double t = 0.0;
  std::uint64_t step_index = 0;
  std::uint64_t master_seed = 0;

  static Ensemble dirac(std::size_t n_paths, const Vector& point,
                        std::uint64_t master_seed);

  std::span<double> path(std::size_t i) { return {states.data() + i * dim, dim}; }
  std::span<const double> path(std::size_t i) const {
    return {states.data() + i * dim, dim};
  }
  bool operator==(const Ensemble&) const = default;
};

enum class Variant { ld_euler, pld_euler, tpld_euler, rlmc, rlmc_parallel, pld_midpoint };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

// Which penalty the final update of the penalized midpoint step uses: alpha at
// the random midpoint time (default) or alpha at the step's start time.
enum class MidpointAlpha { midpoint_time, start_time };

struct StepOptions {
  unsigned threads = 1;
  MidpointAlpha midpoint_alpha = MidpointAlpha::midpoint_time;
};

struct SamplerConfig {
  Variant variant = Variant::ld_euler;
  double h = 0.01;
  std::uint64_t n_steps = 0;
  double tau = 1.0;
  int R = 1;
  std::size_t n_paths = 10000;
  std::uint64_t master_seed = 0;
  // Step indices at which run_chain snapshots. Empty: geometric default grid.
  std::vector<std::uint64_t> checkpoints;
  std::optional<Vector> x0;  // start point of every path; origin by default
  MidpointAlpha midpoint_alpha = MidpointAlpha::midpoint_time;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Throws std::invalid_argument for h <= 0, tau <= 0, R < 1, n_paths == 0, and
// for h (M + alpha(0)) >= 1. Returns a warning string when h (M + alpha(0))
// >= 1/4 (the regime the randomized-midpoint analysis assumes), else empty.
std::string validate(const SamplerConfig& cfg, const Potential& pot,
                     const PenaltySchedule& sched);

// Step indices 0, K and about per_decade log-spaced indices per decade of t.
std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n_steps,
                                                 int per_decade = 20);

// --- single-path update rules with explicit noise ---------------------------
// Used by the ensemble steppers; exposed for deterministic checks.

// x <- x - h (grad + alpha x) + sqrt(2 tau h) eta
void euler_update(std::span<double> x, std::span<const double> grad, double alpha,
                  double h, double tau, std::span<const double> eta);

// Randomized midpoint with frozen penalties alpha_start (midpoint drift) and
// alpha_mid (final drift). u in (0,1), eta1/eta2 standard normals.
// Returns zeta through `zeta`.
void midpoint_update(const Potential& pot, std::span<double> theta, double u,
                     double h, double alpha_start, double alpha_mid,
                     std::span<const double> eta1, std::span<const double> eta2,
                     std::span<double> zeta);

// R-point parallel midpoint from fixed offsets u_1..u_R in (0, 1): draws the
// R + 1 coupled increments from eta ((R + 1) * dim normals, see
// bridge_increments) and updates theta in place. R = 1 reproduces
// midpoint_update with zero penalty bit for bit.
void parallel_midpoint_update(const Potential& pot, std::span<double> theta,
                              std::span<const double> offsets, double h,
                              std::span<const double> eta);

// Coupled Wiener increments at offsets u_i in (0, 1] of a step of length h:
// cov(xi_i, xi_j) = min(u_i, u_j) h I. eta holds offsets.size() * dim standard
// normals; the j-th block drives the j-th smallest offset. out receives the
// increments in the original (unsorted) order.
void bridge_increments(std::span<const double> offsets, double h, std::size_t dim,
                       std::span<const double> eta, std::span<double> out);

// Same, with absolute times t^i in (k, k+1] and t^{R+1} = k+1.
std::vector<double> sample_bridge_increments(std::span<const double> times, double k,
                                             double h, std::size_t dim,
                                             std::span<const double> eta);
// Draws eta from the counter stream of (path, step).
std::vector<double> sample_bridge_increments(std::span<const double> times, double k,
                                             double h, std::size_t dim,
                                             const CounterRng& rng, std::uint64_t path,
                                             std::uint32_t step);

// --- ensemble steppers ------------------------------------------------------
// Each returns the advanced ensemble (t += h, step_index += 1).

Ensemble step_euler(const Ensemble& ens, const Potential& pot,
                    const PenaltySchedule& sched, double h, double tau,
                    const StepOptions& opt = {});
Ensemble step_rlmc(const Ensemble& ens, const Potential& pot, double h,
                   const StepOptions& opt = {});
Ensemble step_rlmc_parallel(const Ensemble& ens, const Potential& pot, double h,
                            int R, const StepOptions& opt = {});
Ensemble step_midpoint_pld(const Ensemble& ens, const Potential& pot,
                           const PenaltySchedule& sched, double h,
                           const StepOptions& opt = {});

// Advances the ensemble cfg.n_steps steps, calling on_checkpoint at every
// checkpoint step (including 0 and n_steps when listed). Errors carry the
// failing step index.
void run_chain(const SamplerConfig& cfg, const Potential& pot,
               const PenaltySchedule& sched,
               const std::function<void(const Ensemble&)>& on_checkpoint);

struct Snapshot {
  std::uint64_t step = 0;
  Ensemble ensemble;
};
std::vector<Snapshot> run_chain(const SamplerConfig& cfg, const Potential& pot,
                                const PenaltySchedule& sched);

// --- penalized gradient flow -------------------------------------------------

struct PgfPoint {
  double t = 0.0;
  Vector x;
  double distance = 0.0;  // ||x_t - x*||
};

// Classical RK4 on x' = -(grad f(x) + alpha(t) x) from x0 (origin by default),
// recording at the grid points nearest to output_times. Throws DivergenceError
// once the distance exceeds 1e6 (1 + ||x*||).
std::vector<PgfPoint> integrate_pgf(const Potential& pot, const PenaltySchedule& sched,
                                    double horizon, double dt,
                                    std::span<const double> output_times,
                                    std::optional<Vector> x0 = {});

}  // namespace plmc
