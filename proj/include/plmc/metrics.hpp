#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "plmc/dynamics.hpp"
#include "plmc/potentials.hpp"
#include "plmc/random.hpp"

namespace plmc {

enum class SampleOrigin { simulator, target_iid };

// n points of dimension dim, row-major.
struct SampleSet {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> points;
  SampleOrigin origin = SampleOrigin::simulator;

  static SampleSet from_points(std::vector<double> points, std::size_t dim,
                               SampleOrigin origin);
  static SampleSet from_ensemble(const Ensemble& ens);
  // Rows first, first + stride, ... (at most count of them).
  SampleSet subsample(std::size_t count, std::size_t first = 0) const;
  std::span<const double> point(std::size_t i) const { return {points.data() + i * dim, dim}; }
};

// Exact W2 between two equal-size 1-D empirical measures (sorted matching).
double w2_empirical_1d(const SampleSet& a, const SampleSet& b);

// Exact W2 between two equal-size empirical measures by optimal assignment on
// squared Euclidean costs. n <= 512.
double w2_empirical_assignment(const SampleSet& a, const SampleSet& b);

// Optimal assignment: row i is matched to column result[i]. cost is n x n
// row-major.
std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n);

// Inverse CDF of the 1-D density proportional to exp(-f(x) - gamma x^2 / 2),
// tabulated on the truncation interval of target_moment.
class TabulatedCdf {
 public:
  TabulatedCdf(const Potential& pot, double gamma, std::size_t cells = 8192);
  double cdf(double x) const;
  double quantile(double u) const;
  double lower() const { return x_.front(); }
  double upper() const { return x_.back(); }

 private:
  double density(double x) const;  // normalized
  Potential pot_;
  double gamma_ = 0.0;
  double f_min_ = 0.0;
  double z_ = 1.0;
  std::vector<double> x_, F_, dens_;
};

// n iid draws from pi_gamma (1-D) by inverse CDF; uniforms come from the
// counter stream of rng with path index stream, step 0, draws 0..n-1.
SampleSet sample_target_1d(const Potential& pot, double gamma, std::size_t n,
                           const CounterRng& rng, std::uint64_t stream = 0);

struct FitWindow {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive; 0 means end of grid
};

// Least-squares slope of log(values) vs log(t) over the window (>= 5 points).
double rate_fit(std::span<const double> t, std::span<const double> values,
                FitWindow window = {});
// Same, restricted to t in [t_lo, t_hi].
double rate_fit_range(std::span<const double> t, std::span<const double> values,
                      double t_lo, double t_hi);
// Least-squares log-log slope with no minimum point count (>= 2).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace plmc
