#include "plmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

namespace plmc {

SampleSet SampleSet::from_points(std::vector<double> points, std::size_t dim,
                                 SampleOrigin origin) {
  if (dim == 0 || points.empty() || points.size() % dim != 0) {
    throw std::invalid_argument("SampleSet: need n >= 1 points of dimension >= 1");
  }
  for (double v : points) {
    if (!std::isfinite(v)) throw std::invalid_argument("SampleSet: non-finite entry");
  }
  SampleSet s;
  s.n = points.size() / dim;
  s.dim = dim;
  s.points = std::move(points);
  s.origin = origin;
  return s;
}

SampleSet SampleSet::from_ensemble(const Ensemble& ens) {
  return from_points(ens.states, ens.dim, SampleOrigin::simulator);
}

SampleSet SampleSet::subsample(std::size_t count, std::size_t first) const {
  if (count == 0 || first >= n) throw std::invalid_argument("SampleSet::subsample: empty");
  const std::size_t stride = std::max<std::size_t>(1, (n - first) / count);
  std::vector<double> pts;
  for (std::size_t i = first, k = 0; i < n && k < count; i += stride, ++k) {
    const auto p = point(i);
    pts.insert(pts.end(), p.begin(), p.end());
  }
  return from_points(std::move(pts), dim, origin);
}

namespace {

void check_pair(const SampleSet& a, const SampleSet& b, const char* who) {
  if (a.n == 0 || b.n == 0) throw std::invalid_argument(std::string(who) + ": empty sample");
  if (a.n != b.n) throw std::invalid_argument(std::string(who) + ": sample sizes differ");
  if (a.dim != b.dim) throw std::invalid_argument(std::string(who) + ": dimensions differ");
}

}  // namespace

double w2_empirical_1d(const SampleSet& a, const SampleSet& b) {
  check_pair(a, b, "w2_empirical_1d");
  if (a.dim != 1) {
    throw std::invalid_argument("w2_empirical_1d: dim > 1, use w2_empirical_assignment");
  }
  std::vector<double> x = a.points, y = b.points;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double d = static_cast<long double>(x[i]) - y[i];
    acc += d * d;
  }
  return std::sqrt(static_cast<double>(acc / static_cast<long double>(x.size())));
}

std::vector<std::size_t> hungarian(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n) throw std::invalid_argument("hungarian: cost must be n x n");
  // Potentials u (rows), v (columns); 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double w2_empirical_assignment(const SampleSet& a, const SampleSet& b) {
  check_pair(a, b, "w2_empirical_assignment");
  const std::size_t n = a.n;
  if (n > 512) {
    throw std::invalid_argument(
        "w2_empirical_assignment: n > 512; subsample both sets (SampleSet::subsample)");
  }
  if (a.dim == 1) return w2_empirical_1d(a, b);
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = a.point(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto y = b.point(j);
      double c = 0.0;
      for (std::size_t d = 0; d < a.dim; ++d) c += (x[d] - y[d]) * (x[d] - y[d]);
      cost[i * n + j] = c;
    }
  }
  const auto match = hungarian(cost, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * n + match[i]];
  return std::sqrt(total / static_cast<double>(n));
}

TabulatedCdf::TabulatedCdf(const Potential& pot, double gamma, std::size_t cells)
    : pot_(pot), gamma_(gamma) {
  if (pot.dim() != 1) throw std::invalid_argument("sample_target_1d: potential must be 1-D");
  if (cells < 16) throw std::invalid_argument("TabulatedCdf: too few cells");
  const Support1d s = support_1d(pot, gamma);
  f_min_ = s.f_min;
  x_.resize(cells + 1);
  F_.assign(cells + 1, 0.0);
  dens_.resize(cells + 1);
  const double lo = -s.half_width, hi = s.half_width;
  for (std::size_t i = 0; i <= cells; ++i) {
    x_[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cells);
  }
  auto w = [this](double x) { return density(x); };
  for (std::size_t i = 0; i < cells; ++i) {
    F_[i + 1] = F_[i] + boost::math::quadrature::gauss<double, 15>::integrate(w, x_[i], x_[i + 1]);
  }
  z_ = F_.back();
  if (!(z_ > 0.0 && std::isfinite(z_))) throw std::runtime_error("TabulatedCdf: zero mass");
  for (double& f : F_) f /= z_;
  for (std::size_t i = 0; i <= cells; ++i) dens_[i] = density(x_[i]);
}

double TabulatedCdf::density(double x) const {
  const double f = pot_.value(std::span<const double>(&x, 1)) + 0.5 * gamma_ * x * x;
  return std::exp(-(f - f_min_)) / z_;
}

double TabulatedCdf::cdf(double x) const {
  if (x <= x_.front()) return 0.0;
  if (x >= x_.back()) return 1.0;
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
  // Cubic Hermite with the density as derivative.
  const double w = x_[i + 1] - x_[i];
  const double s = (x - x_[i]) / w;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * F_[i] + (s3 - 2 * s2 + s) * w * dens_[i] +
         (-2 * s3 + 3 * s2) * F_[i + 1] + (s3 - s2) * w * dens_[i + 1];
}

double TabulatedCdf::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("TabulatedCdf: u must be in (0, 1)");
  const auto it = std::upper_bound(F_.begin(), F_.end(), u);
  std::size_t i = static_cast<std::size_t>(it - F_.begin());
  i = std::clamp<std::size_t>(i, 1, F_.size() - 1) - 1;
  double lo = x_[i], hi = x_[i + 1];
  for (int k = 0; k < 60 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++k) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SampleSet sample_target_1d(const Potential& pot, double gamma, std::size_t n,
                           const CounterRng& rng, std::uint64_t stream) {
  if (n == 0) throw std::invalid_argument("sample_target_1d: n must be >= 1");
  if (pot.dim() != 1) {
    throw std::invalid_argument("sample_target_1d: potential must be one-dimensional");
  }
  const TabulatedCdf table(pot, gamma);
  std::vector<double> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = table.quantile(rng.uniform(stream, 0, static_cast<std::uint32_t>(i)));
  }
  return SampleSet::from_points(std::move(pts), 1, SampleOrigin::target_iid);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("loglog_slope: need >= 2 matching points");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) {
      throw std::invalid_argument("loglog_slope: values must be positive");
    }
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) throw std::invalid_argument("loglog_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / den;
}

double rate_fit(std::span<const double> t, std::span<const double> values, FitWindow window) {
  if (t.size() != values.size()) throw std::invalid_argument("rate_fit: size mismatch");
  const std::size_t last = window.last == 0 ? t.size() : window.last;
  if (last > t.size() || window.first >= last || last - window.first < 5) {
    throw std::invalid_argument("rate_fit: window needs at least 5 points");
  }
  return loglog_slope(t.subspan(window.first, last - window.first),
                      values.subspan(window.first, last - window.first));
}

double rate_fit_range(std::span<const double> t, std::span<const double> values, double t_lo,
                      double t_hi) {
  if (t.size() != values.size()) throw std::invalid_argument("rate_fit: size mismatch");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= t_lo && t[i] <= t_hi) {
      x.push_back(t[i]);
      y.push_back(values[i]);
    }
  }
  if (x.size() < 5) throw std::invalid_argument("rate_fit: window needs at least 5 points");
  return loglog_slope(x, y);
}

}  // namespace plmc
