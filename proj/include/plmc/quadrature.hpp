#pragma once

#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace plmc {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // Kronrod error estimate
};

// Adaptive 15-point Gauss-Kronrod on [a, b]. Recursion depth 15 caps the cost
// at about 5e5 integrand evaluations.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double rel_tol = 1e-10,
                           unsigned max_depth = 15) {
  if (!(std::isfinite(a) && std::isfinite(b))) {
    throw std::invalid_argument("integrate: bounds must be finite");
  }
  if (a == b) return {};
  QuadratureResult r;
  double l1 = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, max_depth, rel_tol, &r.error, &l1);
  if (!std::isfinite(r.value)) {
    throw std::runtime_error("integrate: non-finite integral");
  }
  return r;
}

}  // namespace plmc
