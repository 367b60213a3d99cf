#pragma once

#include <span>
#include <vector>

#include "plmc/potentials.hpp"
#include "plmc/schedules.hpp"

namespace plmc {

struct GaussianLaw {
  Vector mean;
  Matrix cov;

  static GaussianLaw dirac(const Vector& point);
  // Throws unless cov is square, matches mean, symmetric within 1e-12 and has
  // no eigenvalue below -1e-12.
  void validate() const;
};

// pi_gamma for f(x) = (x - mu)^T H (x - mu) / 2: N((H + gamma I)^{-1} H mu,
// (H + gamma I)^{-1}).
GaussianLaw gaussian_target(const Matrix& H, const Vector& mu, double gamma = 0.0);

// Law of dX = -(H (X - mu) + alpha(t) X) dt + sqrt(2 tau) dW at the times of
// t_grid, starting from init at t = 0. Works in the eigenbasis of H and
// integrates the entrywise moment ODEs with RK4 (dt <= 1e-3).
std::vector<GaussianLaw> propagate_gaussian_pld(const Matrix& H, const PenaltySchedule& sched,
                                                double tau, std::span<const double> t_grid,
                                                const GaussianLaw& init,
                                                const Vector* mu = nullptr);

// Bures-Wasserstein distance between two Gaussians.
double w2_gaussian(const GaussianLaw& a, const GaussianLaw& b);

// Symmetric PSD square root (negative eigenvalues clamped to 0).
Matrix psd_sqrt(const Matrix& S);

}  // namespace plmc
