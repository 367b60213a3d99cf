#include "plmc/exactlaw.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plmc {

GaussianLaw GaussianLaw::dirac(const Vector& point) {
  return {point, Matrix::Zero(point.size(), point.size())};
}

void GaussianLaw::validate() const {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size()) {
    throw std::invalid_argument("GaussianLaw: mean/cov shape mismatch");
  }
  if (!mean.allFinite() || !cov.allFinite()) {
    throw std::invalid_argument("GaussianLaw: non-finite entries");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("GaussianLaw: covariance not symmetric");
  }
  if (cov.size() > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw std::invalid_argument("GaussianLaw: covariance not positive semidefinite");
    }
  }
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> spd_eigen(const Matrix& H, const char* who) {
  if (H.rows() != H.cols() || H.rows() == 0) {
    throw std::invalid_argument(std::string(who) + ": H must be square and non-empty");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, H.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(who) + ": H must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) {
    throw std::invalid_argument(std::string(who) + ": H must be positive definite");
  }
  return eig;
}

}  // namespace

GaussianLaw gaussian_target(const Matrix& H, const Vector& mu, double gamma) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gaussian_target: gamma must be >= 0");
  if (mu.size() != H.rows()) throw std::invalid_argument("gaussian_target: mean dimension");
  const auto eig = spd_eigen(H, "gaussian_target");
  const Matrix& Q = eig.eigenvectors();
  const Vector inv = (eig.eigenvalues().array() + gamma).inverse();
  GaussianLaw law;
  law.cov = Q * inv.asDiagonal() * Q.transpose();
  law.cov = 0.5 * (law.cov + law.cov.transpose());
  law.mean = law.cov * (H * mu);
  return law;
}

std::vector<GaussianLaw> propagate_gaussian_pld(const Matrix& H, const PenaltySchedule& sched,
                                                double tau, std::span<const double> t_grid,
                                                const GaussianLaw& init, const Vector* mu) {
  if (!(tau > 0.0)) throw std::invalid_argument("propagate_gaussian_pld: tau must be > 0");
  const auto eig = spd_eigen(H, "propagate_gaussian_pld");
  init.validate();
  const Eigen::Index p = H.rows();
  if (init.mean.size() != p) throw std::invalid_argument("propagate_gaussian_pld: init dimension");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] >= 0.0) || (i > 0 && !(t_grid[i] > t_grid[i - 1]))) {
      throw std::invalid_argument("propagate_gaussian_pld: t_grid must be increasing from 0");
    }
  }
  const Matrix& Q = eig.eigenvectors();
  const Vector& lam = eig.eigenvalues();
  // Drift -(Lambda + alpha) m + Q^T H mu in the eigenbasis.
  const Vector force = mu ? Vector(Q.transpose() * (H * *mu)) : Vector::Zero(p);

  Vector m = Q.transpose() * init.mean;
  Matrix S = Q.transpose() * init.cov * Q;
  Matrix lsum(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) lsum(i, j) = lam[i] + lam[j];

  auto dm = [&](double a, const Vector& x) -> Vector {
    return force - (lam.array() + a).matrix().cwiseProduct(x);
  };
  auto dS = [&](double a, const Matrix& X) -> Matrix {
    Matrix d = -((lsum.array() + 2.0 * a) * X.array()).matrix();
    d.diagonal().array() += 2.0 * tau;
    return d;
  };

  std::vector<GaussianLaw> out;
  out.reserve(t_grid.size());
  double t = 0.0;
  for (double target : t_grid) {
    const double span = target - t;
    const auto n = static_cast<long long>(std::ceil(span / 1e-3 - 1e-9));
    if (n > 0) {
      const double dt = span / static_cast<double>(n);
      for (long long k = 0; k < n; ++k) {
        const double s = t + static_cast<double>(k) * dt;
        const double a0 = sched.alpha(s), a1 = sched.alpha(s + 0.5 * dt),
                     a2 = sched.alpha(s + dt);
        const Vector k1 = dm(a0, m);
        const Vector k2 = dm(a1, m + 0.5 * dt * k1);
        const Vector k3 = dm(a1, m + 0.5 * dt * k2);
        const Vector k4 = dm(a2, m + dt * k3);
        m += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const Matrix c1 = dS(a0, S);
        const Matrix c2 = dS(a1, S + 0.5 * dt * c1);
        const Matrix c3 = dS(a1, S + 0.5 * dt * c2);
        const Matrix c4 = dS(a2, S + dt * c3);
        S += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
      }
    }
    t = target;
    GaussianLaw law;
    law.mean = Q * m;
    law.cov = Q * S * Q.transpose();
    law.cov = 0.5 * (law.cov + law.cov.transpose());
    out.push_back(std::move(law));
  }
  return out;
}

Matrix psd_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  const Vector r = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * r.asDiagonal() * eig.eigenvectors().transpose();
}

double w2_gaussian(const GaussianLaw& a, const GaussianLaw& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows() ||
      a.cov.rows() != a.mean.size()) {
    throw std::invalid_argument("w2_gaussian: dimension mismatch");
  }
  if (a.mean == b.mean && a.cov == b.cov) return 0.0;  // the trace form only reaches sqrt(eps)
  const double shift = (a.mean - b.mean).squaredNorm();
  const auto is_diag = [](const Matrix& S) {
    return (S - Matrix(S.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  };
  if (is_diag(a.cov) && is_diag(b.cov)) {
    // Per-coordinate |sqrt(va) - sqrt(vb)| without cancellation.
    double acc = shift;
    for (Eigen::Index i = 0; i < a.cov.rows(); ++i) {
      const double va = std::max(0.0, a.cov(i, i)), vb = std::max(0.0, b.cov(i, i));
      const double den = std::sqrt(va) + std::sqrt(vb);
      if (den > 0.0) {
        const double d = (va - vb) / den;
        acc += d * d;
      }
    }
    return std::sqrt(acc);
  }
  const Matrix rb = psd_sqrt(b.cov);
  Matrix mid = rb * a.cov * rb;
  mid = 0.5 * (mid + mid.transpose());
  const double cross = psd_sqrt(mid).trace();
  const double tr = a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::sqrt(std::max(0.0, shift + tr));
}

}  // namespace plmc
