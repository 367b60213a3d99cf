#include "plmc/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "plmc/quadrature.hpp"

namespace plmc {

std::string to_string(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::gaussian: return "gaussian";
    case PotentialKind::cubic: return "cubic";
    case PotentialKind::power: return "power";
    case PotentialKind::pseudo_huber: return "pseudo_huber";
    case PotentialKind::separable_cubic: return "separable_cubic";
    case PotentialKind::custom: return "custom";
  }
  return "unknown";
}

void PotentialModel::hessian(std::span<const double> x,
                             Eigen::Ref<Matrix> out) const {
  const std::size_t p = dim();
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> gp(p), gm(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + step;
    gradient(xp, gp);
    xp[j] = x[j] - step;
    gradient(xp, gm);
    xp[j] = x[j];
    for (std::size_t i = 0; i < p; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (gp[i] - gm[i]) / (2.0 * step);
    }
  }
  Matrix sym = 0.5 * (out + out.transpose());
  out = sym;
}

void PotentialModel::gradient_batch(std::span<const double> xs,
                                    std::span<double> gs) const {
  const std::size_t p = dim();
  const std::size_t n = xs.size() / p;
  for (std::size_t i = 0; i < n; ++i) {
    gradient(xs.subspan(i * p, p), gs.subspan(i * p, p));
  }
}

namespace {

Eigen::Map<const Vector> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_finite(const Vector& v, const char* what) {
  require(v.allFinite(), std::string(what) + ": non-finite entries");
}

class GaussianModel final : public PotentialModel {
 public:
  explicit GaussianModel(const GaussianParams& params)
      : H_(params.H), mean_(params.mean) {}
  std::size_t dim() const override { return static_cast<std::size_t>(H_.rows()); }
  double value(std::span<const double> x) const override {
    const Vector y = as_vector(x) - mean_;
    return 0.5 * y.dot(H_ * y);
  }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    Eigen::Map<Vector>(g.data(), H_.rows()) = H_ * (as_vector(x) - mean_);
  }
  void hessian(std::span<const double>, Eigen::Ref<Matrix> out) const override {
    out = H_;
  }
  void gradient_batch(std::span<const double> xs,
                      std::span<double> gs) const override {
    const Eigen::Index p = H_.rows();
    const Eigen::Index n = static_cast<Eigen::Index>(xs.size()) / p;
    Eigen::Map<const Matrix> X(xs.data(), p, n);
    Eigen::Map<Matrix> G(gs.data(), p, n);
    G.noalias() = H_ * (X.colwise() - mean_);
  }

 private:
  Matrix H_;
  Vector mean_;
};

class CubicModel final : public PotentialModel {
 public:
  explicit CubicModel(Vector xstar) : xstar_(std::move(xstar)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(xstar_.size()); }
  double value(std::span<const double> x) const override {
    const double r = (as_vector(x) - xstar_).norm();
    return r * r * r;
  }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    const Vector y = as_vector(x) - xstar_;
    Eigen::Map<Vector>(g.data(), y.size()) = 3.0 * y.norm() * y;
  }
  void hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const override {
    const Vector y = as_vector(x) - xstar_;
    const double r = y.norm();
    out.setZero();
    if (r == 0.0) return;
    out.diagonal().setConstant(3.0 * r);
    out += (3.0 / r) * y * y.transpose();
  }

 private:
  Vector xstar_;
};

class PowerModel final : public PotentialModel {
 public:
  PowerModel(double a, Vector xstar) : a_(a), xstar_(std::move(xstar)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(xstar_.size()); }
  double value(std::span<const double> x) const override {
    return std::pow((as_vector(x) - xstar_).norm(), a_);
  }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    const Vector y = as_vector(x) - xstar_;
    const double r = y.norm();
    const double c = r == 0.0 ? 0.0 : a_ * std::pow(r, a_ - 2.0);
    Eigen::Map<Vector>(g.data(), y.size()) = c * y;
  }
  void hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const override {
    const Vector y = as_vector(x) - xstar_;
    const double r = y.norm();
    out.setZero();
    if (r == 0.0) {
      if (a_ == 2.0) out.diagonal().setConstant(2.0);
      return;
    }
    out.diagonal().setConstant(a_ * std::pow(r, a_ - 2.0));
    out += a_ * (a_ - 2.0) * std::pow(r, a_ - 4.0) * y * y.transpose();
  }

 private:
  double a_;
  Vector xstar_;
};

class PseudoHuberModel final : public PotentialModel {
 public:
  PseudoHuberModel(double b, Vector xstar) : b_(b), xstar_(std::move(xstar)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(xstar_.size()); }
  double value(std::span<const double> x) const override {
    const double r = (as_vector(x) - xstar_).norm();
    return std::sqrt(r * r + b_ * b_);
  }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    const Vector y = as_vector(x) - xstar_;
    Eigen::Map<Vector>(g.data(), y.size()) = y / std::sqrt(y.squaredNorm() + b_ * b_);
  }
  void hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const override {
    const Vector y = as_vector(x) - xstar_;
    const double s = std::sqrt(y.squaredNorm() + b_ * b_);
    out.setZero();
    out.diagonal().setConstant(1.0 / s);
    out -= y * y.transpose() / (s * s * s);
  }
  void gradient_batch(std::span<const double> xs,
                      std::span<double> gs) const override {
    if (xstar_.size() != 1) {
      PotentialModel::gradient_batch(xs, gs);
      return;
    }
    const double c = xstar_[0];
    const double b2 = b_ * b_;
    const std::size_t n = xs.size();
    const double* x = xs.data();
    double* g = gs.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double y = x[i] - c;
      g[i] = y / std::sqrt(y * y + b2);
    }
  }

 private:
  double b_;
  Vector xstar_;
};

class SeparableCubicModel final : public PotentialModel {
 public:
  SeparableCubicModel(Vector w, Vector xstar)
      : w_(std::move(w)), xstar_(std::move(xstar)) {}
  std::size_t dim() const override { return static_cast<std::size_t>(xstar_.size()); }
  double value(std::span<const double> x) const override {
    double s = 0.0;
    for (Eigen::Index i = 0; i < xstar_.size(); ++i) {
      const double y = std::abs(x[i] - xstar_[i]);
      s += w_[i] * y * y * y;
    }
    return s;
  }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    for (Eigen::Index i = 0; i < xstar_.size(); ++i) {
      const double y = x[i] - xstar_[i];
      g[i] = 3.0 * w_[i] * std::abs(y) * y;
    }
  }
  void hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const override {
    out.setZero();
    for (Eigen::Index i = 0; i < xstar_.size(); ++i) {
      out(i, i) = 6.0 * w_[i] * std::abs(x[i] - xstar_[i]);
    }
  }

 private:
  Vector w_;
  Vector xstar_;
};

class CustomModel final : public PotentialModel {
 public:
  explicit CustomModel(CustomParams p) : p_(std::move(p)) {}
  std::size_t dim() const override { return p_.dim; }
  double value(std::span<const double> x) const override { return p_.value(x); }
  void gradient(std::span<const double> x, std::span<double> g) const override {
    p_.gradient(x, g);
  }
  void hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const override {
    if (p_.hessian) {
      p_.hessian(x, out);
    } else {
      PotentialModel::hessian(x, out);
    }
  }

 private:
  CustomParams p_;
};

double ball_radius(double norm_xstar) { return 2.0 * (norm_xstar + 1.0); }

}  // namespace

Potential::Potential(PotentialParams params,
                     std::shared_ptr<const PotentialModel> model)
    : params_(std::move(params)), model_(std::move(model)) {
  dim_ = model_->dim();
}

Potential Potential::gaussian(Matrix H, std::optional<Vector> mean) {
  require(H.rows() > 0 && H.rows() == H.cols(), "gaussian: H must be square");
  require_finite(H.reshaped(), "gaussian: H");
  require((H - H.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * (1.0 + H.cwiseAbs().maxCoeff()),
          "gaussian: H must be symmetric");
  Vector mu = mean.value_or(Vector::Zero(H.rows()));
  require(mu.size() == H.rows(), "gaussian: mean dimension mismatch");
  require_finite(mu, "gaussian: mean");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  require(lo >= -1e-12 * std::max(1.0, hi), "gaussian: H must be positive semidefinite");
  require(hi > 0.0, "gaussian: H must be nonzero");
  GaussianParams params{H, mu};
  Potential pot(params, std::make_shared<GaussianModel>(params));
  pot.m_ = std::max(lo, 0.0);
  pot.M_ = hi;
  if (lo > 0.0) pot.minimizer_ = mu;
  return pot;
}

Potential Potential::cubic(Vector xstar) {
  require(xstar.size() > 0, "cubic: empty x*");
  require_finite(xstar, "cubic: x*");
  const double r = xstar.norm();
  Potential pot(CubicParams{xstar}, std::make_shared<CubicModel>(xstar));
  pot.m_ = 0.0;
  pot.M_ = 6.0 * (ball_radius(r) + r);
  pot.minimizer_ = xstar;
  return pot;
}

Potential Potential::power(double a, Vector xstar) {
  require(std::isfinite(a) && a >= 2.0, "power: exponent a must be >= 2");
  require(xstar.size() > 0, "power: empty x*");
  require_finite(xstar, "power: x*");
  const double r = xstar.norm();
  Potential pot(PowerParams{a, xstar}, std::make_shared<PowerModel>(a, xstar));
  pot.m_ = a == 2.0 ? 2.0 : 0.0;
  pot.M_ = a * (a - 1.0) * std::pow(ball_radius(r) + r, a - 2.0);
  pot.minimizer_ = xstar;
  return pot;
}

Potential Potential::pseudo_huber(double b, Vector xstar) {
  require(std::isfinite(b) && b > 0.0, "pseudo_huber: b must be positive");
  require(xstar.size() > 0, "pseudo_huber: empty x*");
  require_finite(xstar, "pseudo_huber: x*");
  Potential pot(PseudoHuberParams{b, xstar},
                std::make_shared<PseudoHuberModel>(b, xstar));
  pot.m_ = 0.0;
  pot.M_ = 1.0 / b;
  pot.minimizer_ = xstar;
  return pot;
}

Potential Potential::separable_cubic(Vector weights, Vector xstar) {
  require(xstar.size() > 0 && weights.size() == xstar.size(),
          "separable_cubic: weights and x* must have equal, nonzero length");
  require_finite(weights, "separable_cubic: weights");
  require_finite(xstar, "separable_cubic: x*");
  require(weights.minCoeff() > 0.0, "separable_cubic: weights must be positive");
  const double R = ball_radius(xstar.norm());
  double M = 0.0;
  for (Eigen::Index i = 0; i < xstar.size(); ++i) {
    M = std::max(M, 6.0 * weights[i] * (R + std::abs(xstar[i])));
  }
  Potential pot(SeparableCubicParams{weights, xstar},
                std::make_shared<SeparableCubicModel>(weights, xstar));
  pot.m_ = 0.0;
  pot.M_ = M;
  pot.minimizer_ = xstar;
  return pot;
}

Potential Potential::custom(CustomParams params) {
  require(params.dim > 0, "custom: dimension must be positive");
  require(static_cast<bool>(params.value) && static_cast<bool>(params.gradient),
          "custom: value and gradient are required");
  require(params.m >= 0.0 && params.M > 0.0 && params.m <= params.M,
          "custom: need 0 <= m <= M, M > 0");
  if (params.minimizer) {
    require(static_cast<std::size_t>(params.minimizer->size()) == params.dim,
            "custom: minimizer dimension mismatch");
  }
  const double m = params.m, M = params.M;
  auto minimizer = params.minimizer;
  auto model = std::make_shared<CustomModel>(params);
  Potential pot(std::move(params), std::move(model));
  pot.m_ = m;
  pot.M_ = M;
  pot.minimizer_ = std::move(minimizer);
  return pot;
}

PotentialKind Potential::kind() const {
  return static_cast<PotentialKind>(params_.index());
}

double Potential::lipschitz_radius() const {
  return minimizer_ ? ball_radius(minimizer_->norm())
                    : std::numeric_limits<double>::infinity();
}

double Potential::value(std::span<const double> x) const {
  require(x.size() == dim_, "value: dimension mismatch");
  return model_->value(x);
}

void Potential::gradient(std::span<const double> x, std::span<double> g) const {
  require(x.size() == dim_ && g.size() == dim_, "gradient: dimension mismatch");
  model_->gradient(x, g);
}

void Potential::hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const {
  require(x.size() == dim_, "hessian: dimension mismatch");
  model_->hessian(x, out);
}

void Potential::gradient_batch(std::span<const double> xs,
                               std::span<double> gs) const {
  require(xs.size() % dim_ == 0 && gs.size() >= xs.size(),
          "gradient_batch: dimension mismatch");
  model_->gradient_batch(xs, gs.first(xs.size()));
}

double Potential::value(const Vector& x) const {
  require_finite(x, "value");
  return value(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

Vector Potential::gradient(const Vector& x) const {
  require_finite(x, "gradient");
  Vector g(x.size());
  gradient(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
           std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
  return g;
}

Matrix Potential::hessian(const Vector& x) const {
  require_finite(x, "hessian");
  Matrix out(x.size(), x.size());
  hessian(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), out);
  return out;
}

double PenalizedPotential::value(const Vector& x) const {
  return base.value(x) + 0.5 * gamma * x.squaredNorm();
}

Vector PenalizedPotential::gradient(const Vector& x) const {
  return base.gradient(x) + gamma * x;
}

Matrix PenalizedPotential::hessian(const Vector& x) const {
  Matrix h = base.hessian(x);
  h.diagonal().array() += gamma;
  return h;
}

Vector grad(const Potential& pot, const Vector& x) { return pot.gradient(x); }

Vector penalized_grad(const Potential& pot, double gamma, const Vector& x) {
  require(std::isfinite(gamma) && gamma >= 0.0, "penalized_grad: gamma must be >= 0");
  return PenalizedPotential{pot, gamma}.gradient(x);
}

Vector penalized_minimizer(const Potential& pot, double gamma, double tol,
                           int max_iterations, std::optional<Vector> start) {
  require(std::isfinite(gamma) && gamma > 0.0,
          "penalized_minimizer: gamma must be positive");
  require(tol > 0.0, "penalized_minimizer: tol must be positive");
  const PenalizedPotential fg{pot, gamma};
  Vector x = start.value_or(Vector::Zero(static_cast<Eigen::Index>(pot.dim())));
  require(static_cast<std::size_t>(x.size()) == pot.dim(),
          "penalized_minimizer: start dimension mismatch");
  constexpr double kEps = std::numeric_limits<double>::epsilon();

  Vector g = fg.gradient(x);
  double fx = fg.value(x);
  for (int it = 0; it < max_iterations; ++it) {
    const double gnorm = g.norm();
    if (gnorm <= tol) return x;

    Vector direction;
    Eigen::LDLT<Matrix> ldlt(fg.hessian(x));
    if (ldlt.info() == Eigen::Success) {
      direction = -ldlt.solve(g);
    }
    bool newton = direction.size() == x.size() && direction.allFinite() &&
                  direction.dot(g) < 0.0;
    if (!newton) direction = -g / fg.M();

    // Near the optimum f_gamma differences drown in rounding, so a step that
    // leaves f_gamma unchanged up to a few ulps but shrinks the gradient is
    // also accepted.
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double step = 1.0;
      for (int halving = 0; halving < 60; ++halving, step *= 0.5) {
        const Vector trial = x + step * direction;
        const double ft = fg.value(trial);
        if (!std::isfinite(ft)) continue;
        const Vector gt = fg.gradient(trial);
        if (ft < fx || (ft <= fx + 8.0 * kEps * (1.0 + std::abs(fx)) &&
                        gt.norm() < gnorm)) {
          x = trial;
          fx = ft;
          g = gt;
          accepted = true;
          break;
        }
      }
      if (!accepted && newton) {
        direction = -g / fg.M();
        newton = false;
      } else {
        break;
      }
    }
    if (!accepted) {
      std::ostringstream msg;
      msg << "penalized_minimizer: line search failed at iteration " << it
          << " (gamma=" << gamma << ", |grad|=" << gnorm << ", tol=" << tol << ")";
      throw ConvergenceError(msg.str());
    }
  }
  if (g.norm() <= tol) return x;
  std::ostringstream msg;
  msg << "penalized_minimizer: no convergence after " << max_iterations
      << " iterations (gamma=" << gamma << ", |grad|=" << g.norm()
      << ", tol=" << tol << ")";
  throw ConvergenceError(msg.str());
}

Support1d support_1d(const Potential& pot, double gamma, double tail_gap) {
  require(pot.dim() == 1, "support_1d: potential must be one-dimensional");
  require(gamma >= 0.0, "support_1d: gamma must be >= 0");
  double mode = 0.0;
  if (gamma > 0.0) {
    mode = penalized_minimizer(pot, gamma, 1e-12)[0];
  } else if (pot.minimizer()) {
    mode = (*pot.minimizer())[0];
  } else {
    throw std::invalid_argument(
        "support_1d: gamma = 0 requires a potential with a known minimizer");
  }
  auto fg = [&](double x) { return pot.value(std::span<const double>(&x, 1)) + 0.5 * gamma * x * x; };
  const double f_min = fg(mode);
  auto gap = [&](double L) { return std::min(fg(L), fg(-L)) - f_min; };

  double lo = std::abs(mode);
  double hi = std::max(1.0, 2.0 * lo);
  while (gap(hi) < tail_gap) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw std::runtime_error("support_1d: density tail does not decay");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) >= tail_gap ? hi : lo) = mid;
  }
  return {mode, f_min, hi};
}

namespace {

double gaussian_moment(const GaussianParams& g, double gamma, int k) {
  const Eigen::Index p = g.H.rows();
  Matrix precision = g.H;
  precision.diagonal().array() += gamma;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(precision);
  require(eig.eigenvalues().minCoeff() > 0.0,
          "target_moment: H + gamma I must be positive definite");
  const Matrix cov = eig.eigenvectors() *
                     eig.eigenvalues().cwiseInverse().asDiagonal() *
                     eig.eigenvectors().transpose();
  const Vector mean = cov * (g.H * g.mean);
  const double m2 = cov.trace() + mean.squaredNorm();
  if (k == 2) return m2;
  (void)p;
  return m2 * m2 + 2.0 * (cov * cov).trace() + 4.0 * mean.dot(cov * mean);
}

}  // namespace

double target_moment(const Potential& pot, double gamma, int k) {
  require(k == 2 || k == 4, "target_moment: k must be 2 or 4");
  require(std::isfinite(gamma) && gamma >= 0.0, "target_moment: gamma must be >= 0");
  if (const auto* g = std::get_if<GaussianParams>(&pot.params())) {
    return gaussian_moment(*g, gamma, k);
  }
  if (pot.dim() != 1) {
    throw std::invalid_argument(
        "target_moment: quadrature only supports one-dimensional non-Gaussian targets");
  }
  const Support1d s = support_1d(pot, gamma);
  auto weight = [&](double x) {
    return std::exp(-(pot.value(std::span<const double>(&x, 1)) +
                      0.5 * gamma * x * x - s.f_min));
  };
  auto both = [&](auto&& f) {
    return integrate(f, -s.half_width, s.mode, 1e-13).value +
           integrate(f, s.mode, s.half_width, 1e-13).value;
  };
  const double z = both(weight);
  const double num = both([&](double x) { return std::pow(x * x, k / 2) * weight(x); });
  return num / z;
}

}  // namespace plmc
