#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Dense>

namespace plmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised when an iterative solver gives up. Never returns a partial answer.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// f(x) = (x - mean)^T H (x - mean) / 2
struct GaussianParams {
  Matrix H;
  Vector mean;
};
// f(x) = ||x - x*||^3
struct CubicParams {
  Vector xstar;
};
// f(x) = ||x - x*||^a, a >= 2
struct PowerParams {
  double a = 2.0;
  Vector xstar;
};
// f(x) = sqrt(||x - x*||^2 + b^2)
struct PseudoHuberParams {
  double b = 1.0;
  Vector xstar;
};
// f(x) = sum_i w_i |x_i - x*_i|^3
struct SeparableCubicParams {
  Vector weights;
  Vector xstar;
};
// User-supplied f and gradient. Hessian optional (finite differences of the
// gradient otherwise).
struct CustomParams {
  std::size_t dim = 1;
  double m = 0.0;
  double M = 1.0;
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  std::function<void(std::span<const double>, Eigen::Ref<Matrix>)> hessian;
  std::optional<Vector> minimizer;
  std::string name = "custom";
};

using PotentialParams =
    std::variant<GaussianParams, CubicParams, PowerParams, PseudoHuberParams,
                 SeparableCubicParams, CustomParams>;

enum class PotentialKind {
  gaussian,
  cubic,
  power,
  pseudo_huber,
  separable_cubic,
  custom
};

std::string to_string(PotentialKind kind);

class PotentialModel;

// A smooth convex potential f with its convexity constants (m, M).
//
// Cheap to copy; the model is shared and immutable. For the catalog kinds that
// are not globally gradient-Lipschitz (cubic, power with a > 2, separable
// cubic) M is the Lipschitz constant of the gradient over the ball of radius
// 2(||x*|| + 1) centred at the origin.
class Potential {
 public:
  static Potential gaussian(Matrix H, std::optional<Vector> mean = {});
  static Potential cubic(Vector xstar);
  static Potential power(double a, Vector xstar);
  static Potential pseudo_huber(double b, Vector xstar);
  static Potential separable_cubic(Vector weights, Vector xstar);
  static Potential custom(CustomParams params);

  std::size_t dim() const { return dim_; }
  double m() const { return m_; }
  double M() const { return M_; }
  const std::optional<Vector>& minimizer() const { return minimizer_; }
  PotentialKind kind() const;
  const PotentialParams& params() const { return params_; }

  // Radius of the ball on which M is certified.
  double lipschitz_radius() const;

  double value(std::span<const double> x) const;
  void gradient(std::span<const double> x, std::span<double> g) const;
  void hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const;
  // xs holds n points row-major (n * dim values); gs receives n gradients.
  void gradient_batch(std::span<const double> xs, std::span<double> gs) const;

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;

 private:
  Potential(PotentialParams params,
            std::shared_ptr<const PotentialModel> model);

  PotentialParams params_;
  std::shared_ptr<const PotentialModel> model_;
  std::size_t dim_ = 0;
  double m_ = 0.0;
  double M_ = 0.0;
  std::optional<Vector> minimizer_;
};

class PotentialModel {
 public:
  virtual ~PotentialModel() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(std::span<const double> x) const = 0;
  virtual void gradient(std::span<const double> x,
                        std::span<double> g) const = 0;
  // Defaults to central differences of the gradient.
  virtual void hessian(std::span<const double> x, Eigen::Ref<Matrix> out) const;
  virtual void gradient_batch(std::span<const double> xs,
                              std::span<double> gs) const;
};

// f_gamma(x) = f(x) + gamma ||x||^2 / 2, with constants (m + gamma, M + gamma).
struct PenalizedPotential {
  Potential base;
  double gamma = 0.0;

  double m() const { return base.m() + gamma; }
  double M() const { return base.M() + gamma; }
  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;
};

Vector grad(const Potential& pot, const Vector& x);
Vector penalized_grad(const Potential& pot, double gamma, const Vector& x);

// Minimizer x_gamma of f_gamma by damped Newton (backtracking halving until
// f_gamma decreases) with a gradient-descent fallback. Returns x with
// ||grad f_gamma(x)|| <= tol or throws ConvergenceError.
Vector penalized_minimizer(const Potential& pot, double gamma, double tol,
                           int max_iterations = 200,
                           std::optional<Vector> start = {});

// Truncation interval [-L, L] of the 1-D density of pi_gamma: the smallest L
// with f_gamma(+-L) - min f_gamma >= tail_gap.
struct Support1d {
  double mode = 0.0;
  double f_min = 0.0;  // f_gamma(mode)
  double half_width = 0.0;
};
Support1d support_1d(const Potential& pot, double gamma,
                     double tail_gap = 40.0);

// mu_k(pi_gamma) = E ||X||^k for X ~ exp(-f - gamma ||x||^2 / 2), k in {2, 4}.
// Closed form for Gaussians; otherwise 1-D adaptive quadrature.
double target_moment(const Potential& pot, double gamma, int k);

}  // namespace plmc
