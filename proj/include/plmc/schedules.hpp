#pragma once

#include <functional>
#include <string>
#include <variant>

namespace plmc {

// alpha(t) == 0
struct ZeroTag {};
// alpha(t) == c
struct ConstantTag {
  double c = 0.0;
};
// alpha(t) = 1 / (A + 2t)
struct PldOptimalTag {
  double A = 1.0;
};
// alpha(t) = (1 - q) / (t + A). pgf_optimal picks A = D^{1/(1-q)} (1 - q).
struct PgfRateTag {
  double q = 0.5;
  double A = 1.0;
  double D = 0.0;  // 0 when A was given directly
};
struct CustomTag {
  std::function<double(double)> alpha;
  std::function<double(double)> alpha_prime;
  // Optional closed-form integral of alpha over [0, t]; quadrature otherwise.
  std::function<double(double)> alpha_integral;
  std::string name = "custom";
};

using ScheduleTag =
    std::variant<ZeroTag, ConstantTag, PldOptimalTag, PgfRateTag, CustomTag>;

// Vanishing quadratic penalty alpha(t) >= 0, non-increasing, together with the
// strong-convexity constant m it pairs with, and
//   beta(t) = int_0^t (m + alpha(s)) ds.
// Immutable after construction.
class PenaltySchedule {
 public:
  static PenaltySchedule zero(double m = 0.0);
  static PenaltySchedule constant(double c, double m = 0.0);
  static PenaltySchedule pld_optimal(double A, double m = 0.0);
  static PenaltySchedule pgf_optimal(double D, double q);
  static PenaltySchedule pgf_rate(double q, double A, double m = 0.0);
  static PenaltySchedule custom(CustomTag tag, double m = 0.0);

  double alpha(double t) const;
  double alpha_prime(double t) const;
  double beta(double t) const;
  double m() const { return m_; }
  const ScheduleTag& tag() const { return tag_; }
  std::string name() const;
  bool is_zero() const { return std::holds_alternative<ZeroTag>(tag_); }

  // Same penalty, paired with a different m.
  PenaltySchedule with_m(double m) const;

 private:
  PenaltySchedule(ScheduleTag tag, double m) : tag_(std::move(tag)), m_(m) {}

  ScheduleTag tag_;
  double m_ = 0.0;
};

double beta_of(const PenaltySchedule& sched, double t);

PenaltySchedule make_pld_optimal(double A, double m = 0.0);
PenaltySchedule make_pgf_optimal(double D, double q);

}  // namespace plmc
