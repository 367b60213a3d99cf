#include "plmc/schedules.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "plmc/quadrature.hpp"

namespace plmc {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_m(double m) {
  if (!(std::isfinite(m) && m >= 0.0)) {
    throw std::invalid_argument("schedule: m must be finite and >= 0");
  }
}

void check_time(double t) {
  if (!(t >= 0.0) || std::isnan(t)) {
    throw std::domain_error("schedule: time must be >= 0");
  }
}

}  // namespace

PenaltySchedule PenaltySchedule::zero(double m) {
  check_m(m);
  return {ZeroTag{}, m};
}

PenaltySchedule PenaltySchedule::constant(double c, double m) {
  check_m(m);
  if (!(std::isfinite(c) && c >= 0.0)) {
    throw std::invalid_argument("constant schedule: c must be >= 0");
  }
  return {ConstantTag{c}, m};
}

PenaltySchedule PenaltySchedule::pld_optimal(double A, double m) {
  check_m(m);
  if (!(std::isfinite(A) && A > 0.0)) {
    throw std::invalid_argument("pld_optimal schedule: A must be positive");
  }
  return {PldOptimalTag{A}, m};
}

PenaltySchedule PenaltySchedule::pgf_optimal(double D, double q) {
  if (!(std::isfinite(D) && D > 0.0)) {
    throw std::invalid_argument("pgf_optimal schedule: D must be positive");
  }
  if (q == 1.0) {
    throw std::invalid_argument(
        "pgf_optimal schedule: q = 1 degenerates to the zero schedule");
  }
  if (!(q >= 0.0 && q < 1.0)) {
    throw std::invalid_argument("pgf_optimal schedule: q must lie in [0, 1)");
  }
  const double A = std::pow(D, 1.0 / (1.0 - q)) * (1.0 - q);
  return {PgfRateTag{q, A, D}, 0.0};
}

PenaltySchedule PenaltySchedule::pgf_rate(double q, double A, double m) {
  check_m(m);
  if (!(q >= 0.0 && q < 1.0)) {
    throw std::invalid_argument("pgf_rate schedule: q must lie in [0, 1)");
  }
  if (!(std::isfinite(A) && A > 0.0)) {
    throw std::invalid_argument("pgf_rate schedule: A must be positive");
  }
  return {PgfRateTag{q, A, 0.0}, m};
}

PenaltySchedule PenaltySchedule::custom(CustomTag tag, double m) {
  check_m(m);
  if (!tag.alpha || !tag.alpha_prime) {
    throw std::invalid_argument("custom schedule: alpha and alpha' are required");
  }
  return {std::move(tag), m};
}

PenaltySchedule PenaltySchedule::with_m(double m) const {
  check_m(m);
  return {tag_, m};
}

double PenaltySchedule::alpha(double t) const {
  return std::visit(
      overloaded{
          [](const ZeroTag&) { return 0.0; },
          [](const ConstantTag& c) { return c.c; },
          [t](const PldOptimalTag& p) { return 1.0 / (p.A + 2.0 * t); },
          [t](const PgfRateTag& p) { return (1.0 - p.q) / (t + p.A); },
          [t](const CustomTag& c) { return c.alpha(t); },
      },
      tag_);
}

double PenaltySchedule::alpha_prime(double t) const {
  return std::visit(
      overloaded{
          [](const ZeroTag&) { return 0.0; },
          [](const ConstantTag&) { return 0.0; },
          [t](const PldOptimalTag& p) {
            const double d = p.A + 2.0 * t;
            return -2.0 / (d * d);
          },
          [t](const PgfRateTag& p) {
            const double d = t + p.A;
            return -(1.0 - p.q) / (d * d);
          },
          [t](const CustomTag& c) { return c.alpha_prime(t); },
      },
      tag_);
}

double PenaltySchedule::beta(double t) const {
  check_time(t);
  const double penalty = std::visit(
      overloaded{
          [](const ZeroTag&) { return 0.0; },
          [t](const ConstantTag& c) { return c.c * t; },
          [t](const PldOptimalTag& p) { return 0.5 * std::log1p(2.0 * t / p.A); },
          [t](const PgfRateTag& p) { return (1.0 - p.q) * std::log1p(t / p.A); },
          [t](const CustomTag& c) {
            if (c.alpha_integral) return c.alpha_integral(t);
            return integrate(c.alpha, 0.0, t, 1e-12).value;
          },
      },
      tag_);
  return m_ * t + penalty;
}

std::string PenaltySchedule::name() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const ZeroTag&) { os << "zero"; },
                 [&](const ConstantTag& c) { os << "constant(c=" << c.c << ")"; },
                 [&](const PldOptimalTag& p) { os << "pld_optimal(A=" << p.A << ")"; },
                 [&](const PgfRateTag& p) {
                   os << "pgf_rate(q=" << p.q << ",A=" << p.A << ")";
                 },
                 [&](const CustomTag& c) { os << c.name; },
             },
             tag_);
  return os.str();
}

double beta_of(const PenaltySchedule& sched, double t) { return sched.beta(t); }

PenaltySchedule make_pld_optimal(double A, double m) {
  return PenaltySchedule::pld_optimal(A, m);
}

PenaltySchedule make_pgf_optimal(double D, double q) {
  return PenaltySchedule::pgf_optimal(D, q);
}

}  // namespace plmc
