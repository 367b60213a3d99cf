#include "plmc/verify.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "plmc/bounds.hpp"
#include "plmc/dynamics.hpp"
#include "plmc/metrics.hpp"
#include "plmc/random.hpp"
#include "plmc/schedules.hpp"

namespace plmc {

nlohmann::json CheckReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["status"] = pass ? "pass" : "fail";
  j["measured"] = measured;
  j["tolerances"] = tolerances;
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  j["wall_time_s"] = wall_time_s;
  if (!error_budget.empty()) j["error_budget"] = error_budget;
  j["counterexample"] = counterexample;
  return j;
}

nlohmann::json report_json(std::span<const CheckReport> reports) {
  nlohmann::json j;
  j["checks"] = nlohmann::json::array();
  bool ok = true;
  for (const auto& r : reports) {
    j["checks"].push_back(r.to_json());
    ok = ok && r.pass;
  }
  j["status"] = ok ? "pass" : "fail";
  return j;
}

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void fail_once(CheckReport& rep, nlohmann::json example) {
  if (rep.pass) rep.counterexample = std::move(example);
  rep.pass = false;
}

}  // namespace

CheckReport check_mu2_derivative(const Potential& pot, std::span<const double> gamma_grid,
                                 double tol) {
  Stopwatch clock;
  if (gamma_grid.size() < 2) {
    throw std::invalid_argument("check_mu2_derivative: grid needs at least two values");
  }
  if (pot.dim() != 1) throw std::invalid_argument("check_mu2_derivative: potential must be 1-D");
  CheckReport rep;
  rep.name = "mu2_derivative:" + to_string(pot.kind());
  rep.tolerances["max_abs_deviation"] = tol;
  const double delta = 1e-4;
  double worst = 0.0;
  auto rows = nlohmann::json::array();
  for (double g : gamma_grid) {
    if (!(g >= 0.0)) throw std::invalid_argument("check_mu2_derivative: gamma must be >= 0");
    double fd;
    if (g < delta) {
      fd = (-3.0 * target_moment(pot, g, 2) + 4.0 * target_moment(pot, g + delta, 2) -
            target_moment(pot, g + 2.0 * delta, 2)) /
           (2.0 * delta);
    } else {
      fd = (target_moment(pot, g + delta, 2) - target_moment(pot, g - delta, 2)) / (2.0 * delta);
    }
    const double m2 = target_moment(pot, g, 2);
    const double m4 = target_moment(pot, g, 4);
    const double identity = 0.5 * (m2 * m2 - m4);
    const double dev = std::abs(fd - identity);
    worst = std::max(worst, dev);
    rows.push_back({{"gamma", g}, {"finite_difference", fd}, {"identity", identity}});
    if (!(dev <= tol)) {
      fail_once(rep, {{"gamma", g}, {"finite_difference", fd}, {"identity", identity}});
    }
  }
  rep.measured["max_abs_deviation"] = worst;
  rep.measured["points"] = rows;
  rep.wall_time_s = clock.seconds();
  return rep;
}

CheckReport check_lemma1_gaussian(std::span<const double> m_grid,
                                  std::span<const std::pair<double, double>> gamma_pairs) {
  Stopwatch clock;
  CheckReport rep;
  rep.name = "lemma1_gaussian";
  rep.tolerances["margin"] = 0.0;
  double min_margin = INFINITY;
  std::size_t n = 0;
  nlohmann::json rows = nlohmann::json::array();
  const bool keep_rows = m_grid.size() * gamma_pairs.size() <= 64;
  for (double m : m_grid) {
    for (const auto& [g, gt] : gamma_pairs) {
      const double exact = std::abs(1.0 / std::sqrt(m + g) - 1.0 / std::sqrt(m + gt));
      const double bound = bias_bound_lemma1(m, g, gt, 1.0 / (m + g));
      min_margin = std::min(min_margin, bound - exact);
      ++n;
      if (keep_rows) {
        rows.push_back({{"m", m}, {"gamma", g}, {"gamma_t", gt}, {"exact", exact}, {"bound", bound}});
      }
      if (!(bound >= exact)) {
        fail_once(rep, {{"m", m}, {"gamma", g}, {"gamma_t", gt}, {"exact_w2", exact},
                        {"bound", bound}});
      }
    }
  }
  rep.measured["pairs"] = n;
  rep.measured["min_margin"] = min_margin;
  if (keep_rows) rep.measured["rows"] = rows;
  rep.wall_time_s = clock.seconds();
  return rep;
}

CheckReport check_coupling_laws(double h, std::span<const double> u_grid, std::size_t n_draws,
                                std::uint64_t seed) {
  Stopwatch clock;
  if (n_draws < 10000) throw std::invalid_argument("check_coupling_laws: need n_draws >= 1e4");
  if (!(h > 0.0)) throw std::invalid_argument("check_coupling_laws: h must be > 0");
  CheckReport rep;
  rep.name = "coupling_laws";
  rep.seed = seed;
  rep.tolerances["standard_errors"] = 4.0;
  rep.error_budget =
      "each second-moment entry compared at 4 standard errors, sd of a product of jointly "
      "Gaussian variables sqrt(s_xx s_yy + s_xy^2 / n)";
  const double n = static_cast<double>(n_draws);
  const double z = 4.0;
  const CounterRng rng(seed, StreamDomain::verification);

  // A flat potential: from theta = 0 the midpoint update returns
  // zeta = sqrt(2) xi' and theta' = sqrt(2) xi.
  CustomParams flat;
  flat.dim = 1;
  flat.m = 0.0;
  flat.M = 1.0;  // only consulted by step-size checks
  flat.value = [](std::span<const double>) { return 0.0; };
  flat.gradient = [](std::span<const double>, std::span<double> g) { g[0] = 0.0; };
  flat.name = "flat";
  const Potential pot = Potential::custom(flat);

  auto compare = [&](const std::string& what, double emp, double theory, double sd,
                     nlohmann::json context) {
    const double se = sd / std::sqrt(n);
    const bool ok = se > 0.0 ? std::abs(emp - theory) <= z * se : std::abs(emp - theory) <= 1e-15;
    rep.measured[what] = {{"empirical", emp}, {"theory", theory}, {"std_error", se}};
    if (!ok) {
      context["quantity"] = what;
      context["empirical"] = emp;
      context["theory"] = theory;
      context["std_error"] = se;
      fail_once(rep, context);
    }
  };

  std::uint32_t block = 0;
  for (double u : u_grid) {
    if (!(u > 0.0 && u <= 1.0)) throw std::invalid_argument("check_coupling_laws: u in (0, 1]");
    double sxx = 0, sxy = 0, syy = 0, sxd = 0, sdd = 0;
    for (std::size_t i = 0; i < n_draws; ++i) {
      double theta = 0.0, zeta = 0.0;
      const double e1 = rng.normal(i, block, 0), e2 = rng.normal(i, block, 1);
      midpoint_update(pot, std::span<double>(&theta, 1), u, h, 0.0, 0.0,
                      std::span<const double>(&e1, 1), std::span<const double>(&e2, 1),
                      std::span<double>(&zeta, 1));
      const double xm = zeta / std::sqrt(2.0), x = theta / std::sqrt(2.0);
      const double d = x - xm;
      sxx += xm * xm;
      sxy += xm * x;
      syy += x * x;
      sxd += xm * d;
      sdd += d * d;
    }
    ++block;
    const double a = u * h;
    std::ostringstream tag;
    tag << "u=" << u;
    const nlohmann::json ctx = {{"u", u}, {"h", h}};
    compare(tag.str() + ":var_xi_mid", sxx / n, a, std::sqrt(2.0) * a, ctx);
    compare(tag.str() + ":cov", sxy / n, a, std::sqrt(a * h + a * a), ctx);
    compare(tag.str() + ":var_xi", syy / n, h, std::sqrt(2.0) * h, ctx);
    // Independence of xi' and xi - xi' (variance (1 - u) h).
    compare(tag.str() + ":cov_xi_mid_increment", sxd / n, 0.0, std::sqrt(a * (1.0 - u) * h),
            ctx);
    compare(tag.str() + ":var_increment", sdd / n, (1.0 - u) * h,
            std::sqrt(2.0) * (1.0 - u) * h, ctx);
  }

  // Bridge increments at {k + 0.2, k + 0.7, k + 1}, unsorted on input.
  const double k = 3.0;
  const std::vector<double> times{k + 0.7, k + 0.2, k + 1.0};
  const std::size_t p = 2;
  double gram[3][3] = {};
  for (std::size_t i = 0; i < n_draws; ++i) {
    const auto xi = sample_bridge_increments(times, k, h, p, rng, i, block);
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double dot = 0.0;
        for (std::size_t d = 0; d < p; ++d) dot += xi[a * p + d] * xi[b * p + d];
        gram[a][b] += dot / (h * static_cast<double>(p));
      }
    }
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = a; b < 3; ++b) {
      const double ca = times[a] - k, cb = times[b] - k, cab = std::min(ca, cb);
      const double sd = std::sqrt((ca * cb + cab * cab) / static_cast<double>(p));
      std::ostringstream tag;
      tag << "bridge_gram[" << a << "][" << b << "]";
      compare(tag.str(), gram[a][b] / n, cab, sd, {{"times", times}, {"k", k}, {"h", h}});
    }
  }
  rep.measured["n_draws"] = n_draws;
  rep.wall_time_s = clock.seconds();
  return rep;
}

namespace {

// K = int_0^L e^{-lambda r} dW_r jointly with W_L: returns {cov(K, W_L) / L,
// sd of K given W_L}.
std::pair<double, double> ou_segment(double lambda, double L) {
  if (L <= 0.0) return {0.0, 0.0};
  const double x = lambda * L;
  const double cov = -std::expm1(-x) / lambda;
  double cond;
  if (x < 1e-3) {
    cond = x * x * x * (1.0 - x) / (12.0 * lambda);
  } else {
    cond = -std::expm1(-2.0 * x) / (2.0 * lambda) - cov * cov / L;
  }
  return {cov / L, std::sqrt(std::max(0.0, cond))};
}

}  // namespace

MidpointOrderResult midpoint_order_errors(const Vector& lambda, std::span<const double> hs,
                                          std::size_t n, std::size_t snapshots, double spacing,
                                          double burn_in, std::uint64_t seed) {
  if (lambda.size() == 0 || !(lambda.array() > 0.0).all()) {
    throw std::invalid_argument("midpoint_order_errors: need positive curvatures");
  }
  if (hs.size() < 2 || n < 2 || n > 512 || snapshots == 0) {
    throw std::invalid_argument("midpoint_order_errors: need >= 2 step sizes and 2 <= n <= 512");
  }
  const std::size_t p = static_cast<std::size_t>(lambda.size());
  const Potential pot = Potential::gaussian(Matrix(lambda.asDiagonal()));
  MidpointOrderResult res;
  for (std::size_t hi = 0; hi < hs.size(); ++hi) {
    const double h = hs[hi];
    if (!(h > 0.0 && h * pot.M() < 1.0)) {
      throw std::invalid_argument("midpoint_order_errors: need 0 < h M < 1");
    }
    // One stream per step size; draws 0..3p-1 at step k drive step k.
    const CounterRng rng(seed + hi, StreamDomain::verification);
    const CounterRng start_rng(seed, StreamDomain::target);
    std::vector<double> x(n * p), th(n * p), lm(n * p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < p; ++d) {
        x[i * p + d] = start_rng.normal(i, 0, static_cast<std::uint32_t>(d)) /
                       std::sqrt(lambda[static_cast<Eigen::Index>(d)]);
      }
    }
    th = x;
    lm = x;
    const auto burn = static_cast<std::uint64_t>(std::llround(burn_in / h));
    const auto gap = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(spacing / h)));
    const std::uint64_t total = burn + gap * (snapshots - 1);
    std::vector<double> decay(p);
    for (std::size_t d = 0; d < p; ++d) decay[d] = std::exp(-lambda[static_cast<Eigen::Index>(d)] * h);
    std::vector<double> e1(p), e2(p), zeta(p), g(p), eta(p);
    double acc_r = 0.0, acc_l = 0.0;
    for (std::uint64_t k = 0; k <= total; ++k) {
      if (k >= burn && (k - burn) % gap == 0) {
        const auto ref = SampleSet::from_points(x, p, SampleOrigin::target_iid);
        const double wr = w2_empirical_assignment(SampleSet::from_points(th, p, SampleOrigin::simulator), ref);
        const double wl = w2_empirical_assignment(SampleSet::from_points(lm, p, SampleOrigin::simulator), ref);
        acc_r += wr * wr;
        acc_l += wl * wl;
      }
      if (k == total) break;
      const auto step = static_cast<std::uint32_t>(k);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform(i, step, 0);
        for (std::size_t d = 0; d < p; ++d) {
          const auto j = static_cast<std::uint32_t>(4 * d);
          e1[d] = rng.normal(i, step, j);
          e2[d] = rng.normal(i, step, j + 1);
        }
        // Exact diffusion over [0, uh] and [uh, h] with the same Brownian
        // increments as the midpoint pair.
        for (std::size_t d = 0; d < p; ++d) {
          const double lam = lambda[static_cast<Eigen::Index>(d)];
          const auto j = static_cast<std::uint32_t>(4 * d);
          const double dw1 = std::sqrt(u * h) * e1[d], dw2 = std::sqrt((1.0 - u) * h) * e2[d];
          const auto [b1, s1] = ou_segment(lam, u * h);
          const auto [b2, s2] = ou_segment(lam, (1.0 - u) * h);
          const double k1 = b1 * dw1 + s1 * rng.normal(i, step, j + 2);
          const double k2 = b2 * dw2 + s2 * rng.normal(i, step, j + 3);
          const double J = std::exp(-lam * (1.0 - u) * h) * k1 + k2;
          x[i * p + d] = decay[d] * x[i * p + d] + std::sqrt(2.0) * J;
          eta[d] = (dw1 + dw2) / std::sqrt(h);
        }
        std::span<double> theta(th.data() + i * p, p);
        midpoint_update(pot, theta, u, h, 0.0, 0.0, e1, e2, zeta);
        std::span<double> y(lm.data() + i * p, p);
        pot.gradient(y, g);
        euler_update(y, g, 0.0, h, 1.0, eta);
      }
    }
    res.h.push_back(h);
    res.rlmc.push_back(std::sqrt(acc_r / static_cast<double>(snapshots)));
    res.lmc.push_back(std::sqrt(acc_l / static_cast<double>(snapshots)));
  }
  res.rlmc_slope = loglog_slope(res.h, res.rlmc);
  res.lmc_slope = loglog_slope(res.h, res.lmc);
  return res;
}

CheckReport check_rlmc_order(const Vector& lambda, std::span<const double> hs, std::size_t n,
                             std::size_t snapshots, double spacing, double burn_in,
                             std::uint64_t seed, double min_slope) {
  Stopwatch clock;
  CheckReport rep;
  rep.name = "rlmc_order";
  rep.seed = seed;
  const auto r = midpoint_order_errors(lambda, hs, n, snapshots, spacing, burn_in, seed);
  rep.measured["h"] = r.h;
  rep.measured["w2_rlmc"] = r.rlmc;
  rep.measured["w2_lmc"] = r.lmc;
  rep.measured["rlmc_slope"] = r.rlmc_slope;
  rep.measured["lmc_slope"] = r.lmc_slope;
  rep.tolerances["min_rlmc_slope"] = min_slope;
  for (std::size_t i = 0; i < r.h.size(); ++i) {
    if (!(r.rlmc[i] < r.lmc[i])) {
      fail_once(rep, {{"h", r.h[i]}, {"w2_rlmc", r.rlmc[i]}, {"w2_lmc", r.lmc[i]}});
    }
  }
  if (!(r.rlmc_slope >= min_slope)) {
    fail_once(rep, {{"rlmc_slope", r.rlmc_slope}, {"min_slope", min_slope}});
  }
  rep.wall_time_s = clock.seconds();
  return rep;
}

CheckReport rate_suite(std::span<const RateCheck> checks) {
  Stopwatch clock;
  if (checks.empty()) throw std::invalid_argument("rate_suite: no curves");
  CheckReport rep;
  rep.name = "rates";
  for (const auto& c : checks) {
    const double slope = rate_fit_range(c.t, c.values, c.t_lo, c.t_hi);
    rep.measured[c.name] = {{"slope", slope}, {"t_lo", c.t_lo}, {"t_hi", c.t_hi}};
    rep.tolerances[c.name] = {c.slope_lo, c.slope_hi};
    if (!(slope >= c.slope_lo && slope <= c.slope_hi)) {
      fail_once(rep, {{"curve", c.name}, {"slope", slope}, {"window", {c.slope_lo, c.slope_hi}}});
    }
  }
  rep.wall_time_s = clock.seconds();
  return rep;
}

namespace {

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return t;
}

}  // namespace

std::vector<RateCheck> default_rate_checks() {
  std::vector<RateCheck> out;
  {
    RateCheck c{"synthetic_inverse_sqrt", log_grid(1.0, 1e6, 61), {}, 1.0, 1e6, -0.5 - 1e-12,
                -0.5 + 1e-12};
    for (double t : c.t) c.values.push_back(3.0 / std::sqrt(t));
    out.push_back(std::move(c));
  }
  {
    // A = 2, mu2 = 1.
    RateCheck c{"bound_prop1", log_grid(1e3, 1e6, 61), {}, 1e3, 1e6, -0.50, -0.40};
    for (double t : c.t) c.values.push_back(bound_prop1(2.0, 1.0, t));
    out.push_back(std::move(c));
  }
  {
    Vector w(2), xs(2);
    w << 1.0, 2.0;
    xs << 5.0, 6.0;
    const Potential pot = Potential::separable_cubic(w, xs);
    const auto sched = PenaltySchedule::pgf_optimal(assumption_a_constants(pot).D, 0.5);
    RateCheck c{"pgf_separable_cubic", log_grid(1e2, 1e4, 41), {}, 1e2, 1e4, -0.6, -0.4};
    for (const auto& pt : integrate_pgf(pot, sched, 1e4, 1e-3, c.t)) c.values.push_back(pt.distance);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> suite_names() {
  return {"lemmas", "coupling", "rates", "assumption_a", "all"};
}

namespace {

std::vector<CheckReport> lemmas_suite(std::uint64_t seed) {
  std::vector<CheckReport> out;
  const std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
  out.push_back(check_mu2_derivative(Potential::gaussian(Matrix::Identity(1, 1)), grid));
  out.push_back(check_mu2_derivative(Potential::pseudo_huber(1.0, Vector::Zero(1)), grid));
  // 100 random pairs on a few curvatures.
  const CounterRng rng(seed, StreamDomain::verification);
  std::vector<std::pair<double, double>> pairs{{0.0, 1.0}, {0.5, 0.5}};
  for (std::uint32_t i = 0; i < 100; ++i) {
    const double g = 5.0 * rng.uniform(0, 0, i);
    pairs.emplace_back(g, g + 5.0 * rng.uniform(1, 0, i));
  }
  const std::vector<double> ms{0.1, 1.0, 10.0};
  auto rep = check_lemma1_gaussian(ms, pairs);
  rep.seed = seed;
  out.push_back(std::move(rep));
  return out;
}

CheckReport assumption_a_suite() {
  Stopwatch clock;
  CheckReport rep;
  rep.name = "assumption_a";
  rep.tolerances["slack"] = 1e-9;
  std::vector<Potential> pots;
  Vector xs(2);
  xs << 1.0, 2.0;
  Matrix H(2, 2);
  H << 2.0, 0.5, 0.5, 1.0;
  pots.push_back(Potential::gaussian(H, xs));
  pots.push_back(Potential::pseudo_huber(1.0, xs));
  pots.push_back(Potential::cubic(xs));
  for (double a : {2.5, 3.0, 4.0}) pots.push_back(Potential::power(a, xs));
  Vector w(2), c(2);
  w << 1.0, 2.0;
  c << 5.0, 6.0;
  pots.push_back(Potential::separable_cubic(w, c));
  const auto grid = log_grid(1e-3, 3.0 * xs.norm(), 30);
  for (const auto& pot : pots) {
    const auto k = assumption_a_constants(pot);
    const auto r = verify_assumption_a(pot, k.D, k.q, grid, 1e-9);
    std::string key = to_string(pot.kind());
    if (const auto* pw = std::get_if<PowerParams>(&pot.params())) {
      std::ostringstream os;
      os << key << "(a=" << pw->a << ")";
      key = os.str();
    }
    rep.measured[key] = {{"D", k.D}, {"q", k.q}, {"worst_ratio", r.worst_ratio}};
    if (!r.pass) {
      const auto& ce = *r.counterexample;
      fail_once(rep, {{"potential", key}, {"gamma", ce[0]}, {"gamma_t", ce[1]}, {"lhs", ce[2]},
                      {"rhs", ce[3]}});
    }
  }
  rep.wall_time_s = clock.seconds();
  return rep;
}

}  // namespace

std::vector<CheckReport> run_suite(const std::string& name, std::uint64_t seed) {
  std::vector<CheckReport> out;
  auto append = [&](std::vector<CheckReport> more) {
    for (auto& r : more) out.push_back(std::move(r));
  };
  const bool all = name == "all";
  bool known = all;
  if (all || name == "lemmas") {
    known = true;
    append(lemmas_suite(seed));
  }
  if (all || name == "coupling") {
    known = true;
    const std::vector<double> us{0.3, 0.7, 1.0};
    out.push_back(check_coupling_laws(0.1, us, 100000, seed));
  }
  if (all || name == "rates") {
    known = true;
    const auto checks = default_rate_checks();
    out.push_back(rate_suite(checks));
  }
  if (all || name == "assumption_a") {
    known = true;
    out.push_back(assumption_a_suite());
  }
  if (!known) throw std::invalid_argument("unknown verification suite '" + name + "'");
  return out;
}

}  // namespace plmc
