#include "plmc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <exception>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace plmc {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::ld_euler: return "ld_euler";
    case Variant::pld_euler: return "pld_euler";
    case Variant::tpld_euler: return "tpld_euler";
    case Variant::rlmc: return "rlmc";
    case Variant::rlmc_parallel: return "rlmc_parallel";
    case Variant::pld_midpoint: return "pld_midpoint";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::ld_euler, Variant::pld_euler, Variant::tpld_euler,
                    Variant::rlmc, Variant::rlmc_parallel, Variant::pld_midpoint}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown sampler variant '" + name + "'");
}

Ensemble Ensemble::dirac(std::size_t n_paths, const Vector& point,
                         std::uint64_t master_seed) {
  if (n_paths == 0 || point.size() == 0) {
    throw std::invalid_argument("Ensemble::dirac: need n_paths > 0 and dim > 0");
  }
  if (!point.allFinite()) throw std::invalid_argument("Ensemble::dirac: non-finite start");
  Ensemble e;
  e.n_paths = n_paths;
  e.dim = static_cast<std::size_t>(point.size());
  e.states.resize(n_paths * e.dim);
  for (std::size_t i = 0; i < n_paths; ++i) {
    std::copy(point.data(), point.data() + point.size(), e.states.begin() + i * e.dim);
  }
  e.master_seed = master_seed;
  return e;
}

namespace {

// Persistent workers; run() partitions [0, n) into contiguous chunks.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned threads) : size_(std::max(1u, threads)) {
    for (unsigned w = 1; w < size_; ++w) {
      workers_.emplace_back([this, w] { loop(w); });
    }
  }
  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const { return size_; }

  void run(std::size_t n, const std::function<void(unsigned, std::size_t, std::size_t)>& fn) {
    if (size_ == 1) {
      fn(0, 0, n);
      return;
    }
    {
      std::lock_guard lock(mu_);
      task_ = &fn;
      n_ = n;
      pending_ = size_ - 1;
      error_ = nullptr;
      ++generation_;
    }
    cv_.notify_all();
    std::exception_ptr local;
    try {
      execute(0);
    } catch (...) {
      local = std::current_exception();
    }
    std::unique_lock lock(mu_);
    done_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    if (local) std::rethrow_exception(local);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void execute(unsigned w) {
    const std::size_t chunk = (n_ + size_ - 1) / size_;
    const std::size_t begin = std::min(n_, w * chunk);
    const std::size_t end = std::min(n_, begin + chunk);
    if (begin < end) (*task_)(w, begin, end);
  }

  void loop(unsigned w) {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      std::exception_ptr err;
      try {
        execute(w);
      } catch (...) {
        err = std::current_exception();
      }
      {
        std::lock_guard lock(mu_);
        if (err && !error_) error_ = err;
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  unsigned size_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, done_;
  const std::function<void(unsigned, std::size_t, std::size_t)>* task_ = nullptr;
  std::size_t n_ = 0;
  unsigned pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint32_t step_counter(std::uint64_t step_index) {
  if (step_index > std::numeric_limits<std::uint32_t>::max()) {
    throw std::overflow_error("step index exceeds the 32-bit counter range");
  }
  return static_cast<std::uint32_t>(step_index);
}

void check_block_finite(const double* x, std::size_t count, std::uint64_t first_path,
                        std::size_t dim, std::uint64_t step) {
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(x[i])) {
      std::ostringstream msg;
      msg << "non-finite state at step " << step << " (path " << first_path + i / dim
          << "); step size too large?";
      throw DivergenceError(msg.str());
    }
  }
}

struct Scratch {
  std::vector<double> eta, unif, grad, zeta;
};

enum class Kind { euler, midpoint, parallel };

struct StepPlan {
  Kind kind = Kind::euler;
  double h = 0.0;
  double tau = 1.0;
  int R = 1;
  const PenaltySchedule* sched = nullptr;  // null: no penalty
  MidpointAlpha midpoint_alpha = MidpointAlpha::midpoint_time;
};

void euler_block(const Ensemble& ens, const Potential& pot, const StepPlan& plan,
                 const CounterRng& rng, std::uint32_t step, std::size_t block,
                 double alpha, Scratch& s, double* x) {
  const std::size_t p = ens.dim;
  const std::size_t first = block * kLanes;
  const std::size_t lanes = std::min(kLanes, ens.n_paths - first);
  const std::size_t count = lanes * p;
  s.eta.resize(kLanes * p);
  s.grad.resize(kLanes * p);
  normal_lanes(rng, first, step, p, s.eta);
  pot.gradient_batch(std::span<const double>(x, count), std::span<double>(s.grad.data(), count));
  const double h = plan.h;
  const double noise = std::sqrt(2.0 * plan.tau * h);
  const double* g = s.grad.data();
  const double* eta = s.eta.data();
  for (std::size_t i = 0; i < count; ++i) {
    x[i] = x[i] - h * (g[i] + alpha * x[i]) + noise * eta[i];
  }
}

void midpoint_block(const Ensemble& ens, const Potential& pot, const StepPlan& plan,
                    const CounterRng& rng, std::uint32_t step, std::size_t block,
                    Scratch& s, double* x) {
  const std::size_t p = ens.dim;
  const std::size_t first = block * kLanes;
  const std::size_t lanes = std::min(kLanes, ens.n_paths - first);
  s.unif.resize(kLanes);
  s.eta.resize(kLanes * 2 * p);
  s.zeta.resize(p);
  uniform_lanes(rng, first, step, 1, s.unif);
  normal_lanes(rng, first, step, 2 * p, s.eta);
  const double t = ens.t;
  const double alpha_start = plan.sched ? plan.sched->alpha(t) : 0.0;
  for (std::size_t l = 0; l < lanes; ++l) {
    const double u = s.unif[l];
    double alpha_mid = 0.0;
    if (plan.sched) {
      alpha_mid = plan.midpoint_alpha == MidpointAlpha::midpoint_time
                      ? plan.sched->alpha(t + u * plan.h)
                      : alpha_start;
    }
    const double* eta = s.eta.data() + l * 2 * p;
    midpoint_update(pot, std::span<double>(x + l * p, p), u, plan.h, alpha_start, alpha_mid,
                    std::span<const double>(eta, p), std::span<const double>(eta + p, p),
                    s.zeta);
  }
}

void parallel_block(const Ensemble& ens, const Potential& pot, const StepPlan& plan,
                    const CounterRng& rng, std::uint32_t step, std::size_t block,
                    Scratch& s, double* x) {
  const std::size_t p = ens.dim;
  const std::size_t R = static_cast<std::size_t>(plan.R);
  const std::size_t first = block * kLanes;
  const std::size_t lanes = std::min(kLanes, ens.n_paths - first);
  s.unif.resize(kLanes * R);
  s.eta.resize(kLanes * (R + 1) * p);
  uniform_lanes(rng, first, step, R, s.unif);
  normal_lanes(rng, first, step, (R + 1) * p, s.eta);
  for (std::size_t l = 0; l < lanes; ++l) {
    parallel_midpoint_update(pot, std::span<double>(x + l * p, p),
                             std::span<const double>(s.unif.data() + l * R, R), plan.h,
                             std::span<const double>(s.eta.data() + l * (R + 1) * p, (R + 1) * p));
  }
}

// Advances `ens` in place by one step.
void advance(Ensemble& ens, const Potential& pot, const StepPlan& plan, WorkerPool& pool,
             std::vector<Scratch>& scratch) {
  if (ens.dim != pot.dim()) throw std::invalid_argument("step: ensemble/potential dimension mismatch");
  const std::uint32_t step = step_counter(ens.step_index);
  const CounterRng rng(ens.master_seed, StreamDomain::sampler);
  const std::size_t n_blocks = (ens.n_paths + kLanes - 1) / kLanes;
  const double alpha = plan.sched ? plan.sched->alpha(ens.t) : 0.0;
  scratch.resize(pool.size());
  pool.run(n_blocks, [&](unsigned w, std::size_t begin, std::size_t end) {
    Scratch& s = scratch[w];
    for (std::size_t b = begin; b < end; ++b) {
      double* x = ens.states.data() + b * kLanes * ens.dim;
      switch (plan.kind) {
        case Kind::euler: euler_block(ens, pot, plan, rng, step, b, alpha, s, x); break;
        case Kind::midpoint: midpoint_block(ens, pot, plan, rng, step, b, s, x); break;
        case Kind::parallel: parallel_block(ens, pot, plan, rng, step, b, s, x); break;
      }
      const std::size_t lanes = std::min(kLanes, ens.n_paths - b * kLanes);
      check_block_finite(x, lanes * ens.dim, b * kLanes, ens.dim, ens.step_index);
    }
  });
  ens.t += plan.h;
  ens.step_index += 1;
}

void require_positive(double v, const char* what) {
  if (!(std::isfinite(v) && v > 0.0)) {
    throw std::invalid_argument(std::string(what) + " must be positive");
  }
}

Ensemble step_with(const Ensemble& ens, const Potential& pot, const StepPlan& plan,
                   unsigned threads) {
  Ensemble next = ens;
  WorkerPool pool(resolve_threads(threads));
  std::vector<Scratch> scratch;
  advance(next, pot, plan, pool, scratch);
  return next;
}

StepPlan plan_for(const SamplerConfig& cfg, const PenaltySchedule& sched) {
  StepPlan plan;
  plan.h = cfg.h;
  plan.midpoint_alpha = cfg.midpoint_alpha;
  switch (cfg.variant) {
    case Variant::ld_euler: plan.kind = Kind::euler; break;
    case Variant::pld_euler:
      plan.kind = Kind::euler;
      plan.sched = &sched;
      break;
    case Variant::tpld_euler:
      plan.kind = Kind::euler;
      plan.sched = &sched;
      plan.tau = cfg.tau;
      break;
    case Variant::rlmc: plan.kind = Kind::midpoint; break;
    case Variant::rlmc_parallel:
      plan.kind = Kind::parallel;
      plan.R = cfg.R;
      break;
    case Variant::pld_midpoint:
      plan.kind = Kind::midpoint;
      plan.sched = &sched;
      break;
  }
  return plan;
}

bool penalized(Variant v) {
  return v == Variant::pld_euler || v == Variant::tpld_euler || v == Variant::pld_midpoint;
}

}  // namespace

std::string validate(const SamplerConfig& cfg, const Potential& pot,
                     const PenaltySchedule& sched) {
  require_positive(cfg.h, "sampler.h");
  require_positive(cfg.tau, "sampler.tau");
  if (cfg.R < 1) throw std::invalid_argument("sampler.R must be >= 1");
  if (cfg.n_paths == 0) throw std::invalid_argument("sampler.n_paths must be >= 1");
  if (cfg.x0 && static_cast<std::size_t>(cfg.x0->size()) != pot.dim()) {
    throw std::invalid_argument("sampler.x0: dimension mismatch");
  }
  for (std::uint64_t c : cfg.checkpoints) {
    if (c > cfg.n_steps) throw std::invalid_argument("sampler.checkpoints: index beyond n_steps");
  }
  const double stiffness = pot.M() + (penalized(cfg.variant) ? sched.alpha(0.0) : 0.0);
  const double hm = cfg.h * stiffness;
  if (!(hm < 1.0)) {
    std::ostringstream msg;
    msg << "step size too large: h (M + alpha(0)) = " << hm << " >= 1";
    throw std::invalid_argument(msg.str());
  }
  if (hm >= 0.25) {
    std::ostringstream msg;
    msg << "h (M + alpha(0)) = " << hm << " >= 1/4; midpoint error bounds assume less";
    return msg.str();
  }
  return {};
}

std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n_steps, int per_decade) {
  std::set<std::uint64_t> steps{0, n_steps};
  if (n_steps > 0 && per_decade > 0) {
    const double decades = std::log10(static_cast<double>(n_steps));
    const int count = static_cast<int>(std::ceil(decades * per_decade));
    for (int i = 0; i <= count; ++i) {
      const double v = std::pow(10.0, static_cast<double>(i) / per_decade);
      const auto s = static_cast<std::uint64_t>(std::llround(v));
      if (s <= n_steps) steps.insert(s);
    }
  }
  return {steps.begin(), steps.end()};
}

void euler_update(std::span<double> x, std::span<const double> grad, double alpha,
                  double h, double tau, std::span<const double> eta) {
  const double noise = std::sqrt(2.0 * tau * h);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = x[i] - h * (grad[i] + alpha * x[i]) + noise * eta[i];
  }
}

void midpoint_update(const Potential& pot, std::span<double> theta, double u,
                     double h, double alpha_start, double alpha_mid,
                     std::span<const double> eta1, std::span<const double> eta2,
                     std::span<double> zeta) {
  const std::size_t p = theta.size();
  const double uh = u * h;
  const double a = std::sqrt(uh);
  const double b = std::sqrt((1.0 - u) * h);
  const double sqrt2 = std::sqrt(2.0);
  double g_small[8];
  std::vector<double> g_heap;
  std::span<double> g;
  if (p <= 8) {
    g = std::span<double>(g_small, p);
  } else {
    g_heap.resize(p);
    g = g_heap;
  }
  pot.gradient(theta, g);
  for (std::size_t d = 0; d < p; ++d) {
    zeta[d] = theta[d] - uh * (g[d] + alpha_start * theta[d]) + sqrt2 * (a * eta1[d]);
  }
  pot.gradient(zeta, g);
  for (std::size_t d = 0; d < p; ++d) {
    const double xi_mid = a * eta1[d];
    const double xi = xi_mid + b * eta2[d];
    theta[d] = theta[d] - h * (g[d] + alpha_mid * zeta[d]) + sqrt2 * xi;
  }
}

void parallel_midpoint_update(const Potential& pot, std::span<double> theta,
                              std::span<const double> offsets, double h,
                              std::span<const double> eta) {
  const std::size_t p = theta.size();
  const std::size_t R = offsets.size();
  if (R == 0) throw std::invalid_argument("parallel_midpoint_update: need R >= 1");
  if (eta.size() < (R + 1) * p) throw std::invalid_argument("parallel_midpoint_update: eta too small");
  thread_local std::vector<double> u, xi, g, gz, sum, zeta;
  u.assign(offsets.begin(), offsets.end());
  u.push_back(1.0);
  xi.resize((R + 1) * p);
  g.resize(p);
  gz.resize(p);
  zeta.resize(p);
  sum.assign(p, 0.0);
  bridge_increments(u, h, p, eta, xi);
  pot.gradient(theta, g);
  const double sqrt2 = std::sqrt(2.0);
  for (std::size_t i = 0; i < R; ++i) {
    const double uh = u[i] * h;
    for (std::size_t d = 0; d < p; ++d) zeta[d] = theta[d] - uh * g[d] + sqrt2 * xi[i * p + d];
    pot.gradient(zeta, gz);
    for (std::size_t d = 0; d < p; ++d) sum[d] += gz[d];
  }
  const double scale = h / static_cast<double>(R);
  for (std::size_t d = 0; d < p; ++d) {
    theta[d] = theta[d] - scale * sum[d] + sqrt2 * xi[R * p + d];
  }
}

void bridge_increments(std::span<const double> offsets, double h, std::size_t dim,
                       std::span<const double> eta, std::span<double> out) {
  const std::size_t n = offsets.size();
  if (eta.size() < n * dim || out.size() < n * dim) {
    throw std::invalid_argument("bridge_increments: buffer too small");
  }
  for (double u : offsets) {
    if (!(u > 0.0 && u <= 1.0)) {
      throw std::invalid_argument("bridge_increments: offset outside (0, 1]");
    }
  }
  // Small R: insertion sort on indices keeps allocation out of the hot loop
  // and is stable, so equal times are ordered by position.
  std::size_t order_small[32];
  std::vector<std::size_t> order_heap;
  std::size_t* order = order_small;
  if (n > 32) {
    order_heap.resize(n);
    order = order_heap.data();
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i;
    while (j > 0 && offsets[order[j - 1]] > offsets[i]) {
      order[j] = order[j - 1];
      --j;
    }
    order[j] = i;
  }
  double prev = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t idx = order[r];
    const double sd = std::sqrt((offsets[idx] - prev) * h);
    for (std::size_t d = 0; d < dim; ++d) {
      const double base = r == 0 ? 0.0 : out[order[r - 1] * dim + d];
      out[idx * dim + d] = base + sd * eta[r * dim + d];
    }
    prev = offsets[idx];
  }
}

std::vector<double> sample_bridge_increments(std::span<const double> times, double k,
                                             double h, std::size_t dim,
                                             std::span<const double> eta) {
  if (times.empty()) throw std::invalid_argument("sample_bridge_increments: no times");
  require_positive(h, "sample_bridge_increments: h");
  std::vector<double> offsets(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > k && times[i] <= k + 1.0)) {
      std::ostringstream msg;
      msg << "sample_bridge_increments: time " << times[i] << " outside (" << k << ", "
          << k + 1.0 << "]";
      throw std::invalid_argument(msg.str());
    }
    offsets[i] = times[i] - k;
  }
  if (times.back() != k + 1.0) {
    throw std::invalid_argument("sample_bridge_increments: last time must equal k + 1");
  }
  std::vector<double> out(times.size() * dim);
  bridge_increments(offsets, h, dim, eta, out);
  return out;
}

std::vector<double> sample_bridge_increments(std::span<const double> times, double k,
                                             double h, std::size_t dim,
                                             const CounterRng& rng, std::uint64_t path,
                                             std::uint32_t step) {
  std::vector<double> eta(times.size() * dim);
  for (std::size_t j = 0; j < eta.size(); ++j) {
    eta[j] = rng.normal(path, step, static_cast<std::uint32_t>(j));
  }
  return sample_bridge_increments(times, k, h, dim, eta);
}

Ensemble step_euler(const Ensemble& ens, const Potential& pot, const PenaltySchedule& sched,
                    double h, double tau, const StepOptions& opt) {
  require_positive(h, "step_euler: h");
  require_positive(tau, "step_euler: tau");
  StepPlan plan;
  plan.kind = Kind::euler;
  plan.h = h;
  plan.tau = tau;
  plan.sched = &sched;
  return step_with(ens, pot, plan, opt.threads);
}

Ensemble step_rlmc(const Ensemble& ens, const Potential& pot, double h, const StepOptions& opt) {
  require_positive(h, "step_rlmc: h");
  if (!(h * pot.M() < 1.0)) throw std::invalid_argument("step_rlmc: need h M < 1");
  StepPlan plan;
  plan.kind = Kind::midpoint;
  plan.h = h;
  return step_with(ens, pot, plan, opt.threads);
}

Ensemble step_rlmc_parallel(const Ensemble& ens, const Potential& pot, double h, int R,
                            const StepOptions& opt) {
  require_positive(h, "step_rlmc_parallel: h");
  if (R < 1) throw std::invalid_argument("step_rlmc_parallel: R must be >= 1");
  if (!(h * pot.M() < 1.0)) throw std::invalid_argument("step_rlmc_parallel: need h M < 1");
  StepPlan plan;
  plan.kind = Kind::parallel;
  plan.h = h;
  plan.R = R;
  return step_with(ens, pot, plan, opt.threads);
}

Ensemble step_midpoint_pld(const Ensemble& ens, const Potential& pot,
                           const PenaltySchedule& sched, double h, const StepOptions& opt) {
  require_positive(h, "step_midpoint_pld: h");
  if (!(h * (pot.M() + sched.alpha(ens.t)) < 1.0)) {
    throw std::invalid_argument("step_midpoint_pld: need h (M + alpha(kh)) < 1");
  }
  StepPlan plan;
  plan.kind = Kind::midpoint;
  plan.h = h;
  plan.sched = &sched;
  plan.midpoint_alpha = opt.midpoint_alpha;
  return step_with(ens, pot, plan, opt.threads);
}

void run_chain(const SamplerConfig& cfg, const Potential& pot, const PenaltySchedule& sched,
               const std::function<void(const Ensemble&)>& on_checkpoint) {
  const std::string warning = validate(cfg, pot, sched);
  if (!warning.empty()) std::cerr << "warning: " << warning << "\n";
  std::vector<std::uint64_t> checkpoints =
      cfg.checkpoints.empty() ? geometric_checkpoints(cfg.n_steps) : cfg.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());

  Ensemble ens = Ensemble::dirac(
      cfg.n_paths, cfg.x0.value_or(Vector::Zero(static_cast<Eigen::Index>(pot.dim()))),
      cfg.master_seed);
  const StepPlan plan = plan_for(cfg, sched);
  WorkerPool pool(resolve_threads(cfg.threads));
  std::vector<Scratch> scratch;

  auto next = checkpoints.begin();
  for (std::uint64_t k = 0;; ++k) {
    if (next != checkpoints.end() && *next == k) {
      on_checkpoint(ens);
      ++next;
    }
    if (k == cfg.n_steps) break;
    try {
      advance(ens, pot, plan, pool, scratch);
    } catch (const DivergenceError&) {
      throw;
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "step " << k << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
  }
}

std::vector<Snapshot> run_chain(const SamplerConfig& cfg, const Potential& pot,
                                const PenaltySchedule& sched) {
  std::vector<Snapshot> out;
  run_chain(cfg, pot, sched, [&](const Ensemble& e) { out.push_back({e.step_index, e}); });
  return out;
}

std::vector<PgfPoint> integrate_pgf(const Potential& pot, const PenaltySchedule& sched,
                                    double horizon, double dt,
                                    std::span<const double> output_times,
                                    std::optional<Vector> x0) {
  require_positive(dt, "integrate_pgf: dt");
  if (!(horizon >= 0.0)) throw std::invalid_argument("integrate_pgf: horizon must be >= 0");
  if (!pot.minimizer()) {
    throw std::invalid_argument("integrate_pgf: potential needs a known minimizer");
  }
  const std::size_t p = pot.dim();
  const Vector xstar = *pot.minimizer();
  Vector x = x0.value_or(Vector::Zero(static_cast<Eigen::Index>(p)));
  if (static_cast<std::size_t>(x.size()) != p) {
    throw std::invalid_argument("integrate_pgf: x0 dimension mismatch");
  }
  const double limit = 1e6 * (1.0 + xstar.norm());
  const auto n_total = static_cast<std::uint64_t>(std::llround(horizon / dt));

  std::vector<std::uint64_t> record;
  for (double t : output_times) {
    if (!(t >= 0.0 && t <= horizon * (1.0 + 1e-12))) {
      throw std::invalid_argument("integrate_pgf: output time outside [0, horizon]");
    }
    record.push_back(std::min<std::uint64_t>(n_total, std::llround(t / dt)));
  }
  std::sort(record.begin(), record.end());
  record.erase(std::unique(record.begin(), record.end()), record.end());

  std::vector<double> k1(p), k2(p), k3(p), k4(p), tmp(p), g(p);
  auto rhs = [&](double t, const double* y, std::vector<double>& out) {
    pot.gradient(std::span<const double>(y, p), g);
    const double a = sched.alpha(t);
    for (std::size_t i = 0; i < p; ++i) out[i] = -(g[i] + a * y[i]);
  };
  std::vector<PgfPoint> out;
  out.reserve(record.size());
  auto next = record.begin();
  double* y = x.data();
  for (std::uint64_t n = 0;; ++n) {
    const double t = static_cast<double>(n) * dt;
    if (next != record.end() && *next == n) {
      out.push_back({t, x, (x - xstar).norm()});
      ++next;
    }
    if (n == n_total) break;
    rhs(t, y, k1);
    for (std::size_t i = 0; i < p; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
    rhs(t + 0.5 * dt, tmp.data(), k2);
    for (std::size_t i = 0; i < p; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
    rhs(t + 0.5 * dt, tmp.data(), k3);
    for (std::size_t i = 0; i < p; ++i) tmp[i] = y[i] + dt * k3[i];
    rhs(t + dt, tmp.data(), k4);
    double dist2 = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      const double e = y[i] - xstar[static_cast<Eigen::Index>(i)];
      dist2 += e * e;
    }
    if (!(std::sqrt(dist2) <= limit)) {
      std::ostringstream msg;
      msg << "integrate_pgf: divergence at t=" << t + dt << " (distance " << std::sqrt(dist2)
          << ")";
      throw DivergenceError(msg.str());
    }
  }
  return out;
}

}  // namespace plmc
