#include "plmc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "plmc/bounds.hpp"
#include "plmc/exactlaw.hpp"
#include "plmc/metrics.hpp"

namespace plmc {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

using nlohmann::json;

const char* type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "boolean";
    case json::value_t::string: return "string";
    case json::value_t::array: return "array";
    case json::value_t::object: return "table";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "integer";
    case json::value_t::number_float: return "number";
    default: return "value";
  }
}

// One table of the config, tracking which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", std::string("expected table, got ") + type_name(j_));
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string where = path_;
    if (!key.empty()) where += (where.empty() ? "" : ".") + key;
    throw ConfigError(where + ": " + what);
  }

  const json* get(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::optional<double> number(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) fail(key, std::string("expected number, got ") + type_name(*v));
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "expected a finite number");
    return x;
  }
  double number_req(const std::string& key) {
    auto v = number(key);
    if (!v) fail(key, "required");
    return *v;
  }

  std::optional<std::uint64_t> integer(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    return as_integer(*v, key);
  }
  std::uint64_t integer_req(const std::string& key) {
    auto v = integer(key);
    if (!v) fail(key, "required");
    return *v;
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(key, std::string("expected string, got ") + type_name(*v));
    return v->get<std::string>();
  }
  std::string string_req(const std::string& key) {
    auto v = string(key);
    if (!v) fail(key, "required");
    return *v;
  }

  std::optional<bool> boolean(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) fail(key, std::string("expected boolean, got ") + type_name(*v));
    return v->get<bool>();
  }

  std::optional<Vector> vector(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_array() || v->empty()) fail(key, "expected non-empty array of numbers");
    Vector out(static_cast<Eigen::Index>(v->size()));
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) {
        fail(key, std::string("expected array of numbers, got element ") + type_name((*v)[i]));
      }
      out[static_cast<Eigen::Index>(i)] = (*v)[i].get<double>();
    }
    return out;
  }

  std::optional<Matrix> matrix(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_array() || v->empty()) fail(key, "expected array of rows");
    const std::size_t n = v->size();
    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const json& row = (*v)[i];
      if (!row.is_array() || row.size() != n) fail(key, "expected a square matrix");
      for (std::size_t k = 0; k < n; ++k) {
        if (!row[k].is_number()) fail(key, "expected numeric matrix entries");
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
      }
    }
    return out;
  }

  std::optional<std::vector<std::uint64_t>> integers(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail(key, std::string("expected array of integers, got ") + type_name(*v));
    std::vector<std::uint64_t> out;
    for (const auto& e : *v) out.push_back(as_integer(e, key));
    return out;
  }

  std::optional<std::vector<std::string>> strings(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail(key, std::string("expected array of strings, got ") + type_name(*v));
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) fail(key, "expected array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::optional<Section> table(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    return Section(*v, path_.empty() ? key : path_ + "." + key);
  }

  // Unknown keys are errors.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) fail(it.key(), "unknown key");
    }
  }

  const std::string& path() const { return path_; }

 private:
  std::uint64_t as_integer(const json& v, const std::string& key) const {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      const auto x = v.get<std::int64_t>();
      if (x < 0) fail(key, "expected non-negative integer");
      return static_cast<std::uint64_t>(x);
    }
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (x >= 0.0 && x < 1.8e19 && std::floor(x) == x) return static_cast<std::uint64_t>(x);
      fail(key, "expected non-negative integer");
    }
    fail(key, std::string("expected integer, got ") + type_name(v));
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void parse_potential(Section s, PotentialSpec& p) {
  p.kind = s.string_req("kind");
  if (p.kind == "gaussian") {
    auto H = s.matrix("H");
    auto Hd = s.vector("H_diag");
    if (H && Hd) s.fail("H", "give either H or H_diag, not both");
    if (!H && !Hd) s.fail("H", "required");
    p.H = H ? *H : Matrix(Hd->asDiagonal());
    p.mean = s.vector("mean").value_or(Vector::Zero(p.H.rows()));
    if (p.mean.size() != p.H.rows()) s.fail("mean", "dimension does not match H");
  } else if (p.kind == "cubic" || p.kind == "power" || p.kind == "pseudo_huber" ||
             p.kind == "separable_cubic") {
    auto xs = s.vector("xstar");
    if (!xs) s.fail("xstar", "required");
    p.xstar = *xs;
    if (p.kind == "power") p.a = s.number_req("a");
    if (p.kind == "pseudo_huber") p.b = s.number("b").value_or(1.0);
    if (p.kind == "separable_cubic") {
      auto w = s.vector("weights");
      if (!w) s.fail("weights", "required");
      p.weights = *w;
    }
  } else {
    s.fail("kind", "unknown potential kind '" + p.kind + "'");
  }
  s.finish();
}

void parse_schedule(Section s, ScheduleSpec& sc) {
  sc.kind = s.string("kind").value_or("zero");
  sc.A = s.number("A");
  sc.A_mu2_factor = s.number("A_mu2_factor");
  sc.D = s.number("D");
  sc.q = s.number("q").value_or(0.5);
  sc.c = s.number("c").value_or(0.0);
  sc.m = s.number("m");
  static const std::set<std::string> kinds{"zero", "constant", "pld_optimal", "pgf_optimal",
                                           "pgf_rate"};
  if (!kinds.count(sc.kind)) s.fail("kind", "unknown schedule kind '" + sc.kind + "'");
  if (sc.kind == "constant" && !s.has("c")) s.fail("c", "required");
  if (sc.kind == "pld_optimal" || sc.kind == "pgf_rate") {
    if (sc.A && sc.A_mu2_factor) s.fail("A", "give either A or A_mu2_factor, not both");
    if (!sc.A && !sc.A_mu2_factor) s.fail("A", "required");
  }
  s.finish();
}

MidpointAlpha parse_midpoint_alpha(Section& s) {
  const auto v = s.string("midpoint_alpha");
  if (!v || *v == "midpoint_time") return MidpointAlpha::midpoint_time;
  if (*v == "start_time") return MidpointAlpha::start_time;
  s.fail("midpoint_alpha", "expected 'midpoint_time' or 'start_time'");
}

void parse_sampler(Section s, SamplerConfig& c) {
  const std::string variant = s.string_req("variant");
  try {
    c.variant = variant_from_string(variant);
  } catch (const std::invalid_argument& e) {
    s.fail("variant", e.what());
  }
  c.h = s.number_req("h");
  c.n_steps = s.integer_req("n_steps");
  c.n_paths = s.integer("n_paths").value_or(10000);
  c.R = static_cast<int>(s.integer("R").value_or(1));
  c.tau = s.number("tau").value_or(1.0);
  c.master_seed = s.integer("seed").value_or(0);
  c.checkpoints = s.integers("checkpoints").value_or(std::vector<std::uint64_t>{});
  const auto per_decade = s.integer("checkpoints_per_decade");
  if (per_decade) {
    if (!c.checkpoints.empty()) s.fail("checkpoints", "give checkpoints or checkpoints_per_decade");
    c.checkpoints = geometric_checkpoints(c.n_steps, static_cast<int>(*per_decade));
  }
  if (auto x0 = s.vector("x0")) c.x0 = *x0;
  c.threads = static_cast<unsigned>(s.integer("threads").value_or(0));
  c.midpoint_alpha = parse_midpoint_alpha(s);
  if (!(c.h > 0.0)) s.fail("h", "must be > 0");
  if (!(c.tau > 0.0)) s.fail("tau", "must be > 0");
  if (c.R < 1) s.fail("R", "must be >= 1");
  if (c.n_paths == 0) s.fail("n_paths", "must be >= 1");
  if (c.tau != 1.0 && c.variant != Variant::tpld_euler) {
    s.fail("tau", "only the tpld_euler variant is tempered");
  }
  if (c.R != 1 && c.variant != Variant::rlmc_parallel) {
    s.fail("R", "only the rlmc_parallel variant uses R");
  }
  s.finish();
}

void parse_checks(Section s, ChecksSpec& c) {
  if (auto d = s.table("dominance")) {
    DominanceCheck dc;
    dc.bound = d->string("bound").value_or("prop1");
    if (dc.bound != "prop1" && dc.bound != "thm1") d->fail("bound", "expected 'prop1' or 'thm1'");
    dc.C = d->number("C").value_or(1.0);
    dc.factor = d->number("factor").value_or(3.0);
    d->finish();
    c.dominance = dc;
  }
  if (auto r = s.table("rate")) {
    RateCheckSpec rc;
    rc.column = r->string_req("column");
    rc.t_lo = r->number_req("t_lo");
    rc.t_hi = r->number_req("t_hi");
    rc.slope_lo = r->number_req("slope_lo");
    rc.slope_hi = r->number_req("slope_hi");
    if (!(rc.t_lo > 0.0 && rc.t_hi > rc.t_lo)) r->fail("t_hi", "need 0 < t_lo < t_hi");
    r->finish();
    c.rate = rc;
  }
  c.pgf_dominance = s.boolean("pgf_dominance").value_or(false);
  c.beats_gradient_flow = s.boolean("beats_gradient_flow").value_or(false);
  s.finish();
}

void parse_bounds(Section s, BoundsSpec& b) {
  if (auto cols = s.strings("columns")) {
    for (const auto& c : *cols) {
      if (c != "thm1" && c != "prop1" && c != "pgf2") {
        s.fail("columns", "unknown bound column '" + c + "'");
      }
    }
    b.columns = *cols;
  }
  if (const json* curves = s.get("curves")) {
    if (!curves->is_array()) s.fail("curves", "expected array of tables");
    for (std::size_t i = 0; i < curves->size(); ++i) {
      const json& c = (*curves)[i];
      if (!c.is_object() || !c.contains("kind") || !c["kind"].is_string()) {
        s.fail("curves", "entry " + std::to_string(i) + " needs a string 'kind'");
      }
      BoundCurveSpec spec;
      spec.kind = c["kind"].get<std::string>();
      spec.params = c;
      spec.params.erase("kind");
      b.curves.push_back(std::move(spec));
    }
  }
  b.t_min = s.number("t_min").value_or(b.t_min);
  b.t_max = s.number("t_max").value_or(b.t_max);
  b.t_points = static_cast<int>(s.integer("t_points").value_or(static_cast<std::uint64_t>(b.t_points)));
  if (!(b.t_min > 0.0 && b.t_max > b.t_min)) s.fail("t_max", "need 0 < t_min < t_max");
  if (b.t_points < 2) s.fail("t_points", "must be >= 2");
  s.finish();
}

void parse_pgf(Section s, PgfSpec& p) {
  p.horizon = s.number("horizon").value_or(p.horizon);
  p.dt = s.number("dt").value_or(p.dt);
  p.t_min = s.number("t_min").value_or(p.t_min);
  p.per_decade = static_cast<int>(s.integer("per_decade").value_or(20));
  if (!(p.dt > 0.0)) s.fail("dt", "must be > 0");
  if (!(p.horizon > p.t_min && p.t_min > 0.0)) s.fail("horizon", "need 0 < t_min < horizon");
  if (p.per_decade < 1) s.fail("per_decade", "must be >= 1");
  s.finish();
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::optional<double> mu2_of(const Potential& pot) {
  if (pot.kind() == PotentialKind::gaussian || pot.dim() == 1) return target_moment(pot, 0.0, 2);
  return std::nullopt;
}

}  // namespace

Potential build_potential(const PotentialSpec& p) {
  if (p.kind == "gaussian") return Potential::gaussian(p.H, p.mean);
  if (p.kind == "cubic") return Potential::cubic(p.xstar);
  if (p.kind == "power") return Potential::power(p.a, p.xstar);
  if (p.kind == "pseudo_huber") return Potential::pseudo_huber(p.b, p.xstar);
  if (p.kind == "separable_cubic") return Potential::separable_cubic(p.weights, p.xstar);
  throw ConfigError("potential.kind: unknown potential kind '" + p.kind + "'");
}

PenaltySchedule build_schedule(const ScheduleSpec& s, const Potential& pot) {
  const double m = s.m.value_or(pot.m());
  auto resolve_A = [&]() {
    if (s.A) return *s.A;
    const auto mu2 = mu2_of(pot);
    if (!mu2) {
      throw ConfigError("schedule.A_mu2_factor: mu2 is only available for Gaussian or 1-D targets");
    }
    return *s.A_mu2_factor * *mu2;
  };
  if (s.kind == "zero") return PenaltySchedule::zero(m);
  if (s.kind == "constant") return PenaltySchedule::constant(s.c, m);
  if (s.kind == "pld_optimal") return PenaltySchedule::pld_optimal(resolve_A(), m);
  if (s.kind == "pgf_rate") return PenaltySchedule::pgf_rate(s.q, resolve_A(), m);
  if (s.kind == "pgf_optimal") {
    const double D = s.D ? *s.D : assumption_a_constants(pot).D;
    return PenaltySchedule::pgf_optimal(D, s.q);
  }
  throw ConfigError("schedule.kind: unknown schedule kind '" + s.kind + "'");
}

ExperimentConfig parse_config(const std::string& text, const std::string& command) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  Section root(doc, "");
  ExperimentConfig cfg;
  cfg.name = root.string("name").value_or("experiment");

  const bool needs_potential = command != "bounds";
  if (auto s = root.table("potential")) {
    parse_potential(*s, cfg.potential);
  } else if (needs_potential) {
    root.fail("potential", "required");
  }
  if (auto s = root.table("schedule")) parse_schedule(*s, cfg.schedule);
  if (auto s = root.table("sampler")) {
    parse_sampler(*s, cfg.sampler);
    cfg.has_sampler = true;
  } else if (command == "sample") {
    root.fail("sampler", "required");
  }
  if (auto s = root.table("target")) {
    if (auto n = s->integer("n_samples")) cfg.target.n_samples = *n;
    if (auto seed = s->integer("seed")) {
      cfg.target.seed = *seed;
      cfg.target.seed_set = true;
    }
    s->finish();
  }
  if (auto s = root.table("bounds")) parse_bounds(*s, cfg.bounds);
  if (command == "bounds" && cfg.bounds.curves.empty()) root.fail("bounds.curves", "required");
  if (auto s = root.table("pgf")) parse_pgf(*s, cfg.pgf);
  if (auto s = root.table("checks")) parse_checks(*s, cfg.checks);
  if (auto s = root.table("output")) {
    cfg.output_dir = s->string("dir");
    cfg.csv_name = s->string("csv");
    cfg.summary_name = s->string("summary");
    s->finish();
  }
  root.finish();

  // Validate everything that can be checked without simulating.
  if (needs_potential) {
    try {
      const Potential pot = build_potential(cfg.potential);
      const PenaltySchedule sched = build_schedule(cfg.schedule, pot);
      if (cfg.has_sampler && command == "sample") (void)validate(cfg.sampler, pot, sched);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (cfg.checks.dominance && command == "sample") {
    const auto& cols = cfg.bounds.columns;
    if (std::find(cols.begin(), cols.end(), cfg.checks.dominance->bound) == cols.end()) {
      throw ConfigError("checks.dominance.bound: bound '" + cfg.checks.dominance->bound +
                        "' is not among bounds.columns");
    }
  }
  return cfg;
}

std::filesystem::path output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir) return *cfg.output_dir;
  if (const char* env = std::getenv("PLMC_OUTPUT_DIR"); env && *env) return env;
  return std::filesystem::current_path();
}

namespace {

struct Outputs {
  std::filesystem::path csv, summary;
};

Outputs open_outputs(const ExperimentConfig& cfg, const std::string& suffix) {
  const auto dir = output_dir(cfg);
  std::filesystem::create_directories(dir);
  return {dir / cfg.csv_name.value_or(cfg.name + suffix + ".csv"),
          dir / cfg.summary_name.value_or(cfg.name + suffix + ".summary.json")};
}

void write_summary(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string field(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// pi^tau for a tempered run: density proportional to exp(-f / tau).
Potential tempered(const Potential& pot, double tau) {
  if (tau == 1.0) return pot;
  CustomParams c;
  c.dim = pot.dim();
  c.m = pot.m() / tau;
  c.M = pot.M() / tau;
  c.value = [pot, tau](std::span<const double> x) { return pot.value(x) / tau; };
  c.gradient = [pot, tau](std::span<const double> x, std::span<double> g) {
    pot.gradient(x, g);
    for (double& v : g) v /= tau;
  };
  c.minimizer = pot.minimizer();
  c.name = to_string(pot.kind()) + "/tau";
  return Potential::custom(std::move(c));
}

// Samples of N(mean, cov) from the target stream (one path per sample).
SampleSet gaussian_samples(const GaussianLaw& law, std::size_t n, const CounterRng& rng,
                           std::uint64_t stream_offset) {
  const Eigen::Index p = law.mean.size();
  const Eigen::LLT<Matrix> llt(law.cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("target covariance not SPD");
  const Matrix L = llt.matrixL();
  std::vector<double> pts(n * static_cast<std::size_t>(p));
  Vector z(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < p; ++d) {
      z[d] = rng.normal(stream_offset + i, 0, static_cast<std::uint32_t>(d));
    }
    const Vector x = law.mean + L * z;
    std::copy(x.data(), x.data() + p, pts.begin() + static_cast<std::ptrdiff_t>(i) * p);
  }
  return SampleSet::from_points(std::move(pts), static_cast<std::size_t>(p),
                                SampleOrigin::target_iid);
}

double empirical_w2(const SampleSet& a, const SampleSet& b) {
  if (a.dim == 1) return w2_empirical_1d(a, b);
  const std::size_t n = std::min<std::size_t>(512, std::min(a.n, b.n));
  return w2_empirical_assignment(a.subsample(n), b.subsample(n));
}

std::vector<double> geometric_times(double lo, double hi, int per_decade) {
  std::vector<double> t;
  const int count = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade));
  for (int i = 0; i <= count; ++i) {
    t.push_back(std::min(hi, lo * std::pow(10.0, static_cast<double>(i) / per_decade)));
  }
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

json slope_or_null(const std::vector<double>& t, const std::vector<double>& v, double lo,
                   double hi) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= lo && t[i] <= hi && v[i] > 0.0 && std::isfinite(v[i])) {
      x.push_back(t[i]);
      y.push_back(v[i]);
    }
  }
  if (x.size() < 5) return nullptr;
  return rate_fit(x, y);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  Stopwatch clock;
  const Potential pot = build_potential(cfg.potential);
  const PenaltySchedule sched = build_schedule(cfg.schedule, pot);
  const SamplerConfig& sc = cfg.sampler;
  const std::string warning = validate(sc, pot, sched);

  const bool penalized = sc.variant == Variant::pld_euler || sc.variant == Variant::tpld_euler ||
                         sc.variant == Variant::pld_midpoint;
  const double tau = sc.variant == Variant::tpld_euler ? sc.tau : 1.0;
  const PenaltySchedule law_sched = penalized ? sched : PenaltySchedule::zero(pot.m());
  const auto mu2 = mu2_of(pot);
  const auto* gauss = std::get_if<GaussianParams>(&pot.params());

  // Target samples: set A for the W2 column, set B only to pin the Monte
  // Carlo error of two independent samples of the same size.
  const std::uint64_t target_seed = cfg.target.seed_set ? cfg.target.seed : sc.master_seed + 1;
  const CounterRng target_rng(target_seed, StreamDomain::target);
  const std::size_t n_target = cfg.target.n_samples.value_or(sc.n_paths);
  std::optional<SampleSet> target_a, target_b;
  std::optional<GaussianLaw> target_law;
  if (gauss) {
    GaussianLaw law = gaussian_target(gauss->H, gauss->mean, 0.0);
    law.cov *= tau;
    target_law = law;
    target_a = gaussian_samples(law, n_target, target_rng, 0);
    target_b = gaussian_samples(law, n_target, target_rng, n_target);
  } else if (pot.dim() == 1) {
    const Potential tp = tempered(pot, tau);
    target_a = sample_target_1d(tp, 0.0, n_target, target_rng, 0);
    target_b = sample_target_1d(tp, 0.0, n_target, target_rng, 1);
  }
  if (target_a && pot.dim() == 1 && n_target != sc.n_paths) {
    throw ConfigError("target.n_samples: must equal sampler.n_paths for 1-D empirical W2");
  }
  const double mc_error = target_a ? empirical_w2(*target_a, *target_b) : NAN;

  const auto has_col = [&](const char* c) {
    return std::find(cfg.bounds.columns.begin(), cfg.bounds.columns.end(), c) !=
           cfg.bounds.columns.end();
  };
  const auto* pld = std::get_if<PldOptimalTag>(&sched.tag());

  const Outputs out = open_outputs(cfg, "");
  std::ofstream csv(out.csv, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + out.csv.string());
  csv << "t,w2_empirical,w2_exact,bound_thm1,bound_prop1,bound_pgf2,n_paths,h,seed\n";

  std::vector<double> ts, emp, exact, thm1, prop1;
  const Vector x0 = sc.x0.value_or(Vector::Zero(static_cast<Eigen::Index>(pot.dim())));
  std::uint64_t current = 0;
  json summary;
  summary["name"] = cfg.name;
  summary["command"] = "sample";
  summary["potential"] = to_string(pot.kind());
  summary["schedule"] = sched.name();
  summary["variant"] = to_string(sc.variant);
  summary["n_paths"] = sc.n_paths;
  summary["h"] = sc.h;
  summary["tau"] = tau;
  summary["seed"] = sc.master_seed;
  summary["mu2"] = mu2 ? json(*mu2) : json(nullptr);
  summary["mc_std_error"] = std::isnan(mc_error) ? json(nullptr) : json(mc_error);
  summary["warnings"] = warning.empty() ? json::array() : json::array({warning});
  summary["csv"] = out.csv.string();
  summary["failure"] = nullptr;

  auto on_checkpoint = [&](const Ensemble& ens) {
    current = ens.step_index;
    const double t = static_cast<double>(ens.step_index) * sc.h;
    std::optional<double> w_emp, w_exact, b_thm1, b_prop1;
    if (target_a) w_emp = empirical_w2(SampleSet::from_ensemble(ens), *target_a);
    if (gauss) {
      const std::vector<double> tg{t};
      const auto law =
          propagate_gaussian_pld(gauss->H, law_sched, tau, tg, GaussianLaw::dirac(x0), &gauss->mean);
      w_exact = w2_gaussian(law.front(), *target_law);
    }
    if (mu2 && tau == 1.0 && has_col("thm1") && pot.m() + law_sched.alpha(t) > 0.0) {
      b_thm1 = bound_theorem1(law_sched, pot.m(), *mu2, t);
    }
    if (mu2 && tau == 1.0 && has_col("prop1") && pld && penalized) {
      b_prop1 = bound_prop1(pld->A, *mu2, t);
    }
    csv << format_real(t) << ',' << field(w_emp) << ',' << field(w_exact) << ','
        << field(b_thm1) << ',' << field(b_prop1) << ",," << sc.n_paths << ','
        << format_real(sc.h) << ',' << sc.master_seed << '\n';
    ts.push_back(t);
    emp.push_back(w_emp.value_or(NAN));
    exact.push_back(w_exact.value_or(NAN));
    thm1.push_back(b_thm1.value_or(NAN));
    prop1.push_back(b_prop1.value_or(NAN));
  };

  try {
    run_chain(sc, pot, sched, on_checkpoint);
  } catch (const std::exception& e) {
    std::ostringstream msg;
    msg << "after checkpoint step " << current << ": " << e.what();
    csv << "FAILED," << csv_quote(msg.str()) << ",,,,,,,\n";
    csv.flush();
    summary["status"] = "fail";
    summary["failure"] = msg.str();
    summary["rows"] = ts.size();
    summary["runtime_s"] = clock.seconds();
    write_summary(out.summary, summary);
    throw std::runtime_error(msg.str());
  }
  csv.flush();
  if (!csv) throw std::runtime_error("error writing " + out.csv.string());

  bool pass = true;
  json checks = json::array();
  if (cfg.checks.dominance) {
    const auto& d = *cfg.checks.dominance;
    const std::vector<double>& bound = d.bound == "thm1" ? thm1 : prop1;
    const double slack = d.factor * ((std::isnan(mc_error) ? 0.0 : mc_error) + d.C * sc.h);
    bool ok = true;
    double worst = INFINITY;
    json counter = nullptr;
    std::size_t compared = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (std::isnan(emp[i]) || std::isnan(bound[i])) continue;
      ++compared;
      const double margin = bound[i] + slack - emp[i];
      worst = std::min(worst, margin);
      if (!(margin >= 0.0) && ok) {
        ok = false;
        counter = {{"t", ts[i]}, {"w2_empirical", emp[i]}, {"bound", bound[i]}, {"slack", slack}};
      }
    }
    if (compared == 0) ok = false;
    checks.push_back({{"name", "dominance:" + d.bound}, {"pass", ok}, {"slack", slack},
                      {"worst_margin", worst}, {"compared", compared}, {"counterexample", counter}});
    pass = pass && ok;
  }
  if (gauss) {
    // The exact law must sit below bound_theorem1 without slack.
    bool ok = true;
    double worst = INFINITY;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (std::isnan(thm1[i])) continue;
      worst = std::min(worst, thm1[i] - exact[i]);
      ok = ok && exact[i] <= thm1[i] + 1e-9;
    }
    if (std::isfinite(worst)) {
      checks.push_back({{"name", "dominance_exact:thm1"}, {"pass", ok}, {"worst_margin", worst}});
      pass = pass && ok;
    }
  }
  const double t_end = ts.empty() ? 0.0 : ts.back();
  json fits = json::object();
  fits["w2_empirical"] = slope_or_null(ts, emp, t_end / 100.0, t_end);
  fits["w2_exact"] = slope_or_null(ts, exact, t_end / 100.0, t_end);
  fits["bound_thm1"] = slope_or_null(ts, thm1, t_end / 100.0, t_end);
  fits["bound_prop1"] = slope_or_null(ts, prop1, t_end / 100.0, t_end);
  if (cfg.checks.rate) {
    const auto& r = *cfg.checks.rate;
    const std::vector<double>* col = nullptr;
    if (r.column == "w2_empirical") col = &emp;
    if (r.column == "w2_exact") col = &exact;
    if (r.column == "bound_thm1") col = &thm1;
    if (r.column == "bound_prop1") col = &prop1;
    if (!col) throw ConfigError("checks.rate.column: unknown column '" + r.column + "'");
    const json slope = slope_or_null(ts, *col, r.t_lo, r.t_hi);
    const bool ok = !slope.is_null() && slope.get<double>() >= r.slope_lo &&
                    slope.get<double>() <= r.slope_hi;
    checks.push_back({{"name", "rate:" + r.column}, {"pass", ok}, {"slope", slope},
                      {"window", {r.slope_lo, r.slope_hi}}, {"t_range", {r.t_lo, r.t_hi}}});
    pass = pass && ok;
  }
  summary["rows"] = ts.size();
  summary["rate_fits"] = fits;
  summary["checks"] = checks;
  summary["status"] = pass ? "pass" : "fail";
  summary["runtime_s"] = clock.seconds();
  write_summary(out.summary, summary);
  return {pass, out.csv, out.summary, summary};
}

RunResult run_pgf(const ExperimentConfig& cfg) {
  Stopwatch clock;
  const Potential pot = build_potential(cfg.potential);
  if (!pot.minimizer()) throw ConfigError("potential: the flow needs a known minimizer");
  PenaltySchedule sched = build_schedule(cfg.schedule, pot);
  if (sched.m() != 0.0) sched = sched.with_m(0.0);
  const auto& P = cfg.pgf;

  std::vector<double> times{0.0};
  for (double t : geometric_times(P.t_min, P.horizon, P.per_decade)) times.push_back(t);
  const auto flow = integrate_pgf(pot, sched, P.horizon, P.dt, times);
  const auto plain = integrate_pgf(pot, PenaltySchedule::zero(), P.horizon, P.dt, times);

  // Bound constants: the schedule's own (D, q) when given, else certified.
  const AssumptionAConstants k =
      cfg.schedule.D ? AssumptionAConstants{*cfg.schedule.D, cfg.schedule.q}
                     : assumption_a_constants(pot);
  const double r = pot.minimizer()->norm();
  const auto* rate_tag = std::get_if<PgfRateTag>(&sched.tag());

  const Outputs out = open_outputs(cfg, ".pgf");
  std::ofstream csv(out.csv, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + out.csv.string());
  csv << "t,distance,distance_gf,bound_pgf,bound_pgf2\n";
  std::vector<double> ts, dist, bpgf;
  bool dominated = true;
  json counter = nullptr;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    const double t = flow[i].t;
    const double b = bound_pgf(k.D, k.q, sched, r, t);
    std::optional<double> b2;
    if (rate_tag && k.q < 1.0 && k.D > 0.0) b2 = bound_pgf2(rate_tag->A, k.D, k.q, r, t);
    csv << format_real(t) << ',' << format_real(flow[i].distance) << ','
        << format_real(plain[i].distance) << ',' << format_real(b) << ',' << field(b2) << '\n';
    ts.push_back(t);
    dist.push_back(flow[i].distance);
    bpgf.push_back(b);
    if (flow[i].distance > b * (1.0 + 1e-12) && dominated) {
      dominated = false;
      counter = {{"t", t}, {"distance", flow[i].distance}, {"bound_pgf", b}};
    }
  }
  csv.flush();

  bool pass = true;
  json checks = json::array();
  if (cfg.checks.pgf_dominance) {
    checks.push_back({{"name", "dominance:bound_pgf"}, {"pass", dominated},
                      {"counterexample", counter}});
    pass = pass && dominated;
  }
  if (cfg.checks.beats_gradient_flow) {
    const double a = flow.back().distance, b = plain.back().distance;
    const bool ok = a < b;
    checks.push_back({{"name", "beats_gradient_flow"}, {"pass", ok}, {"distance_pgf", a},
                      {"distance_gf", b}, {"t", flow.back().t}});
    pass = pass && ok;
  }
  if (cfg.checks.rate) {
    const auto& rc = *cfg.checks.rate;
    if (rc.column != "distance") throw ConfigError("checks.rate.column: expected 'distance'");
    const json slope = slope_or_null(ts, dist, rc.t_lo, rc.t_hi);
    const bool ok = !slope.is_null() && slope.get<double>() >= rc.slope_lo &&
                    slope.get<double>() <= rc.slope_hi;
    checks.push_back({{"name", "rate:distance"}, {"pass", ok}, {"slope", slope},
                      {"window", {rc.slope_lo, rc.slope_hi}}, {"t_range", {rc.t_lo, rc.t_hi}}});
    pass = pass && ok;
  }
  json summary;
  summary["name"] = cfg.name;
  summary["command"] = "pgf";
  summary["potential"] = to_string(pot.kind());
  summary["schedule"] = sched.name();
  summary["D"] = k.D;
  summary["q"] = k.q;
  summary["norm_xstar"] = r;
  summary["dt"] = P.dt;
  summary["horizon"] = P.horizon;
  summary["rows"] = ts.size();
  summary["csv"] = out.csv.string();
  summary["rate_fits"] = {{"distance", slope_or_null(ts, dist, P.horizon / 100.0, P.horizon)},
                          {"bound_pgf", slope_or_null(ts, bpgf, P.horizon / 100.0, P.horizon)}};
  summary["checks"] = checks;
  summary["warnings"] = json::array();
  summary["failure"] = nullptr;
  summary["status"] = pass ? "pass" : "fail";
  summary["runtime_s"] = clock.seconds();
  write_summary(out.summary, summary);
  return {pass, out.csv, out.summary, summary};
}

namespace {

std::function<double(double)> curve_function(const BoundCurveSpec& spec, BoundParams& params) {
  Section s(spec.params, "bounds.curves[" + spec.kind + "]");
  std::function<double(double)> fn;
  if (spec.kind == "thm1") {
    const double m = s.number("m").value_or(0.0), mu2 = s.number_req("mu2");
    ScheduleSpec ss;
    if (auto t = s.table("schedule")) parse_schedule(*t, ss);
    if (!ss.A && ss.kind == "pld_optimal" && ss.A_mu2_factor) ss.A = *ss.A_mu2_factor * mu2;
    ss.A_mu2_factor.reset();
    ss.m = m;
    const Potential dummy = Potential::gaussian(Matrix::Identity(1, 1));
    const PenaltySchedule sched = build_schedule(ss, dummy);
    params.m = m;
    params.mu2 = mu2;
    fn = [sched, m, mu2](double t) { return bound_theorem1(sched, m, mu2, t); };
  } else if (spec.kind == "prop1") {
    const double A = s.number_req("A"), mu2 = s.number_req("mu2");
    params.A = A;
    params.mu2 = mu2;
    fn = [A, mu2](double t) { return bound_prop1(A, mu2, t); };
  } else if (spec.kind == "prop1_simplified") {
    const double mu2 = s.number_req("mu2");
    params.mu2 = mu2;
    fn = [mu2](double t) { return bound_prop1_simplified(mu2, t); };
  } else if (spec.kind == "prop2") {
    const double tau = s.number_req("tau"), mu2 = s.number_req("mu2_tau");
    params.tau = tau;
    params.mu2 = mu2;
    fn = [tau, mu2](double t) { return bound_prop2_tpld(tau, mu2, t); };
  } else if (spec.kind == "pgf2") {
    const double A = s.number_req("A"), D = s.number_req("D"), q = s.number_req("q"),
                 r = s.number_req("norm_xstar");
    params.A = A;
    params.D = D;
    params.q = q;
    params.norm_xstar = r;
    fn = [A, D, q, r](double t) { return bound_pgf2(A, D, q, r, t); };
  } else if (spec.kind == "pgf") {
    const double D = s.number_req("D"), q = s.number_req("q"), r = s.number_req("norm_xstar");
    ScheduleSpec ss;
    ss.kind = "pgf_optimal";
    ss.D = D;
    ss.q = q;
    if (auto t = s.table("schedule")) parse_schedule(*t, ss);
    ss.m = 0.0;
    const Potential dummy = Potential::gaussian(Matrix::Identity(1, 1));
    const PenaltySchedule sched = build_schedule(ss, dummy);
    params.D = D;
    params.q = q;
    params.norm_xstar = r;
    fn = [sched, D, q, r](double t) { return bound_pgf(D, q, sched, r, t); };
  } else {
    throw ConfigError("bounds.curves: unknown bound kind '" + spec.kind + "'");
  }
  s.finish();
  return fn;
}

json params_json(const BoundParams& p) {
  json j = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  put("m", p.m);
  put("mu2", p.mu2);
  put("A", p.A);
  put("D", p.D);
  put("q", p.q);
  put("tau", p.tau);
  put("norm_xstar", p.norm_xstar);
  return j;
}

}  // namespace

RunResult run_bounds(const ExperimentConfig& cfg) {
  Stopwatch clock;
  const auto& B = cfg.bounds;
  std::vector<double> t(static_cast<std::size_t>(B.t_points));
  for (int i = 0; i < B.t_points; ++i) {
    t[static_cast<std::size_t>(i)] =
        B.t_min * std::pow(B.t_max / B.t_min, static_cast<double>(i) / (B.t_points - 1));
  }
  std::vector<BoundCurve> curves;
  for (const auto& spec : B.curves) {
    BoundParams params;
    const auto fn = curve_function(spec, params);
    curves.push_back(tabulate(t, spec.kind, fn, params));
  }
  const Outputs out = open_outputs(cfg, ".bounds");
  std::ofstream csv(out.csv, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + out.csv.string());
  csv << "t,value,label,params\n";
  json fits = json::object();
  for (const auto& c : curves) {
    const std::string p = params_json(c.params).dump();
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      csv << format_real(c.t[i]) << ',' << format_real(c.values[i]) << ',' << c.label << ','
          << csv_quote(p) << '\n';
    }
    fits[c.label] = c.t.size() >= 5 ? json(rate_fit(c.t, c.values)) : json(nullptr);
  }
  csv.flush();
  json summary;
  summary["name"] = cfg.name;
  summary["command"] = "bounds";
  summary["rows"] = curves.size() * t.size();
  summary["csv"] = out.csv.string();
  summary["rate_fits"] = fits;
  summary["checks"] = json::array();
  summary["warnings"] = json::array();
  summary["failure"] = nullptr;
  summary["status"] = "pass";
  summary["runtime_s"] = clock.seconds();
  write_summary(out.summary, summary);
  return {true, out.csv, out.summary, summary};
}

}  // namespace plmc
