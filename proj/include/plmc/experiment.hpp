#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "plmc/dynamics.hpp"
#include "plmc/potentials.hpp"
#include "plmc/schedules.hpp"

namespace plmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PotentialSpec {
  std::string kind;  // gaussian, cubic, power, pseudo_huber, separable_cubic
  Matrix H;
  Vector mean;
  Vector xstar;
  Vector weights;
  double a = 2.0;
  double b = 1.0;
};

struct ScheduleSpec {
  std::string kind = "zero";  // zero, constant, pld_optimal, pgf_optimal, pgf_rate
  std::optional<double> A;
  std::optional<double> A_mu2_factor;  // A = factor * mu2(pi)
  std::optional<double> D;             // pgf_optimal: default from the certified minimizer-drift constants
  double q = 0.5;
  double c = 0.0;
  std::optional<double> m;  // default: the potential's m
};

struct TargetSpec {
  std::optional<std::size_t> n_samples;  // default n_paths
  std::uint64_t seed = 0;                // default sampler seed + 1
  bool seed_set = false;
};

struct DominanceCheck {
  std::string bound = "prop1";  // thm1 or prop1
  double C = 1.0;               // discretization slack C h
  double factor = 3.0;          // slack multiplier on (MC error + C h)
};

struct RateCheckSpec {
  std::string column;
  double t_lo = 0.0, t_hi = 0.0;
  double slope_lo = 0.0, slope_hi = 0.0;
};

struct ChecksSpec {
  std::optional<DominanceCheck> dominance;
  std::optional<RateCheckSpec> rate;
  bool pgf_dominance = false;        // distance <= bound_pgf everywhere
  bool beats_gradient_flow = false;  // final PGF distance < unpenalized GF's
};

struct PgfSpec {
  double horizon = 1e4;
  double dt = 1e-3;
  double t_min = 1e-2;
  int per_decade = 20;
};

struct BoundCurveSpec {
  std::string kind;  // thm1, prop1, prop1_simplified, prop2, pgf, pgf2
  nlohmann::json params;
};

struct BoundsSpec {
  std::vector<std::string> columns{"thm1", "prop1", "pgf2"};  // sample / pgf outputs
  std::vector<BoundCurveSpec> curves;                        // bounds command
  double t_min = 1.0, t_max = 1e6;
  int t_points = 61;
};

struct ExperimentConfig {
  std::string name = "experiment";
  PotentialSpec potential;
  ScheduleSpec schedule;
  SamplerConfig sampler;
  bool has_sampler = false;
  TargetSpec target;
  BoundsSpec bounds;
  PgfSpec pgf;
  ChecksSpec checks;
  std::optional<std::string> output_dir;
  std::optional<std::string> csv_name;
  std::optional<std::string> summary_name;
};

// JSON document with sections name, potential, schedule, sampler, target,
// bounds, pgf, checks, output. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& command = "sample");

Potential build_potential(const PotentialSpec& spec);
PenaltySchedule build_schedule(const ScheduleSpec& spec, const Potential& pot);

struct RunResult {
  bool pass = true;
  std::filesystem::path csv;
  std::filesystem::path summary;
  nlohmann::json summary_json;
};

// Output directory: output.dir, else $PLMC_OUTPUT_DIR, else the working
// directory.
std::filesystem::path output_dir(const ExperimentConfig& cfg);

// `sample`: simulate and write the checkpoint CSV plus JSON summary.
RunResult run_experiment(const ExperimentConfig& cfg);
// `pgf`: integrate the penalized and unpenalized flows.
RunResult run_pgf(const ExperimentConfig& cfg);
// `bounds`: tabulate the configured bound curves.
RunResult run_bounds(const ExperimentConfig& cfg);

// %.17g
std::string format_real(double v);

}  // namespace plmc
