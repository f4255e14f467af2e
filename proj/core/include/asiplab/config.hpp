#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "asiplab/fiber_system.hpp"
#include "asiplab/grid.hpp"
#include "asiplab/limits.hpp"
#include "asiplab/thermo.hpp"

namespace asiplab {

struct BaseSection {
  std::vector<double> weights{0.5, 0.5};
  int metric_window = 48;
};

struct FiberSection {
  std::vector<int> branch_count{2, 3};
  std::vector<double> nonlinearity{0.0, 0.0};
  double potential_t = 0.0;
  std::vector<double> potential_amp{0.1, 0.15};
  std::vector<double> observable_offset{0.2, -0.1};
  double observable_amplitude = 1.0;
  std::vector<double> observable_phase{0.0, 0.25};
  /// "harmonic", "coboundary" or "constant"
  std::string observable_kind = "harmonic";
  double observable_scale = 1.0;
  double observable_constant = 0.0;
  double coboundary_amp = 1.0;
};

/// Non-positive eta, xi, h_tilde select the defaults of SystemSpec.
struct HolderSection {
  double alpha = 1.0;
  double eta = 0.0;
  double xi = 0.0;
  double h_tilde = 0.0;
};

struct NumericsSection {
  int n_points = 1024;
  std::string interp = "cubic";
  int depth = 40;
  int depth_max = 160;
  double duality_tol = 1e-6;
  double eps0 = 1.0;
  double sigma2_floor = 1e-3;
  double tail_tol = 1e-4;
  int mean_window = 128;
  int sampler_memory = 0;
};

struct StatisticsSection {
  std::uint64_t seed = 42;
  std::size_t trials = 2000;
  int n = 10000;
  std::size_t n_base_samples = 2000;
  std::size_t mean_samples = 2000;
};

struct ThermoExperiment {
  std::size_t x_samples = 20;
  std::size_t u_samples = 50;
  std::size_t regularity_pairs = 40;
  std::vector<int> regularity_n_list{1, 5};
  std::vector<double> beta_candidates{0.25, 0.5, 0.75, 1.0};
  double residual_tol = 1e-6;
  double mass_tol = 1e-8;
};

struct GapExperiment {
  std::size_t instances = 20;
  int n_max = 20;
  /// "trig" (random degree <= 3 trigonometric polynomials) or "tent"
  std::string test_functions = "trig";
  double min_r2 = 0.98;
};

struct BoundsExperiment {
  std::size_t x_samples = 8;
  std::vector<double> r_grid{-1.0, -0.5, -0.25, 0.25, 0.5, 1.0};
  int n_max = 12;
  double max_slope = 0.01;
  std::size_t uniform_x_samples = 100;
  int uniform_n_max = 30;
  std::size_t cone_instances = 50;
  int cone_n_max = 8;
  double cone_s = 1.0;
};

struct EncodingExperiment {
  std::size_t draws = 10;
  int n_max = 6;
  double r_max = 0.5;
  /// base samples per Monte Carlo side of each draw
  std::size_t mc_samples = 500;
};

struct ConditionHExperiment {
  int n = 1;
  int m = 1;
  std::vector<int> boundaries{0, 1, 2};
  std::vector<double> r{0.4, 0.4};
  std::vector<int> k_list{0, 1, 2, 3, 4, 5, 6, 7, 8};
};

struct Assumption6Experiment {
  std::vector<int> n_list{2, 4, 8};
  std::size_t draws = 5;
  std::size_t pairs = 40;
  double r_max = 0.5;
  double beta = 0.25;
  double max_spread = 2.0;
};

struct DecayBaseExperiment {
  std::vector<int> n_list{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t samples = 100000;
  double max_z = 3.0;
};

struct Sigma2Experiment {
  int M_max = 40;
};

struct CltExperiment {
  double p_min = 0.01;
  bool scale_check = true;
  double scale_tol = 0.1;
};

struct LilExperiment {
  long n_max = 100000;
  std::size_t trials = 200;
  double median_lo = 0.5;
  double median_hi = 1.5;
};

struct CoboundaryExperiment {
  std::vector<int> n_list{100, 1000, 10000};
  std::size_t trials = 400;
  double c = 0.2;
  double k_amp = 1.0;
  double sigma2_max = 0.01;
};

struct ExperimentSection {
  ThermoExperiment thermo;
  GapExperiment gap;
  BoundsExperiment bounds;
  EncodingExperiment encoding;
  ConditionHExperiment condition_h;
  Assumption6Experiment assumption6;
  DecayBaseExperiment decay_base;
  Sigma2Experiment sigma2;
  CltExperiment clt;
  LilExperiment lil;
  CoboundaryExperiment coboundary;
};

/// Fully resolved experiment configuration. Every field has a default; the
/// JSON form mirrors the member names section by section.
struct ExperimentConfig {
  BaseSection base;
  FiberSection fiber;
  HolderSection holder;
  NumericsSection numerics;
  StatisticsSection statistics;
  ExperimentSection experiment;
};

/// Malformed text, unknown keys and type mismatches. what() names the key
/// path or the line and column.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a JSON document over the defaults. Unknown keys are an error.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies "dotted.path=value" overrides. The value is read as JSON when it
/// parses, otherwise as a string.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Canonical JSON text (sorted keys, two-space indent).
std::string to_json_text(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical compact JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

SystemSpec make_system(const ExperimentConfig& config);
FiberObservable make_observable(const ExperimentConfig& config);
ThermoNumerics make_thermo_numerics(const ExperimentConfig& config);
LimitsNumerics make_limits_numerics(const ExperimentConfig& config);

}  // namespace asiplab
