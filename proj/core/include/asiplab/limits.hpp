#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asiplab/rng.hpp"
#include "asiplab/stats.hpp"
#include "asiplab/thermo.hpp"

namespace asiplab {

/// Two groups of blocks separated by a gap: blocks 1..n use boundaries
/// b_1 < ... < b_{n+1}, blocks n+1..n+m use b_{n+1} < ... < b_{n+m+1} shifted
/// by the gap k.
struct BlockConfig {
  int n = 1;
  int m = 1;
  std::vector<int> boundaries;  ///< n + m + 1 strictly increasing, b_1 >= 0
  std::vector<double> r;        ///< n + m frequencies

  void validate(double eps0) const;
};

struct EncodingResult {
  std::complex<double> lhs;
  std::complex<double> rhs;
  double discrepancy = 0.0;
  double lhs_std_err = 0.0;
  double rhs_std_err = 0.0;
  double combined_std_err = 0.0;
  bool within_contract = false;  ///< discrepancy <= 4 combined std err
};

struct ConditionHRow {
  int k = 0;
  double difference = 0.0;  ///< |joint - block1 * block2|
  double std_err = 0.0;
  double operator_term = 0.0;    ///< |E nu(B2 (L_0^k - Q^k) B1 ...)|
  double covariance_term = 0.0;  ///< |Cov_m(block1, block2)|
};

struct ConditionHResult {
  std::vector<ConditionHRow> rows;
  double c_hat = 0.0;  ///< fitted decay rate of the difference
  double r2 = 0.0;
  std::size_t fit_points = 0;
  bool noise_dominated = false;
  double c_operator = 0.0;  ///< decay rate of the operator term alone
};

struct Assumption6Row {
  int n = 0;
  int draw = 0;
  double sup_norm = 0.0;
  double variation = 0.0;
  double holder_norm = 0.0;
};

struct Assumption6Result {
  std::vector<Assumption6Row> rows;
  std::vector<int> n_list;
  std::vector<double> max_norm_per_n;  ///< max over draws
  double slope = 0.0;                  ///< of log max norm against n
  double max_spread = 0.0;  ///< per draw, max/min of the norm across n; worst draw
  double beta = 0.0;
};

struct CovarianceRow {
  int m = 0;
  double route_a = 0.0;
  double route_a_err = 0.0;
  double operator_part = 0.0;
  double base_part = 0.0;
  double route_b = 0.0;
  double route_b_err = 0.0;
  bool agree = false;
};

struct CovarianceResult {
  std::vector<CovarianceRow> rows;
  double decay_rate = 0.0;  ///< kappa fitted to |s_m| above noise
  double decay_r2 = 0.0;
  std::size_t fit_points = 0;
};

struct VarianceReport {
  std::vector<double> s;
  std::vector<double> s_err;
  int M = 0;
  double tail = 0.0;  ///< |s_M|
  double sigma2_series = 0.0;
  double sigma2_series_err = 0.0;
  double sigma2_mc = 0.0;
  double sigma2_mc_err = 0.0;
  int n_var = 0;
  std::size_t trials = 0;
  bool agreement = false;
  bool truncation_warning = false;
  double mean_g = 0.0;
};

struct CltResult {
  std::string status;  ///< "ok", "degenerate" or "below_floor"
  double ks_stat = 0.0;
  double p_value = 1.0;
  double sample_mean = 0.0;
  double sample_variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double birkhoff_mean = 0.0;  ///< mean of S_n / n over trials
  double birkhoff_mean_err = 0.0;
  double mean_g = 0.0;
  std::vector<double> samples;
};

struct LilResult {
  std::vector<long> checkpoints;
  std::vector<std::vector<double>> running_max;  ///< [trial][checkpoint]
  double median_terminal = 0.0;
};

struct CoboundaryResult {
  std::vector<int> n_list;
  std::vector<double> l2_norm;       ///< ||S_n g - n mu(g)||_{L^2(mu)}
  std::vector<double> quarter_stat;  ///< mean |S_n g - n mu(g)| / n^{1/4}
  double l2_slope = 0.0;             ///< of log l2 against log n
  double quarter_slope = 0.0;
  std::string verdict;  ///< "coboundary-consistent" or "not coboundary"
};

/// Samples mu-stationary fiber orbits backwards: z_n ~ mu_{tau^n x}, then
/// each z_j is drawn among the preimages of z_{j+1} with probability
/// proportional to e^{phi(z)} rho_{tau^j x}(z). Forward floating-point
/// iteration of an expanding map drifts onto Lebesgue-typical orbits, which
/// are mu-null unless phi is cohomologous to -log|T'|.
///
/// rho_{tau^j x} depends on the past x_{j-1}, x_{j-2}, ... only, with
/// exponentially fading memory; densities are tabulated (up to scale) for
/// every past word of length memory().
class GibbsPathSampler {
 public:
  /// memory <= 0 picks the longest word length with at most 4096 words.
  explicit GibbsPathSampler(const ThermoEngine& thermo, int memory = 0);

  int memory() const { return memory_; }
  /// Sup relative change of the tabulated shape when the past is extended
  /// by four more symbols, over a few probe words.
  double memory_error() const { return memory_error_; }

  /// Positions z_0, ..., z_n along the orbit of x (n + 1 values).
  std::vector<double> path(const BasePoint& x, long n, Rng& rng) const;

 private:
  std::size_t word_index(std::span<const Symbol> symbols, long j, long origin) const;
  double density(std::size_t word, double z) const;

  const ThermoEngine* thermo_;
  int memory_ = 0;
  double memory_error_ = 0.0;
  std::vector<std::vector<double>> coeffs_;  // [word] interpolation coefficients
};

struct LimitsNumerics {
  double eps0 = 1.0;
  double sigma2_floor = 1e-3;
  double tail_tol = 1e-4;
  int mean_window = 128;  ///< base-orbit block length for estimating mu(g)
  int sampler_memory = 0;  ///< past-word length of the path sampler; 0 picks it
};

/// Statistical probes of the Birkhoff sums of the discretization's
/// observable. Every probe takes an explicit seed; base samples and orbit
/// trials use independent streams derived from it.
class LimitsEngine {
 public:
  LimitsEngine(const ThermoEngine& thermo, LimitsNumerics numerics = {});

  const ThermoEngine& thermo() const { return *thermo_; }
  const Discretization& disc() const { return thermo_->disc(); }
  const LimitsNumerics& numerics() const { return numerics_; }
  const GibbsPathSampler& sampler() const { return sampler_; }

  /// mu(g): base-orbit block averages of mu_{tau^j x}(g) with the symbol
  /// frequencies of the block as regression control variates.
  stats::MeanEstimate observable_mean(std::size_t n_samples, std::uint64_t seed) const;

  /// Draw z ~ mu_x = rho_x nu_x by node-CDF inversion with in-cell jitter.
  static double sample_fiber_point(const FiberMeasure& nu, const GridFunction& rho, Rng& rng);

  EncodingResult encoding_check(std::span<const double> r, std::size_t n_base_samples,
                                std::uint64_t seed) const;

  ConditionHResult condition_h_check(const BlockConfig& config, std::span<const int> k_list,
                                     std::size_t n_base_samples, std::uint64_t seed) const;

  /// F(x) = nu_{tau^n x}(L_{r_{n-1}} o ... o L_{r_0} rho_x) on pairs; one row per
  /// (n, draw) with sup |F| and the beta-Hölder ratio under the two-sided metric.
  Assumption6Result assumption6_check(std::span<const int> n_list,
                                      const std::vector<std::vector<double>>& r_draws,
                                      std::span<const std::pair<BasePoint, BasePoint>> pairs,
                                      double beta) const;

  CovarianceResult covariance_sequence(int M, std::size_t n_base_samples, std::size_t trials,
                                       std::uint64_t seed) const;

  /// sigma^2 = s_0 + 2 sum_{m=1}^{M} s_m with M the first lag where |s_m| <
  /// tail_tol (up to M_max), cross-checked against Var(S_n g) / n. trials = 0
  /// skips the Monte Carlo half (sigma2_mc stays 0, agreement false).
  VarianceReport sigma2_estimate(int M_max, std::size_t n_base_samples, int n_var,
                                 std::size_t trials, std::uint64_t seed) const;

  /// Samples (S_n g - n mu(g)) / sqrt(n) from independent orbits
  /// (x ~ m, z ~ mu_x) and KS-tests them against N(0, sigma2).
  CltResult clt_test(double sigma2, double mean_g, int n, std::size_t trials,
                     std::uint64_t seed) const;

  LilResult lil_probe(double sigma2, double mean_g, long n_max, std::size_t trials,
                      std::uint64_t seed) const;

  CoboundaryResult coboundary_check(double mean_g, std::span<const int> n_list,
                                    std::size_t trials, std::uint64_t seed) const;

 private:
  /// Values g_{tau^j x}(z_j), j < n, along a mu-stationary path.
  std::vector<double> orbit_values(const BasePoint& x, long n, Rng& rng) const;
  /// Birkhoff sums at the requested (ascending) checkpoints.
  std::vector<double> orbit_sums(const BasePoint& x, std::span<const long> checkpoints,
                                 Rng& rng) const;

  const ThermoEngine* thermo_;
  LimitsNumerics numerics_;
  GibbsPathSampler sampler_;
};

}  // namespace asiplab
