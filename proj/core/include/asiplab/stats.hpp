#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace asiplab::stats {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double sum(std::span<const double> xs);
double mean(std::span<const double> xs);
/// Unbiased sample variance.
double variance(std::span<const double> xs);

struct MeanEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::size_t n = 0;
};

MeanEstimate mean_estimate(std::span<const double> xs);

/// Covariance of paired samples with a delta-method standard error.
MeanEstimate covariance_estimate(std::span<const double> xs, std::span<const double> ys);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x. Needs at least two
/// distinct abscissae; r2 is 1 for an exact two-point fit.
LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys);

double normal_cdf(double x, double sigma = 1.0);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Complementary Kolmogorov distribution Q(lambda) = P(K > lambda).
double kolmogorov_q(double lambda);

/// One-sample Kolmogorov-Smirnov test against N(0, sigma^2), using the
/// finite-sample corrected asymptotic p-value.
KsResult ks_test_normal(std::vector<double> samples, double sigma);

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi_square_sf(double statistic, double dof);

}  // namespace asiplab::stats
