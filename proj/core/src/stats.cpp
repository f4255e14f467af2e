#include "asiplab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace asiplab::stats {

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    comp_ += (sum_ - t) + v;
  } else {
    comp_ += (v - t) + sum_;
  }
  sum_ = t;
}

double sum(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return sum(xs) / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - mu) * (x - mu));
  return s.value() / static_cast<double>(xs.size() - 1);
}

MeanEstimate mean_estimate(std::span<const double> xs) {
  MeanEstimate out;
  out.n = xs.size();
  out.mean = mean(xs);
  if (xs.size() > 1) out.std_err = std::sqrt(variance(xs) / static_cast<double>(xs.size()));
  return out;
}

MeanEstimate covariance_estimate(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("covariance_estimate: size mismatch");
  const double mx = mean(xs);
  const double my = mean(ys);
  std::vector<double> products(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) products[i] = (xs[i] - mx) * (ys[i] - my);
  return mean_estimate(products);
}

LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("linear_fit: size mismatch");
  LinearFit fit;
  fit.n = xs.size();
  if (xs.size() < 2) return fit;
  const double mx = mean(xs);
  const double my = mean(ys);
  CompensatedSum sxx, sxy, syy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx.add((xs[i] - mx) * (xs[i] - mx));
    sxy.add((xs[i] - mx) * (ys[i] - my));
    syy.add((ys[i] - my) * (ys[i] - my));
  }
  if (sxx.value() <= 0.0) return fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy.value() > 0.0 ? (sxy.value() * sxy.value()) / (sxx.value() * syy.value()) : 1.0;
  return fit;
}

double normal_cdf(double x, double sigma) { return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0))); }

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  // Small-lambda branch uses the theta-function form, which converges where
  // the alternating series does not.
  if (lambda < 1.18) {
    const double y = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
    const double pre = std::sqrt(2.0 * M_PI) / lambda;
    double s = 0.0;
    for (int k = 1; k <= 7; k += 2) s += std::pow(y, k * k);
    return 1.0 - pre * s;
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test_normal(std::vector<double> samples, double sigma) {
  if (samples.empty() || !(sigma > 0.0)) throw std::invalid_argument("ks_test_normal: bad input");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = normal_cdf(samples[i], sigma);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sqrt_n = std::sqrt(n);
  KsResult out;
  out.statistic = d;
  out.p_value = kolmogorov_q((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
  return out;
}

double chi_square_sf(double statistic, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

}  // namespace asiplab::stats
