#include "asiplab/base_system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "asiplab/parallel.hpp"
#include "asiplab/rng.hpp"
#include "asiplab/stats.hpp"

namespace asiplab {

BaseMeasureSpec::BaseMeasureSpec(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.size() < 2) throw std::invalid_argument("base measure needs at least 2 symbols");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w > 0.0)) throw std::invalid_argument("base weights must be strictly positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("base weights must sum to 1 (got " + std::to_string(total) + ")");
  }
  cumulative_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
  cumulative_.back() = 1.0;
}

Symbol BaseMeasureSpec::symbol_from_unit(double u) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto s = static_cast<Symbol>(it - cumulative_.begin());
  return std::min(s, alphabet_size() - 1);
}

BasePoint::BasePoint(std::shared_ptr<const BaseMeasureSpec> measure, std::uint64_t seed,
                     std::int64_t offset)
    : measure_(std::move(measure)), seed_(seed), offset_(offset) {
  if (!measure_) throw std::invalid_argument("BasePoint needs a measure");
}

Symbol BasePoint::symbol(std::int64_t i) const {
  const std::int64_t absolute = offset_ + i;
  if (!overrides_.empty()) {
    if (auto it = overrides_.find(absolute); it != overrides_.end()) return it->second;
  }
  const double u = unit_from_bits(hash_combine(seed_, static_cast<std::uint64_t>(absolute)));
  return measure_->symbol_from_unit(u);
}

BasePoint BasePoint::shifted(std::int64_t k) const {
  BasePoint out = *this;
  out.offset_ += k;
  return out;
}

BasePoint BasePoint::with_symbol(std::int64_t i, Symbol s) const {
  if (s < 0 || s >= measure_->alphabet_size()) throw std::out_of_range("symbol outside alphabet");
  BasePoint out = *this;
  out.overrides_[offset_ + i] = s;
  return out;
}

std::uint64_t BasePoint::identity() const {
  std::uint64_t h = hash_combine(seed_, static_cast<std::uint64_t>(offset_));
  for (const auto& [index, s] : overrides_) {
    h = hash_combine(h, static_cast<std::uint64_t>(index) * 31u + static_cast<std::uint64_t>(s));
  }
  return h;
}

BasePoint shift(const BasePoint& x, std::int64_t k) { return x.shifted(k); }

BasePoint sample_base(std::shared_ptr<const BaseMeasureSpec> spec, std::uint64_t master_seed,
                      std::uint64_t stream_id) {
  return BasePoint(std::move(spec), derive_seed(master_seed, stream_id), 0);
}

BasePoint sample_base(const BaseMeasureSpec& spec, std::uint64_t master_seed,
                      std::uint64_t stream_id) {
  return sample_base(std::make_shared<const BaseMeasureSpec>(spec), master_seed, stream_id);
}

double BaseMetricParams::truncation_error() const { return std::ldexp(1.0, -truncation_window + 1); }

double base_distance(const BasePoint& x, const BasePoint& y, const BaseMetricParams& params) {
  double d = 0.0;
  for (int n = 0; n <= params.truncation_window; ++n) {
    if (x.symbol(-n) != y.symbol(-n)) d += std::ldexp(1.0, -n);
  }
  return d;
}

double two_sided_distance(const BasePoint& x, const BasePoint& y, int window) {
  double d = 0.0;
  for (int n = -window; n <= window; ++n) {
    if (x.symbol(n) != y.symbol(n)) d += std::ldexp(1.0, -std::abs(n));
  }
  return d;
}

double BaseObservable::operator()(const BasePoint& x) const {
  std::vector<Symbol> window;
  window.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t i = lo; i <= hi; ++i) window.push_back(x.symbol(i));
  return evaluator(window);
}

BaseObservable coordinate_indicator(std::int64_t i, Symbol s) {
  return {i, i, [s](std::span<const Symbol> w) { return w[0] == s ? 1.0 : 0.0; }, 1.0};
}

DecayTable base_correlation_check(const BaseMeasureSpec& spec, const BaseObservable& f,
                                  const BaseObservable& g, std::span<const int> n_list,
                                  std::size_t n_samples, std::uint64_t seed) {
  if (!std::is_sorted(n_list.begin(), n_list.end())) {
    throw std::invalid_argument("n_list must be increasing");
  }
  auto measure = std::make_shared<const BaseMeasureSpec>(spec);
  const std::size_t cols = n_list.size();
  // values[i] = F(x_i), then G(tau^{-n} x_i) for each n.
  auto values = parallel_map<std::vector<double>>(n_samples, [&](std::size_t i) {
    const BasePoint x = sample_base(measure, seed, i);
    std::vector<double> row(cols + 1);
    row[0] = f(x);
    for (std::size_t c = 0; c < cols; ++c) row[c + 1] = g(x.shifted(-n_list[c]));
    return row;
  });

  DecayTable table;
  std::vector<double> fx(n_samples), gx(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) fx[i] = values[i][0];
  std::vector<double> fit_n, fit_log;
  bool any_signal = false;
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < n_samples; ++i) gx[i] = values[i][c + 1];
    const auto cov = stats::covariance_estimate(fx, gx);
    table.rows.push_back({n_list[c], cov.mean, cov.std_err, n_samples});
    if (std::abs(cov.mean) > 2.0 * cov.std_err && cov.mean != 0.0) {
      any_signal = true;
      fit_n.push_back(n_list[c]);
      fit_log.push_back(std::log(std::abs(cov.mean)));
    }
  }
  table.noise_dominated = !any_signal;
  table.fit_points = fit_n.size();
  if (fit_n.size() >= 2) {
    const auto fit = stats::linear_fit(fit_n, fit_log);
    table.kappa = std::exp(fit.slope);
    table.constant = std::exp(fit.intercept);
    table.r2 = fit.r2;
  }
  return table;
}

BaseHolderEstimate holder_norm_base(const BaseMeasureSpec& spec, const BaseObservable& f,
                                    double beta, std::size_t n_pairs, std::uint64_t seed,
                                    const BaseMetricParams& params) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
  auto measure = std::make_shared<const BaseMeasureSpec>(spec);
  const int q = spec.alphabet_size();
  const int max_depth = std::min(params.truncation_window, 24);
  BaseHolderEstimate out;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    Rng rng(seed, p);
    const BasePoint x = sample_base(measure, seed, 0x100000000ULL + p);
    const int depth = rng.below(max_depth + 1);
    const Symbol original = x.symbol(-depth);
    BasePoint y = x.with_symbol(-depth, (original + 1 + rng.below(q - 1)) % q);
    for (int n = depth + 1; n <= params.truncation_window; ++n) {
      y = y.with_symbol(-n, spec.symbol_from_unit(rng.uniform()));
    }
    const double fx = f(x);
    const double fy = f(y);
    out.sup_norm = std::max({out.sup_norm, std::abs(fx), std::abs(fy)});
    const double d = base_distance(x, y, params);
    if (d > 0.0) out.variation = std::max(out.variation, std::abs(fx - fy) / std::pow(d, beta));
  }
  return out;
}

std::pair<BasePoint, BasePoint> make_agreeing_pair(const BasePoint& x, int depth, int tail,
                                                   std::uint64_t seed) {
  Rng rng(seed);
  const int q = x.measure().alphabet_size();
  BasePoint y = x;
  for (int side : {-1, 1}) {
    for (int j = depth + 1; j <= depth + tail; ++j) {
      const std::int64_t i = side * j;
      Symbol s = x.measure().symbol_from_unit(rng.uniform());
      if (j == depth + 1) s = (x.symbol(i) + 1 + rng.below(q - 1)) % q;
      y = y.with_symbol(i, s);
    }
  }
  return {x, y};
}

std::pair<BasePoint, BasePoint> make_past_pair(const BasePoint& x, int depth, int tail,
                                               std::uint64_t seed) {
  if (depth < 0 || tail < 1) throw std::invalid_argument("make_past_pair: depth >= 0, tail >= 1");
  Rng rng(seed);
  const int q = x.measure().alphabet_size();
  BasePoint y = x;
  for (int j = depth + 1; j <= depth + tail; ++j) {
    Symbol s = x.measure().symbol_from_unit(rng.uniform());
    if (j == depth + 1) s = (x.symbol(-j) + 1 + rng.below(q - 1)) % q;
    y = y.with_symbol(-j, s);
  }
  return {x, y};
}

}  // namespace asiplab
