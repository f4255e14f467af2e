#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace asiplab {

using Symbol = int;

/// I.i.d. product (Bernoulli) measure on the full shift over q symbols.
class BaseMeasureSpec {
 public:
  BaseMeasureSpec() : BaseMeasureSpec({0.5, 0.5}) {}
  /// Throws std::invalid_argument unless q >= 2, all weights are strictly
  /// positive and they sum to 1 within 1e-12.
  explicit BaseMeasureSpec(std::vector<double> weights);

  int alphabet_size() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(Symbol s) const { return weights_.at(static_cast<std::size_t>(s)); }

  /// Inverse-CDF draw of a symbol from a uniform variate in [0, 1).
  Symbol symbol_from_unit(double u) const;

 private:
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// A point of the bilateral shift. Coordinates are never stored: symbol i
/// is a keyed hash of (seed, offset + i) pushed through the measure's
/// inverse CDF, except at explicitly pinned absolute indices.
class BasePoint {
 public:
  BasePoint() = default;
  BasePoint(std::shared_ptr<const BaseMeasureSpec> measure, std::uint64_t seed,
            std::int64_t offset = 0);

  Symbol symbol(std::int64_t i) const;

  /// tau^k of this point: result.symbol(i) == symbol(i + k).
  BasePoint shifted(std::int64_t k) const;

  /// Copy with relative coordinate i pinned to s.
  BasePoint with_symbol(std::int64_t i, Symbol s) const;

  std::uint64_t seed() const { return seed_; }
  std::int64_t offset() const { return offset_; }
  const std::map<std::int64_t, Symbol>& overrides() const { return overrides_; }
  const BaseMeasureSpec& measure() const { return *measure_; }
  const std::shared_ptr<const BaseMeasureSpec>& measure_ptr() const { return measure_; }

  /// Stable identity of the symbol oracle (seed, offset, pins).
  std::uint64_t identity() const;

  friend bool operator==(const BasePoint& a, const BasePoint& b) {
    return a.seed_ == b.seed_ && a.offset_ == b.offset_ && a.overrides_ == b.overrides_;
  }

 private:
  std::shared_ptr<const BaseMeasureSpec> measure_;
  std::uint64_t seed_ = 0;
  std::int64_t offset_ = 0;
  std::map<std::int64_t, Symbol> overrides_;  // keyed by absolute index
};

BasePoint shift(const BasePoint& x, std::int64_t k);

/// Draw x ~ m. Same (master_seed, stream_id) gives the same point.
BasePoint sample_base(const BaseMeasureSpec& spec, std::uint64_t master_seed,
                      std::uint64_t stream_id);
BasePoint sample_base(std::shared_ptr<const BaseMeasureSpec> spec, std::uint64_t master_seed,
                      std::uint64_t stream_id);

struct BaseMetricParams {
  int truncation_window = 48;
  /// Bound on the neglected tail of the series.
  double truncation_error() const;
};

/// sum_{n=0}^{W} 2^{-n} [x_{-n} != x'_{-n}]
double base_distance(const BasePoint& x, const BasePoint& y, const BaseMetricParams& params = {});

/// sum_{|n|<=W} 2^{-|n|} [x_n != x'_n]. Used where a quantity depends on
/// coordinates on both sides of 0.
double two_sided_distance(const BasePoint& x, const BasePoint& y, int window = 48);

/// Function of the coordinate window [lo, hi].
struct BaseObservable {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::function<double(std::span<const Symbol>)> evaluator;
  double holder_exponent = 1.0;

  double operator()(const BasePoint& x) const;
};

/// Indicator of {x_i == s}.
BaseObservable coordinate_indicator(std::int64_t i, Symbol s);

struct DecayRow {
  int n = 0;
  double estimate = 0.0;
  double std_err = 0.0;
  std::size_t n_samples = 0;
};

struct DecayTable {
  std::vector<DecayRow> rows;
  double kappa = 0.0;
  double constant = 0.0;
  double r2 = 0.0;
  std::size_t fit_points = 0;
  bool noise_dominated = false;
};

/// Monte Carlo estimate of m(G o tau^{-n} * F) - m(G) m(F) for each n with
/// delta-method standard errors; kappa is fitted on rows above 2 std errors.
DecayTable base_correlation_check(const BaseMeasureSpec& spec, const BaseObservable& f,
                                  const BaseObservable& g, std::span<const int> n_list,
                                  std::size_t n_samples, std::uint64_t seed);

struct BaseHolderEstimate {
  double sup_norm = 0.0;
  double variation = 0.0;
};

/// Sampled sup |F| and max |F(x)-F(x')| / d_X(x,x')^beta over pairs that
/// differ at a random coordinate -D and are resampled below it. The pair
/// stream depends only on seed, so the estimate is monotone in n_pairs.
BaseHolderEstimate holder_norm_base(const BaseMeasureSpec& spec, const BaseObservable& f,
                                    double beta, std::size_t n_pairs, std::uint64_t seed,
                                    const BaseMetricParams& params = {});

/// Pair (x, x') agreeing on [-depth, depth] and independently resampled on
/// [-(depth+tail), -depth-1] and [depth+1, depth+tail].
std::pair<BasePoint, BasePoint> make_agreeing_pair(const BasePoint& x, int depth, int tail,
                                                   std::uint64_t seed);

/// Pair (x, x') sharing every coordinate i >= -depth, differing at
/// -(depth+1) and independently resampled on [-(depth+tail), -depth-2].
/// base_distance(x, x') is then about 2^{-(depth+1)}.
std::pair<BasePoint, BasePoint> make_past_pair(const BasePoint& x, int depth, int tail,
                                               std::uint64_t seed);

}  // namespace asiplab
