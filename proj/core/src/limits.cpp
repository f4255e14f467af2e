#include "asiplab/limits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "asiplab/parallel.hpp"
#include "asiplab/rng.hpp"

namespace asiplab {
namespace {

// Sub-stream tags so that base samples, orbit noise and alternative base
// samples drawn from one seed never overlap.
constexpr std::uint64_t kBaseStream = 1;
constexpr std::uint64_t kOrbitStream = 2;
constexpr std::uint64_t kAltBaseStream = 3;
constexpr std::uint64_t kAltOrbitStream = 4;

struct ComplexMean {
  std::complex<double> mean;
  double std_err = 0.0;
};

ComplexMean complex_mean(std::span<const std::complex<double>> v) {
  std::vector<double> re(v.size());
  std::vector<double> im(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    re[i] = v[i].real();
    im[i] = v[i].imag();
  }
  ComplexMean out;
  out.mean = {stats::mean(re), stats::mean(im)};
  if (v.size() > 1) {
    out.std_err = std::sqrt((stats::variance(re) + stats::variance(im)) / static_cast<double>(v.size()));
  }
  return out;
}

BasePoint base_sample(const ThermoEngine& thermo, std::uint64_t seed, std::uint64_t tag,
                      std::size_t i) {
  return sample_base(thermo.spec().base_ptr(), derive_seed(seed, tag), i);
}

// Solves the small dense system a x = b by Gaussian elimination with
// partial pivoting; a is row-major n x n.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    }
    if (a[piv * n + c] == 0.0) throw std::runtime_error("singular control-variate system");
    for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= a[c * n + k] * x[k];
    x[c] = s / a[c * n + c];
  }
  return x;
}

std::vector<double> product(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

struct RouteA {
  std::vector<std::vector<double>> psi;  // [m][sample]
  std::vector<std::vector<double>> op;   // [m][sample]
  double mean_g = 0.0;
};

// Operator route for the covariance sequence. Per base sample the value
// nu_m(g_m L_0^m(g^_0 rho_0)) is computed exactly on the window; the base
// covariance Cov(G_0, G_m) uses the stratum means cbar(e) = E[G_0 | x_0 = e]
// as a control variate whose expectation vanishes for m >= 1.
RouteA route_a(const ThermoEngine& thermo, int M, std::size_t n_base, std::uint64_t seed) {
  const auto& disc = thermo.disc();
  const auto& base = thermo.spec().base();
  const int q = base.alphabet_size();
  struct Sample {
    std::vector<double> op;
    std::vector<double> G;
    std::vector<Symbol> sym;
  };
  const auto samples = parallel_map<Sample>(n_base, [&](std::size_t i) {
    const BasePoint x = base_sample(thermo, seed, kBaseStream, i);
    const OrbitWindow win = thermo.window(x, 0, M);
    Sample s;
    for (int j = 0; j <= M; ++j) {
      s.sym.push_back(win.symbol(j));
      s.G.push_back(win.mu(j, disc.observable_nodes(win.symbol(j))));
    }
    const auto& g0 = disc.observable_nodes(s.sym[0]);
    std::vector<double> h(g0.size());
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = (g0[k] - s.G[0]) * win.rho(0)[static_cast<int>(k)];
    for (int m = 0; m <= M; ++m) {
      if (m > 0) {
        h = disc.apply(win.symbol(m - 1), h);
        for (auto& v : h) v /= win.lambda(m - 1);
      }
      const auto gh = product(disc.observable_nodes(s.sym[static_cast<std::size_t>(m)]), h);
      s.op.push_back(win.nu(m).integrate(GridFunction(gh, disc.interp())));
    }
    return s;
  });

  std::vector<double> cbar(static_cast<std::size_t>(q), 0.0);
  std::vector<double> count(static_cast<std::size_t>(q), 0.0);
  for (const auto& s : samples) {
    cbar[static_cast<std::size_t>(s.sym[0])] += s.G[0];
    count[static_cast<std::size_t>(s.sym[0])] += 1.0;
  }
  double mu = 0.0;
  for (int e = 0; e < q; ++e) {
    const auto ue = static_cast<std::size_t>(e);
    cbar[ue] = count[ue] > 0.0 ? cbar[ue] / count[ue] : 0.0;
    mu += base.weight(e) * cbar[ue];
  }

  RouteA out;
  out.mean_g = mu;
  out.psi.assign(static_cast<std::size_t>(M + 1), std::vector<double>(n_base));
  out.op.assign(static_cast<std::size_t>(M + 1), std::vector<double>(n_base));
  for (std::size_t i = 0; i < n_base; ++i) {
    const auto& s = samples[i];
    const double d0 = s.G[0] - mu;
    const double c0 = cbar[static_cast<std::size_t>(s.sym[0])] - mu;
    for (int m = 0; m <= M; ++m) {
      const auto um = static_cast<std::size_t>(m);
      double base_term = d0 * (s.G[um] - mu);
      if (m > 0) base_term -= c0 * (cbar[static_cast<std::size_t>(s.sym[um])] - mu);
      out.op[um][i] = s.op[um];
      out.psi[um][i] = s.op[um] + base_term;
    }
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

GibbsPathSampler::GibbsPathSampler(const ThermoEngine& thermo, int memory)
    : thermo_(&thermo), memory_(memory) {
  const auto& disc = thermo.disc();
  const int q = thermo.spec().alphabet_size();
  if (memory_ <= 0) {
    memory_ = 1;
    while (std::pow(static_cast<double>(q), memory_ + 1) <= 4096.0) ++memory_;
  }
  const int n = disc.n_points();
  auto normalize = [](std::vector<double>& v) {
    const double m = stats::mean(v);
    for (auto& e : v) e /= m;
  };
  // level l holds A_{w_1} ... A_{w_l} 1 for words w = (x_{-1}, ..., x_{-l}),
  // indexed by sum_i w_i q^{i-1}
  std::vector<std::vector<double>> level(1, std::vector<double>(static_cast<std::size_t>(n), 1.0));
  for (int l = 1; l <= memory_; ++l) {
    std::vector<std::vector<double>> next(level.size() * static_cast<std::size_t>(q));
    for (std::size_t w = 0; w < level.size(); ++w) {
      for (Symbol e = 0; e < q; ++e) {
        auto v = disc.apply(e, level[w]);
        normalize(v);
        next[static_cast<std::size_t>(e) + static_cast<std::size_t>(q) * w] = std::move(v);
      }
    }
    level = std::move(next);
  }

  // probe the memory truncation with a few longer pasts
  Rng rng(0x9e3779b97f4a7c15ULL);
  for (int probe = 0; probe < 8; ++probe) {
    std::vector<Symbol> word(static_cast<std::size_t>(memory_ + 4));
    for (auto& s : word) s = rng.below(q);
    std::vector<double> v(static_cast<std::size_t>(n), 1.0);
    for (std::size_t i = word.size(); i-- > 0;) {
      v = disc.apply(word[i], v);
      normalize(v);
    }
    std::size_t idx = 0;
    for (int i = memory_; i-- > 0;) idx = idx * static_cast<std::size_t>(q) + static_cast<std::size_t>(word[static_cast<std::size_t>(i)]);
    const auto& t = level[idx];
    for (std::size_t k = 0; k < v.size(); ++k) {
      memory_error_ = std::max(memory_error_, std::abs(v[k] - t[k]) / std::abs(v[k]));
    }
  }

  coeffs_ = std::move(level);
  if (disc.interp() == Interp::cubic) {
    for (auto& c : coeffs_) spline_prefilter(std::span<double>(c));
  }
}

std::size_t GibbsPathSampler::word_index(std::span<const Symbol> symbols, long j, long origin) const {
  const auto q = static_cast<std::size_t>(thermo_->spec().alphabet_size());
  std::size_t idx = 0;
  for (long i = memory_; i >= 1; --i) {
    idx = idx * q + static_cast<std::size_t>(symbols[static_cast<std::size_t>(j - i - origin)]);
  }
  return idx;
}

double GibbsPathSampler::density(std::size_t word, double z) const {
  const auto& c = coeffs_[word];
  const Stencil s = make_stencil(thermo_->disc().interp(), static_cast<int>(c.size()), z);
  double acc = 0.0;
  for (int i = 0; i < s.size; ++i) {
    acc += s.weight[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(s.index[static_cast<std::size_t>(i)])];
  }
  return acc;
}

std::vector<double> GibbsPathSampler::path(const BasePoint& x, long n, Rng& rng) const {
  if (n < 0) throw std::invalid_argument("path length must be >= 0");
  const auto& spec = thermo_->spec();
  const long origin = -memory_;
  std::vector<Symbol> symbols(static_cast<std::size_t>(n + memory_));
  for (long j = origin; j < n; ++j) symbols[static_cast<std::size_t>(j - origin)] = x.symbol(j);

  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  const auto end = thermo_->window(x, static_cast<int>(n), static_cast<int>(n));
  z[static_cast<std::size_t>(n)] =
      LimitsEngine::sample_fiber_point(end.nu(static_cast<int>(n)), end.rho(static_cast<int>(n)), rng);

  std::vector<double> pre;
  std::vector<double> weight;
  for (long j = n - 1; j >= 0; --j) {
    const Symbol e = symbols[static_cast<std::size_t>(j - origin)];
    const double w = z[static_cast<std::size_t>(j + 1)];
    const int d = spec.degree(e);
    if (spec.nonlinearity(e) == 0.0) {
      pre.resize(static_cast<std::size_t>(d));
      for (int b = 0; b < d; ++b) pre[static_cast<std::size_t>(b)] = (w + b) / d;
    } else {
      pre = inverse_branches(spec, e, w);
    }
    const std::size_t word = word_index(symbols, j, origin);
    weight.resize(pre.size());
    double total = 0.0;
    for (std::size_t b = 0; b < pre.size(); ++b) {
      weight[b] = std::max(0.0, std::exp(spec.potential(e, pre[b])) * density(word, pre[b]));
      total += weight[b];
    }
    double u = rng.uniform() * total;
    std::size_t pick = 0;
    while (pick + 1 < pre.size() && u >= weight[pick]) {
      u -= weight[pick];
      ++pick;
    }
    z[static_cast<std::size_t>(j)] = pre[pick];
  }
  return z;
}

void BlockConfig::validate(double eps0) const {
  if (n < 1 || m < 1) throw std::invalid_argument("block counts n and m must be >= 1");
  if (static_cast<int>(boundaries.size()) != n + m + 1) {
    throw std::invalid_argument("need n + m + 1 block boundaries");
  }
  if (boundaries.front() < 0) throw std::invalid_argument("block boundaries must be >= 0");
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (boundaries[i] <= boundaries[i - 1]) {
      throw std::invalid_argument("block boundaries must be strictly increasing");
    }
  }
  if (static_cast<int>(r.size()) != n + m) throw std::invalid_argument("need n + m frequencies");
  for (double v : r) {
    if (std::abs(v) > eps0) throw std::invalid_argument("frequency outside |r| <= eps0");
  }
}

LimitsEngine::LimitsEngine(const ThermoEngine& thermo, LimitsNumerics numerics)
    : thermo_(&thermo), numerics_(numerics), sampler_(thermo, numerics.sampler_memory) {
  if (numerics_.mean_window < 1) throw std::invalid_argument("mean_window must be >= 1");
}

stats::MeanEstimate LimitsEngine::observable_mean(std::size_t n_samples, std::uint64_t seed) const {
  if (n_samples < 4) throw std::invalid_argument("observable_mean needs at least 4 samples");
  const auto& base = thermo_->spec().base();
  const int q = base.alphabet_size();
  const int J = numerics_.mean_window;
  const auto nc = static_cast<std::size_t>(q - 1);
  struct Sample {
    double y;
    std::vector<double> f;
  };
  const auto samples = parallel_map<Sample>(n_samples, [&](std::size_t i) {
    const BasePoint x = base_sample(*thermo_, seed, kBaseStream, i);
    const OrbitWindow win = thermo_->window(x, 0, J - 1);
    stats::CompensatedSum acc;
    std::vector<double> freq(static_cast<std::size_t>(q), 0.0);
    for (int j = 0; j < J; ++j) {
      const Symbol e = win.symbol(j);
      acc.add(win.mu(j, disc().observable_nodes(e)));
      freq[static_cast<std::size_t>(e)] += 1.0;
    }
    Sample s{acc.value() / J, std::vector<double>(nc)};
    for (std::size_t e = 0; e < nc; ++e) s.f[e] = freq[e + 1] / J - base.weight(static_cast<Symbol>(e + 1));
    return s;
  });

  const double n = static_cast<double>(n_samples);
  double ybar = 0.0;
  std::vector<double> fbar(nc, 0.0);
  for (const auto& s : samples) {
    ybar += s.y / n;
    for (std::size_t e = 0; e < nc; ++e) fbar[e] += s.f[e] / n;
  }
  std::vector<double> sff(nc * nc, 0.0);
  std::vector<double> sfy(nc, 0.0);
  for (const auto& s : samples) {
    for (std::size_t a = 0; a < nc; ++a) {
      sfy[a] += (s.f[a] - fbar[a]) * (s.y - ybar);
      for (std::size_t b = 0; b < nc; ++b) sff[a * nc + b] += (s.f[a] - fbar[a]) * (s.f[b] - fbar[b]);
    }
  }
  const auto beta = solve_dense(sff, sfy);
  double estimate = ybar;
  for (std::size_t e = 0; e < nc; ++e) estimate -= beta[e] * fbar[e];

  stats::CompensatedSum rss;
  for (const auto& s : samples) {
    double fitted = estimate;
    for (std::size_t e = 0; e < nc; ++e) fitted += beta[e] * s.f[e];
    rss.add((s.y - fitted) * (s.y - fitted));
  }
  stats::MeanEstimate out;
  out.n = n_samples;
  out.mean = estimate;
  out.std_err = std::sqrt(rss.value() / (n - static_cast<double>(q)) / n);
  return out;
}

double LimitsEngine::sample_fiber_point(const FiberMeasure& nu, const GridFunction& rho, Rng& rng) {
  const int n = nu.size();
  std::vector<double> cdf(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    total += std::max(0.0, nu.weights()[static_cast<std::size_t>(i)] * rho[i]);
    cdf[static_cast<std::size_t>(i)] = total;
  }
  if (!(total > 0.0)) throw std::runtime_error("fiber measure has no positive mass");
  const double u = rng.uniform() * total;
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  const int i = std::min(static_cast<int>(it - cdf.begin()), n - 1);
  double z = (i + rng.uniform() - 0.5) / n;
  z -= std::floor(z);
  return z >= 1.0 ? 0.0 : z;
}

std::vector<double> LimitsEngine::orbit_values(const BasePoint& x, long n, Rng& rng) const {
  const auto z = sampler_.path(x, n, rng);
  const auto& spec = thermo_->spec();
  const auto& g = disc().observable();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (long j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] = g(spec, x.symbol(j), z[static_cast<std::size_t>(j)]);
  return out;
}

std::vector<double> LimitsEngine::orbit_sums(const BasePoint& x, std::span<const long> checkpoints,
                                             Rng& rng) const {
  const long last = checkpoints.empty() ? 0 : checkpoints.back();
  const auto vals = orbit_values(x, last, rng);
  std::vector<double> out;
  out.reserve(checkpoints.size());
  stats::CompensatedSum s;
  std::size_t c = 0;
  for (long t = 0; t <= last; ++t) {
    while (c < checkpoints.size() && checkpoints[c] == t) {
      out.push_back(s.value());
      ++c;
    }
    if (t < last) s.add(vals[static_cast<std::size_t>(t)]);
  }
  return out;
}

EncodingResult LimitsEngine::encoding_check(std::span<const double> r, std::size_t n_base_samples,
                                            std::uint64_t seed) const {
  for (double v : r) {
    if (std::abs(v) >= numerics_.eps0 && v != 0.0) {
      throw std::invalid_argument("frequency outside |r| < eps0");
    }
  }
  const int n = static_cast<int>(r.size());
  const auto& spec = thermo_->spec();
  const auto& g = disc().observable();

  const auto lhs = parallel_map<std::complex<double>>(n_base_samples, [&](std::size_t i) {
    const BasePoint x = base_sample(*thermo_, seed, kBaseStream, i);
    Rng rng(derive_seed(seed, kOrbitStream), i);
    const OrbitWindow win = thermo_->window(x, 0, 0);
    double z = sample_fiber_point(win.nu(0), win.rho(0), rng);
    double phase = 0.0;
    for (int j = 0; j < n; ++j) {
      const Symbol e = x.symbol(j);
      phase += r[static_cast<std::size_t>(j)] * g(spec, e, z);
      z = spec.map(e, z);
    }
    return std::polar(1.0, phase);
  });
  const auto rhs = parallel_map<std::complex<double>>(n_base_samples, [&](std::size_t i) {
    const BasePoint x = base_sample(*thermo_, seed, kAltBaseStream, i);
    const OrbitWindow win = thermo_->window(x, -n, 0);
    const auto v = push_perturbed(disc(), win, -n, to_complex(win.rho(-n)), r);
    return win.nu(0).integrate(v);
  });

  const auto l = complex_mean(lhs);
  const auto rr = complex_mean(rhs);
  EncodingResult out;
  out.lhs = l.mean;
  out.rhs = rr.mean;
  out.discrepancy = std::abs(l.mean - rr.mean);
  out.lhs_std_err = l.std_err;
  out.rhs_std_err = rr.std_err;
  out.combined_std_err = std::hypot(l.std_err, rr.std_err);
  out.within_contract = out.discrepancy <= 4.0 * out.combined_std_err + 1e-12;
  return out;
}

ConditionHResult LimitsEngine::condition_h_check(const BlockConfig& config,
                                                 std::span<const int> k_list,
                                                 std::size_t n_base_samples,
                                                 std::uint64_t seed) const {
  config.validate(numerics_.eps0);
  std::vector<int> ks(k_list.begin(), k_list.end());
  if (ks.empty()) throw std::invalid_argument("k_list is empty");
  for (int k : ks) {
    if (k < 0) throw std::invalid_argument("gap k must be >= 0");
  }
  std::sort(ks.begin(), ks.end());
  const auto& b = config.boundaries;
  const int P = b[static_cast<std::size_t>(config.n)];
  const int len2 = b.back() - P;
  const int horizon = P + ks.back() + len2;

  std::vector<double> r1(static_cast<std::size_t>(P), 0.0);
  for (int j = 0; j < config.n; ++j) {
    for (int t = b[static_cast<std::size_t>(j)]; t < b[static_cast<std::size_t>(j + 1)]; ++t) {
      r1[static_cast<std::size_t>(t)] = config.r[static_cast<std::size_t>(j)];
    }
  }
  std::vector<double> r2(static_cast<std::size_t>(len2), 0.0);
  for (int j = config.n; j < config.n + config.m; ++j) {
    for (int t = b[static_cast<std::size_t>(j)]; t < b[static_cast<std::size_t>(j + 1)]; ++t) {
      r2[static_cast<std::size_t>(t - P)] = config.r[static_cast<std::size_t>(j)];
    }
  }

  // Stratum words for the control variates: block 1 on symbols [0, P + k) capped
  // at P + kContext, block 2 on [P + k, P + k + len2 + kContext). The index sets
  // are disjoint, so the two stratum means are exactly independent under m.
  constexpr int kContext = 3;
  const int q = thermo_->spec().base().alphabet_size();
  auto word = [q](const BasePoint& x, int from, int to) {
    std::size_t w = 0;
    for (int t = from; t < to; ++t) w = w * static_cast<std::size_t>(q) + static_cast<std::size_t>(x.symbol(t));
    return w;
  };
  struct Sample {
    std::complex<double> a;
    std::vector<std::complex<double>> b;
    std::vector<std::complex<double>> joint;
    std::vector<std::size_t> word_a;
    std::vector<std::size_t> word_b;
  };
  const auto samples = parallel_map<Sample>(n_base_samples, [&](std::size_t i) {
    const BasePoint x = base_sample(*thermo_, seed, kBaseStream, i);
    const OrbitWindow win = thermo_->window(x, 0, horizon);
    Sample s;
    for (int k : ks) {
      s.word_a.push_back(word(x, 0, P + std::min(k, kContext)));
      s.word_b.push_back(word(x, P + k, P + k + len2 + kContext));
    }
    ComplexGridFunction v = push_perturbed(disc(), win, 0, to_complex(win.rho(0)), r1);
    s.a = win.nu(P).integrate(v);
    int at = 0;
    for (int k : ks) {
      if (k > at) {
        const std::vector<double> zeros(static_cast<std::size_t>(k - at), 0.0);
        v = push_perturbed(disc(), win, P + at, std::move(v), zeros);
        at = k;
      }
      const int end = P + k + len2;
      s.joint.push_back(win.nu(end).integrate(push_perturbed(disc(), win, P + k, v, r2)));
      s.b.push_back(
          win.nu(end).integrate(push_perturbed(disc(), win, P + k, to_complex(win.rho(P + k)), r2)));
    }
    return s;
  });

  const std::size_t n = n_base_samples;
  std::vector<std::complex<double>> as(n);
  for (std::size_t i = 0; i < n; ++i) as[i] = samples[i].a;
  const std::complex<double> abar = complex_mean(as).mean;

  ConditionHResult out;
  std::vector<double> fx;
  std::vector<double> fy;
  std::vector<double> ox;
  std::vector<double> oy;
  for (std::size_t c = 0; c < ks.size(); ++c) {
    std::vector<std::complex<double>> bs(n);
    for (std::size_t i = 0; i < n; ++i) bs[i] = samples[i].b[c];
    const std::complex<double> bbar = complex_mean(bs).mean;
    // leave-one-out stratum means
    std::map<std::size_t, std::pair<std::complex<double>, double>> sa;
    std::map<std::size_t, std::pair<std::complex<double>, double>> sb;
    for (std::size_t i = 0; i < n; ++i) {
      auto& ea = sa[samples[i].word_a[c]];
      ea.first += samples[i].a;
      ea.second += 1.0;
      auto& eb = sb[samples[i].word_b[c]];
      eb.first += samples[i].b[c];
      eb.second += 1.0;
    }
    auto loo = [](const std::pair<std::complex<double>, double>& e, std::complex<double> own,
                  std::complex<double> fallback) {
      return e.second > 1.0 ? (e.first - own) / (e.second - 1.0) : fallback;
    };
    std::vector<std::complex<double>> term1(n);
    std::vector<std::complex<double>> cov(n);
    std::vector<std::complex<double>> psi(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& si = samples[i];
      const std::complex<double> as_i = loo(sa[si.word_a[c]], si.a, abar);
      const std::complex<double> bs_i = loo(sb[si.word_b[c]], si.b[c], bbar);
      term1[i] = si.joint[c] - si.a * si.b[c];
      cov[i] = (si.a - as_i) * (si.b[c] - bbar) + (as_i - abar) * (si.b[c] - bs_i);
      psi[i] = term1[i] + cov[i];
    }
    const auto t1 = complex_mean(term1);
    const auto ps = complex_mean(psi);
    ConditionHRow row;
    row.k = ks[c];
    row.difference = std::abs(ps.mean);
    row.std_err = ps.std_err;
    row.operator_term = std::abs(t1.mean);
    row.covariance_term = std::abs(complex_mean(cov).mean);
    out.rows.push_back(row);
    if (row.difference > 3.0 * row.std_err && row.difference > 1e-14) {
      fx.push_back(row.k);
      fy.push_back(std::log(row.difference));
    }
    if (row.operator_term > 3.0 * t1.std_err && row.operator_term > 1e-14) {
      ox.push_back(row.k);
      oy.push_back(std::log(row.operator_term));
    }
  }
  out.fit_points = fx.size();
  out.noise_dominated = fx.size() < 2;
  if (!out.noise_dominated) {
    const auto lf = stats::linear_fit(fx, fy);
    out.c_hat = -lf.slope;
    out.r2 = lf.r2;
  }
  if (ox.size() >= 2) out.c_operator = -stats::linear_fit(ox, oy).slope;
  return out;
}

Assumption6Result LimitsEngine::assumption6_check(
    std::span<const int> n_list, const std::vector<std::vector<double>>& r_draws,
    std::span<const std::pair<BasePoint, BasePoint>> pairs, double beta) const {
  if (n_list.empty() || r_draws.empty() || pairs.empty()) {
    throw std::invalid_argument("assumption6_check needs n values, draws and pairs");
  }
  std::vector<int> ns(n_list.begin(), n_list.end());
  std::sort(ns.begin(), ns.end());
  const int n_max = ns.back();
  for (const auto& r : r_draws) {
    if (static_cast<int>(r.size()) < n_max) throw std::invalid_argument("r draw shorter than max n");
    for (double v : r) {
      if (std::abs(v) >= numerics_.eps0 && v != 0.0) {
        throw std::invalid_argument("frequency outside |r| < eps0");
      }
    }
  }
  const std::size_t nd = r_draws.size();
  const std::size_t nn = ns.size();

  // F over [draw][n] for one base point
  auto functional = [&](const BasePoint& x) {
    const OrbitWindow win = thermo_->window(x, 0, n_max);
    std::vector<std::vector<std::complex<double>>> f(nd);
    for (std::size_t d = 0; d < nd; ++d) {
      ComplexGridFunction v = to_complex(win.rho(0));
      std::size_t c = 0;
      for (int t = 0; t < n_max; ++t) {
        v = push_perturbed(disc(), win, t, std::move(v),
                           std::span<const double>(&r_draws[d][static_cast<std::size_t>(t)], 1));
        if (c < nn && ns[c] == t + 1) {
          f[d].push_back(win.nu(t + 1).integrate(v));
          ++c;
        }
      }
    }
    return f;
  };
  struct PairValues {
    double dist;
    std::vector<std::vector<std::complex<double>>> fa;
    std::vector<std::vector<std::complex<double>>> fb;
  };
  const auto values = parallel_map<PairValues>(pairs.size(), [&](std::size_t i) {
    return PairValues{two_sided_distance(pairs[i].first, pairs[i].second),
                      functional(pairs[i].first), functional(pairs[i].second)};
  });

  Assumption6Result out;
  out.n_list = ns;
  out.beta = beta;
  out.max_norm_per_n.assign(nn, 0.0);
  std::vector<std::vector<double>> norms(nd, std::vector<double>(nn, 0.0));
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t c = 0; c < nn; ++c) {
      Assumption6Row row;
      row.n = ns[c];
      row.draw = static_cast<int>(d);
      for (const auto& pv : values) {
        const auto fa = pv.fa[d][c];
        const auto fb = pv.fb[d][c];
        row.sup_norm = std::max({row.sup_norm, std::abs(fa), std::abs(fb)});
        if (pv.dist > 0.0) {
          row.variation = std::max(row.variation, std::abs(fa - fb) / std::pow(pv.dist, beta));
        }
      }
      row.holder_norm = row.sup_norm + row.variation;
      norms[d][c] = row.holder_norm;
      out.max_norm_per_n[c] = std::max(out.max_norm_per_n[c], row.holder_norm);
      out.rows.push_back(row);
    }
    const auto [lo, hi] = std::minmax_element(norms[d].begin(), norms[d].end());
    if (*lo > 0.0) out.max_spread = std::max(out.max_spread, *hi / *lo);
  }
  if (nn >= 2) {
    std::vector<double> xs(ns.begin(), ns.end());
    std::vector<double> ys;
    for (double v : out.max_norm_per_n) ys.push_back(std::log(v));
    out.slope = stats::linear_fit(xs, ys).slope;
  }
  return out;
}

CovarianceResult LimitsEngine::covariance_sequence(int M, std::size_t n_base_samples,
                                                   std::size_t trials, std::uint64_t seed) const {
  if (M < 0) throw std::invalid_argument("M must be >= 0");
  const RouteA a = route_a(*thermo_, M, n_base_samples, seed);

  const auto orbits = parallel_map<std::vector<double>>(trials, [&](std::size_t t) {
    const BasePoint x = base_sample(*thermo_, seed, kAltBaseStream, t);
    Rng rng(derive_seed(seed, kAltOrbitStream), t);
    return orbit_values(x, M + 1, rng);
  });

  CovarianceResult out;
  std::vector<double> g0(trials);
  for (std::size_t t = 0; t < trials; ++t) g0[t] = orbits[t][0];
  std::vector<double> fx;
  std::vector<double> fy;
  for (int m = 0; m <= M; ++m) {
    const auto um = static_cast<std::size_t>(m);
    CovarianceRow row;
    row.m = m;
    const auto sa = stats::mean_estimate(a.psi[um]);
    row.route_a = sa.mean;
    row.route_a_err = sa.std_err;
    row.operator_part = stats::mean(a.op[um]);
    row.base_part = row.route_a - row.operator_part;
    if (trials > 1) {
      std::vector<double> gm(trials);
      for (std::size_t t = 0; t < trials; ++t) gm[t] = orbits[t][um];
      const auto sb = stats::covariance_estimate(g0, gm);
      row.route_b = sb.mean;
      row.route_b_err = sb.std_err;
    }
    row.agree = std::abs(row.route_a - row.route_b) <=
                4.0 * std::hypot(row.route_a_err, row.route_b_err) + 1e-12;
    out.rows.push_back(row);
    if (m >= 1 && std::abs(row.route_a) > 3.0 * row.route_a_err && std::abs(row.route_a) > 1e-14) {
      fx.push_back(m);
      fy.push_back(std::log(std::abs(row.route_a)));
    }
  }
  out.fit_points = fx.size();
  if (fx.size() >= 2) {
    const auto lf = stats::linear_fit(fx, fy);
    out.decay_rate = std::exp(lf.slope);
    out.decay_r2 = lf.r2;
  }
  return out;
}

VarianceReport LimitsEngine::sigma2_estimate(int M_max, std::size_t n_base_samples, int n_var,
                                             std::size_t trials, std::uint64_t seed) const {
  if (M_max < 1) throw std::invalid_argument("M_max must be >= 1");
  if (n_var < 1 || trials == 1) throw std::invalid_argument("need n_var >= 1 and trials 0 or >= 2");
  const RouteA a = route_a(*thermo_, M_max, n_base_samples, seed);

  VarianceReport rep;
  rep.mean_g = a.mean_g;
  for (int m = 0; m <= M_max; ++m) {
    const auto e = stats::mean_estimate(a.psi[static_cast<std::size_t>(m)]);
    rep.s.push_back(e.mean);
    rep.s_err.push_back(e.std_err);
  }
  rep.M = M_max;
  for (int m = 1; m <= M_max; ++m) {
    if (std::abs(rep.s[static_cast<std::size_t>(m)]) < numerics_.tail_tol) {
      rep.M = m;
      break;
    }
  }
  rep.tail = std::abs(rep.s[static_cast<std::size_t>(rep.M)]);
  rep.truncation_warning = rep.tail >= numerics_.tail_tol;
  rep.s.resize(static_cast<std::size_t>(rep.M) + 1);
  rep.s_err.resize(static_cast<std::size_t>(rep.M) + 1);

  std::vector<double> total(n_base_samples, 0.0);
  for (std::size_t i = 0; i < n_base_samples; ++i) {
    double v = a.psi[0][i];
    for (int m = 1; m <= rep.M; ++m) v += 2.0 * a.psi[static_cast<std::size_t>(m)][i];
    total[i] = v;
  }
  const auto series = stats::mean_estimate(total);
  rep.sigma2_series = series.mean;
  rep.sigma2_series_err = series.std_err;
  rep.n_var = n_var;
  rep.trials = trials;
  if (trials == 0) return rep;

  const std::vector<long> checkpoint{static_cast<long>(n_var)};
  const auto sums = parallel_map<double>(trials, [&](std::size_t t) {
    const BasePoint x = base_sample(*thermo_, seed, kAltBaseStream, t);
    Rng rng(derive_seed(seed, kAltOrbitStream), t);
    return orbit_sums(x, checkpoint, rng)[0];
  });
  const double var = stats::variance(sums);
  const double mean = stats::mean(sums);
  stats::CompensatedSum m4;
  for (double s : sums) m4.add(std::pow(s - mean, 4));
  const double fourth = m4.value() / static_cast<double>(trials);
  rep.sigma2_mc = var / n_var;
  rep.sigma2_mc_err = std::sqrt(std::max(0.0, fourth - var * var) / static_cast<double>(trials)) / n_var;
  const double tol = std::max(0.05 * std::abs(rep.sigma2_series),
                              4.0 * std::hypot(rep.sigma2_series_err, rep.sigma2_mc_err));
  rep.agreement = std::abs(rep.sigma2_series - rep.sigma2_mc) <= tol;
  return rep;
}

CltResult LimitsEngine::clt_test(double sigma2, double mean_g, int n, std::size_t trials,
                                 std::uint64_t seed) const {
  if (n < 1 || trials < 2) throw std::invalid_argument("need n >= 1 and trials >= 2");
  const std::vector<long> checkpoint{static_cast<long>(n)};
  const auto sums = parallel_map<double>(trials, [&](std::size_t t) {
    const BasePoint x = base_sample(*thermo_, seed, kBaseStream, t);
    Rng rng(derive_seed(seed, kOrbitStream), t);
    return orbit_sums(x, checkpoint, rng)[0];
  });

  CltResult out;
  out.mean_g = mean_g;
  const double root = std::sqrt(static_cast<double>(n));
  std::vector<double> averages(trials);
  out.samples.resize(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    out.samples[t] = (sums[t] - n * mean_g) / root;
    averages[t] = sums[t] / n;
  }
  const auto bm = stats::mean_estimate(averages);
  out.birkhoff_mean = bm.mean;
  out.birkhoff_mean_err = bm.std_err;
  out.sample_mean = stats::mean(out.samples);
  out.sample_variance = stats::variance(out.samples);
  if (out.sample_variance > 0.0) {
    stats::CompensatedSum m3;
    stats::CompensatedSum m4;
    for (double s : out.samples) {
      const double d = s - out.sample_mean;
      m3.add(d * d * d);
      m4.add(d * d * d * d);
    }
    const double nt = static_cast<double>(trials);
    out.skewness = m3.value() / nt / std::pow(out.sample_variance, 1.5);
    out.excess_kurtosis = m4.value() / nt / (out.sample_variance * out.sample_variance) - 3.0;
  }

  const bool all_zero = std::all_of(out.samples.begin(), out.samples.end(),
                                    [](double s) { return std::abs(s) < 1e-12; });
  if (all_zero) {
    out.status = "degenerate";
  } else if (sigma2 <= numerics_.sigma2_floor) {
    out.status = "below_floor";
  } else {
    const auto ks = stats::ks_test_normal(out.samples, std::sqrt(sigma2));
    out.ks_stat = ks.statistic;
    out.p_value = ks.p_value;
    out.status = "ok";
  }
  return out;
}

LilResult LimitsEngine::lil_probe(double sigma2, double mean_g, long n_max, std::size_t trials,
                                  std::uint64_t seed) const {
  if (n_max < 100) throw std::invalid_argument("lil_probe needs n_max >= 100");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("lil_probe needs sigma2 > 0");
  LilResult out;
  for (long n = 100; n <= n_max; n *= 2) out.checkpoints.push_back(n);
  if (out.checkpoints.back() != n_max) out.checkpoints.push_back(n_max);
  const double sigma = std::sqrt(sigma2);

  out.running_max = parallel_map<std::vector<double>>(trials, [&](std::size_t t) {
    const BasePoint x = base_sample(*thermo_, seed, kBaseStream, t);
    Rng rng(derive_seed(seed, kOrbitStream), t);
    const auto vals = orbit_values(x, n_max, rng);
    std::vector<double> rec;
    double s = 0.0;
    double best = 0.0;
    std::size_t c = 0;
    for (long n = 1; n <= n_max; ++n) {
      s += vals[static_cast<std::size_t>(n - 1)] - mean_g;
      if (n >= out.checkpoints.front()) {
        const double dn = static_cast<double>(n);
        best = std::max(best, std::abs(s) / (sigma * std::sqrt(2.0 * dn * std::log(std::log(dn)))));
      }
      if (c < out.checkpoints.size() && out.checkpoints[c] == n) {
        rec.push_back(best);
        ++c;
      }
    }
    return rec;
  });
  std::vector<double> terminal;
  for (const auto& r : out.running_max) terminal.push_back(r.back());
  out.median_terminal = median(std::move(terminal));
  return out;
}

CoboundaryResult LimitsEngine::coboundary_check(double mean_g, std::span<const int> n_list,
                                                std::size_t trials, std::uint64_t seed) const {
  if (n_list.empty() || trials < 2) throw std::invalid_argument("need n values and trials >= 2");
  std::vector<long> checkpoints(n_list.begin(), n_list.end());
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.front() < 1) throw std::invalid_argument("n values must be >= 1");
  const auto sums = parallel_map<std::vector<double>>(trials, [&](std::size_t t) {
    const BasePoint x = base_sample(*thermo_, seed, kBaseStream, t);
    Rng rng(derive_seed(seed, kOrbitStream), t);
    return orbit_sums(x, checkpoints, rng);
  });

  CoboundaryResult out;
  std::vector<double> ln;
  std::vector<double> ll;
  std::vector<double> lq;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const double n = static_cast<double>(checkpoints[c]);
    stats::CompensatedSum sq;
    stats::CompensatedSum ab;
    for (const auto& s : sums) {
      const double d = s[c] - n * mean_g;
      sq.add(d * d);
      ab.add(std::abs(d));
    }
    const double nt = static_cast<double>(trials);
    out.n_list.push_back(static_cast<int>(checkpoints[c]));
    out.l2_norm.push_back(std::sqrt(sq.value() / nt));
    out.quarter_stat.push_back(ab.value() / nt / std::pow(n, 0.25));
    if (out.l2_norm.back() > 0.0 && out.quarter_stat.back() > 0.0) {
      ln.push_back(std::log(n));
      ll.push_back(std::log(out.l2_norm.back()));
      lq.push_back(std::log(out.quarter_stat.back()));
    }
  }
  if (ln.size() >= 2) {
    out.l2_slope = stats::linear_fit(ln, ll).slope;
    out.quarter_slope = stats::linear_fit(ln, lq).slope;
  } else {
    out.l2_slope = 0.0;
    out.quarter_slope = 0.0;
  }
  out.verdict = out.l2_slope < 0.1 ? "coboundary-consistent" : "not coboundary";
  return out;
}

}  // namespace asiplab
