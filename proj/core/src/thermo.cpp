#include "asiplab/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "asiplab/parallel.hpp"
#include "asiplab/stats.hpp"

namespace asiplab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double mass(std::span<const double> w) { return stats::sum(w); }

double dot(std::span<const double> a, std::span<const double> b) {
  stats::CompensatedSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) acc.add(a[i] * b[i]);
  return acc.value();
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void scale(std::vector<double>& v, double s) {
  for (auto& x : v) x *= s;
}

}  // namespace

const char* to_string(GapFit::Status status) {
  switch (status) {
    case GapFit::Status::measured: return "measured";
    case GapFit::Status::gap_too_strong: return "gap too strong to measure at this N";
    case GapFit::Status::no_gap: return "no gap";
  }
  return "unknown";
}

OrbitWindow::OrbitWindow(BasePoint x, int first, int last, std::vector<FiberMeasure> nu,
                         std::vector<double> lambda, std::vector<GridFunction> rho)
    : x_(std::move(x)), first_(first), last_(last), nu_(std::move(nu)),
      lambda_(std::move(lambda)), rho_(std::move(rho)) {
  const auto count = static_cast<std::size_t>(last_ - first_ + 1);
  if (last_ < first_ || nu_.size() != count || lambda_.size() != count || rho_.size() != count) {
    throw std::invalid_argument("inconsistent orbit window");
  }
}

namespace {

std::size_t window_slot(int j, int first, int last) {
  if (j < first || j > last) {
    throw std::out_of_range("fiber " + std::to_string(j) + " outside window [" +
                            std::to_string(first) + ", " + std::to_string(last) + "]");
  }
  return static_cast<std::size_t>(j - first);
}

}  // namespace

const FiberMeasure& OrbitWindow::nu(int j) const { return nu_[window_slot(j, first_, last_)]; }
const GridFunction& OrbitWindow::rho(int j) const { return rho_[window_slot(j, first_, last_)]; }
double OrbitWindow::lambda(int j) const { return lambda_[window_slot(j, first_, last_)]; }

std::vector<double> OrbitWindow::lambdas(int from, int count) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int j = from; j < from + count; ++j) out.push_back(lambda(j));
  return out;
}

double OrbitWindow::mu(int j, std::span<const double> h) const {
  const auto& w = nu(j).weights();
  const auto& r = rho(j).values();
  stats::CompensatedSum acc;
  for (std::size_t i = 0; i < w.size(); ++i) acc.add(w[i] * r[i] * h[i]);
  return acc.value();
}

ThermoEngine::ThermoEngine(const Discretization& disc, ThermoNumerics numerics)
    : disc_(&disc), numerics_(numerics) {
  if (numerics_.depth < 2 || numerics_.depth_max < numerics_.depth) {
    throw std::invalid_argument("need 2 <= depth <= depth_max");
  }
}

FiberMeasure ThermoEngine::pullback_measure(const BasePoint& x, int depth) const {
  if (depth < 1) throw std::invalid_argument("pullback depth must be >= 1");
  const int n = n_points();
  std::vector<double> w(static_cast<std::size_t>(n), 1.0 / n);
  for (int j = depth - 1; j >= 0; --j) {
    w = disc_->adjoint(x.symbol(j), w);
    scale(w, 1.0 / mass(w));
  }
  return FiberMeasure(std::move(w), FiberTag{x.identity(), 0});
}

ConformalResult ThermoEngine::conformal_pullback(const BasePoint& x, int depth) const {
  auto lambda_at = [&](int k, FiberMeasure* nu_out, double* residual) {
    FiberMeasure nu_x = pullback_measure(x, k);
    FiberMeasure nu_tx = pullback_measure(x.shifted(1), k);
    const Symbol e = x.symbol(0);
    std::vector<double> pulled = disc_->adjoint(e, nu_tx.weights());
    const double lambda = mass(pulled);
    if (residual) {
      double l1 = 0.0;
      for (std::size_t i = 0; i < pulled.size(); ++i) {
        l1 += std::abs(pulled[i] / lambda - nu_x.weights()[i]);
      }
      *residual = l1;
    }
    if (nu_out) *nu_out = std::move(nu_x);
    return lambda;
  };
  ConformalResult out;
  out.depth = depth;
  out.lambda = lambda_at(depth, &out.nu, &out.duality_residual);
  if (depth > 2) out.depth_delta = std::abs(out.lambda - lambda_at(depth - 2, nullptr, nullptr));
  out.converged = out.duality_residual <= numerics_.duality_tol;
  return out;
}

ConformalResult ThermoEngine::conformal(const BasePoint& x) const {
  int k = numerics_.depth;
  while (true) {
    ConformalResult r = conformal_pullback(x, k);
    if (r.converged || k >= numerics_.depth_max) return r;
    k = std::min(2 * k, numerics_.depth_max);
  }
}

DensityResult ThermoEngine::invariant_density(const BasePoint& x, int depth, bool with_cesaro) const {
  if (depth < 1) throw std::invalid_argument("density depth must be >= 1");
  const int n = n_points();
  const FiberMeasure nu = pullback_measure(x, std::max(depth, numerics_.depth));

  // raw push of 1 from tau^{-k} x to x, renormalized by nu_x
  auto push_one = [&](int k) {
    std::vector<double> v(static_cast<std::size_t>(n), 1.0);
    for (int j = -k; j < 0; ++j) {
      v = disc_->apply(x.symbol(j), v);
      scale(v, 1.0 / mass(v));
    }
    scale(v, 1.0 / dot(nu.weights(), v));
    return v;
  };

  DensityResult out;
  out.rho = GridFunction(push_one(depth), disc_->interp(), FiberTag{x.identity(), 0});
  if (with_cesaro) {
    const int lo = depth / 2;
    std::vector<double> avg(static_cast<std::size_t>(n), 0.0);
    for (int k = lo; k < depth; ++k) {
      const auto v = push_one(k);
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += v[i];
    }
    scale(avg, 1.0 / (depth - lo));
    out.cesaro_difference = sup_diff(avg, out.rho.values());
    out.cesaro = GridFunction(std::move(avg), disc_->interp(), FiberTag{x.identity(), 0});
  }
  return out;
}

ThermoState ThermoEngine::state(const BasePoint& x) const {
  const ConformalResult conf = conformal(x);
  ThermoState s;
  s.x = x;
  s.depth = conf.depth;
  s.nu = conf.nu;
  s.depth_delta = conf.depth_delta;
  s.duality_residual = conf.duality_residual;
  s.converged = conf.converged;

  s.rho = invariant_density(x, conf.depth).rho;
  const GridFunction rho_next = invariant_density(x.shifted(1), conf.depth).rho;
  std::vector<double> pushed = disc_->apply(x.symbol(0), s.rho.values());
  scale(pushed, 1.0 / conf.lambda);
  s.fixed_point_residual = sup_diff(pushed, rho_next.values());
  const auto [lo, hi] = std::minmax_element(s.rho.values().begin(), s.rho.values().end());
  s.rho_min = *lo;
  s.rho_max = *hi;

  s.lambda_chain = window(x, 0, conf.depth - 1).lambdas(0, conf.depth);
  return s;
}

OrbitWindow ThermoEngine::window(const BasePoint& x, int first, int last) const {
  if (last < first) throw std::invalid_argument("window needs first <= last");
  const int n = n_points();
  const int depth = numerics_.depth;
  const int horizon = last + depth;
  const auto count = static_cast<std::size_t>(last - first + 1);

  std::vector<FiberMeasure> nus(count);
  std::vector<double> lambdas(count);
  std::vector<double> w(static_cast<std::size_t>(n), 1.0 / n);
  for (int j = horizon - 1; j >= first; --j) {
    w = disc_->adjoint(x.symbol(j), w);
    const double lam = mass(w);
    scale(w, 1.0 / lam);
    if (j <= last) {
      lambdas[static_cast<std::size_t>(j - first)] = lam;
      nus[static_cast<std::size_t>(j - first)] = FiberMeasure(w, FiberTag{x.identity(), j});
    }
  }

  std::vector<GridFunction> rhos(count);
  std::vector<double> v(static_cast<std::size_t>(n), 1.0);
  for (int j = first - depth; j < first; ++j) {
    v = disc_->apply(x.symbol(j), v);
    scale(v, 1.0 / mass(v));
  }
  scale(v, 1.0 / dot(nus[0].weights(), v));
  rhos[0] = GridFunction(v, disc_->interp(), FiberTag{x.identity(), first});
  for (int j = first; j < last; ++j) {
    v = disc_->apply(x.symbol(j), v);
    scale(v, 1.0 / lambdas[static_cast<std::size_t>(j - first)]);
    rhos[static_cast<std::size_t>(j + 1 - first)] =
        GridFunction(v, disc_->interp(), FiberTag{x.identity(), j + 1});
  }
  return OrbitWindow(x, first, last, std::move(nus), std::move(lambdas), std::move(rhos));
}

GridFunction push_normalized(const Discretization& disc, const OrbitWindow& w, int from,
                             GridFunction u, int n) {
  std::vector<double> v = std::move(u.values());
  for (int j = from; j < from + n; ++j) {
    v = disc.apply(w.symbol(j), v);
    scale(v, 1.0 / w.lambda(j));
  }
  return GridFunction(std::move(v), disc.interp(), FiberTag{w.anchor().identity(), from + n});
}

ComplexGridFunction push_perturbed(const Discretization& disc, const OrbitWindow& w, int from,
                                   ComplexGridFunction u, std::span<const double> r) {
  std::vector<std::complex<double>> v = std::move(u.values());
  const int n = static_cast<int>(r.size());
  for (int j = from; j < from + n; ++j) {
    v = disc.apply_twisted(w.symbol(j), v, r[static_cast<std::size_t>(j - from)]);
    const double inv = 1.0 / w.lambda(j);
    for (auto& val : v) val *= inv;
  }
  return ComplexGridFunction(std::move(v), disc.interp(), FiberTag{w.anchor().identity(), from + n});
}

GapFit ThermoEngine::gap_estimate(std::span<const std::pair<BasePoint, GridFunction>> instances,
                                  int n_max) const {
  if (n_max < 2) throw std::invalid_argument("gap fit needs n_max >= 2");
  const auto& hp = spec().holder();
  GapFit fit;
  fit.instances = parallel_map<GapInstance>(instances.size(), [&](std::size_t i) {
    const auto& [x, u] = instances[i];
    const OrbitWindow win = window(x, 0, n_max);
    const double norm = holder_norm(u, hp.alpha, hp.eta);
    const double mass0 = win.nu(0).integrate(u);
    GapInstance inst;
    std::vector<double> v = u.values();
    for (int n = 1; n <= n_max; ++n) {
      v = disc_->apply(win.symbol(n - 1), v);
      scale(v, 1.0 / win.lambda(n - 1));
      const auto& rho = win.rho(n).values();
      double m = 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) m = std::max(m, std::abs(v[k] - mass0 * rho[k]));
      inst.residual.push_back(norm > 0.0 ? m / norm : 0.0);
    }
    return inst;
  });

  // kappa from the mean log residual across instances, which averages out
  // the symbol-sequence scatter; C is then the smallest constant that makes
  // C kappa^n dominate every instance.
  fit.envelope.assign(static_cast<std::size_t>(n_max), 0.0);
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k < fit.envelope.size(); ++k) {
    double log_sum = 0.0;
    bool above = !fit.instances.empty();
    for (const auto& inst : fit.instances) {
      fit.envelope[k] = std::max(fit.envelope[k], inst.residual[k]);
      above = above && inst.residual[k] > 100.0 * kEps;
      if (above) log_sum += std::log(inst.residual[k]);
    }
    if (above) {
      xs.push_back(static_cast<double>(k + 1));
      ys.push_back(log_sum / static_cast<double>(fit.instances.size()));
    }
  }
  fit.fit_points = xs.size();
  if (xs.size() < 3) {
    fit.status = GapFit::Status::gap_too_strong;
    return fit;
  }
  const auto lf = stats::linear_fit(xs, ys);
  fit.kappa = std::exp(lf.slope);
  fit.r2 = lf.r2;
  for (std::size_t k = 0; k < static_cast<std::size_t>(xs.back()); ++k) {
    fit.constant = std::max(fit.constant, fit.envelope[k] / std::pow(fit.kappa, static_cast<double>(k + 1)));
  }
  fit.status = fit.kappa < 1.0 ? GapFit::Status::measured : GapFit::Status::no_gap;
  return fit;
}

UniformBounds ThermoEngine::uniform_bounds(std::span<const BasePoint> xs, int n_max) const {
  struct Local {
    double rho_min, rho_max, l_min, l_max;
  };
  const int n = n_points();
  const auto locals = parallel_map<Local>(xs.size(), [&](std::size_t i) {
    const OrbitWindow win = window(xs[i], 0, n_max);
    const auto& rho = win.rho(0).values();
    Local l{*std::min_element(rho.begin(), rho.end()), *std::max_element(rho.begin(), rho.end()),
            INFINITY, -INFINITY};
    std::vector<double> v(static_cast<std::size_t>(n), 1.0);
    for (int k = 0; k < n_max; ++k) {
      v = disc_->apply(win.symbol(k), v);
      scale(v, 1.0 / win.lambda(k));
      l.l_min = std::min(l.l_min, *std::min_element(v.begin(), v.end()));
      l.l_max = std::max(l.l_max, *std::max_element(v.begin(), v.end()));
    }
    return l;
  });
  UniformBounds b{INFINITY, -INFINITY, INFINITY, -INFINITY, 1.0};
  for (const auto& l : locals) {
    b.rho_min = std::min(b.rho_min, l.rho_min);
    b.rho_max = std::max(b.rho_max, l.rho_max);
    b.l0n_min = std::min(b.l0n_min, l.l_min);
    b.l0n_max = std::max(b.l0n_max, l.l_max);
  }
  b.constant = std::max({b.rho_max, 1.0 / b.rho_min, b.l0n_max, 1.0 / b.l0n_min, 1.0});
  return b;
}

namespace {

RegularityFit fit_regularity(const std::string& name, std::span<const double> dist,
                             std::span<const double> diff, std::span<const double> betas) {
  constexpr double kFloor = 1e-13;
  RegularityFit f;
  f.quantity = name;
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] > 0.0 && diff[i] > kFloor) {
      lx.push_back(std::log(dist[i]));
      ly.push_back(std::log(diff[i]));
    }
  }
  if (lx.size() >= 2 && *std::max_element(lx.begin(), lx.end()) > *std::min_element(lx.begin(), lx.end())) {
    const auto lf = stats::linear_fit(lx, ly);
    f.beta_hat = lf.slope;
    f.r2 = lf.r2;
  }
  auto max_ratio = [&](double beta) {
    double m = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (dist[i] > 0.0) m = std::max(m, diff[i] / std::pow(dist[i], beta));
    }
    return m;
  };
  for (double beta : betas) {
    // ratios diff / dist^beta stop growing as dist -> 0 once beta <= beta_hat
    const bool bounded = lx.size() < 2 || beta <= f.beta_hat + 1e-9;
    if (bounded && beta >= f.bounded_beta) {
      f.bounded_beta = beta;
      f.bound = max_ratio(beta);
    }
  }
  if (f.bounded_beta == 0.0) f.bound = max_ratio(0.0);
  return f;
}

}  // namespace

RegularityTable ThermoEngine::regularity_check(std::span<const std::pair<BasePoint, BasePoint>> pairs,
                                               std::span<const int> n_list,
                                               std::span<const double> beta_candidates) const {
  const int n_max = n_list.empty() ? 1 : *std::max_element(n_list.begin(), n_list.end());
  const int n = n_points();
  RegularityTable table;
  table.rows = parallel_map<RegularityRow>(pairs.size(), [&](std::size_t i) {
    const auto& [a, b] = pairs[i];
    const OrbitWindow wa = window(a, 0, n_max);
    const OrbitWindow wb = window(b, 0, n_max);
    RegularityRow row;
    row.distance = two_sided_distance(a, b);
    row.d_lambda = std::abs(wa.lambda(0) - wb.lambda(0));
    row.d_rho = sup_diff(wa.rho(0).values(), wb.rho(0).values());
    for (int k : n_list) {
      const auto one = GridFunction::constant(n, disc_->interp(), 1.0);
      const auto fa = push_normalized(*disc_, wa, 0, one, k);
      const auto fb = push_normalized(*disc_, wb, 0, one, k);
      row.d_l0n.push_back(sup_diff(fa.values(), fb.values()));
    }
    return row;
  });

  std::vector<double> dist;
  std::vector<double> dl;
  std::vector<double> dr;
  for (const auto& r : table.rows) {
    dist.push_back(r.distance);
    dl.push_back(r.d_lambda);
    dr.push_back(r.d_rho);
  }
  table.fits.push_back(fit_regularity("lambda", dist, dl, beta_candidates));
  table.fits.push_back(fit_regularity("rho", dist, dr, beta_candidates));
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    std::vector<double> d;
    for (const auto& r : table.rows) d.push_back(r.d_l0n[k]);
    table.fits.push_back(
        fit_regularity("l0n_" + std::to_string(n_list[k]), dist, d, beta_candidates));
  }
  return table;
}

}  // namespace asiplab
