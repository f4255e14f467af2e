#include "asiplab/fiber_system.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace asiplab {
namespace {

double wrap_unit(double z) {
  double f = z - std::floor(z);
  return f >= 1.0 ? 0.0 : f;
}

void resize_or_check(std::vector<double>& v, int q, const char* name) {
  if (v.empty()) v.assign(static_cast<std::size_t>(q), 0.0);
  if (static_cast<int>(v.size()) != q) {
    throw std::invalid_argument(std::string(name) + " needs one entry per base symbol");
  }
}

}  // namespace

double HolderParams::q_tilde() const {
  const double g = std::pow(gamma_star, -alpha);
  return h_tilde * g / (1.0 - g);
}

SystemSpec::SystemSpec(Params params) : params_(std::move(params)) {
  const int q = params_.base.alphabet_size();
  if (static_cast<int>(params_.branch_count.size()) != q) {
    throw std::invalid_argument("branch_count needs one entry per base symbol");
  }
  resize_or_check(params_.nonlinearity, q, "nonlinearity");
  resize_or_check(params_.potential.amp, q, "potential amp");
  resize_or_check(params_.observable.offset, q, "observable offset");
  resize_or_check(params_.observable.phase, q, "observable phase");
  if (!(params_.alpha > 0.0 && params_.alpha <= 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1]");
  }

  double gamma = INFINITY;
  double lip_phi = 0.0;
  for (int e = 0; e < q; ++e) {
    const int d = params_.branch_count[static_cast<std::size_t>(e)];
    const double eps = params_.nonlinearity[static_cast<std::size_t>(e)];
    if (d < 2) throw std::invalid_argument("branch counts must be >= 2");
    if (eps < 0.0) throw std::invalid_argument("nonlinearity must be >= 0");
    max_degree_ = std::max(max_degree_, d);
    gamma = std::min(gamma, d - eps);
    lip_phi = std::max(lip_phi, kTwoPi * std::abs(params_.potential.amp[static_cast<std::size_t>(e)]));
  }
  if (!(gamma > 1.0)) {
    throw std::invalid_argument("maps are not uniformly expanding (min d - eps = " +
                                std::to_string(gamma) + ")");
  }

  base_ = std::make_shared<const BaseMeasureSpec>(params_.base);
  holder_.alpha = params_.alpha;
  holder_.gamma_star = gamma;
  holder_.eta = params_.eta > 0.0 ? params_.eta : 1.0 / (2.0 * max_degree_);
  holder_.xi = params_.xi > 0.0 ? params_.xi : holder_.eta;
  const double v_phi = lip_phi * std::pow(holder_.eta, 1.0 - holder_.alpha);
  holder_.h_tilde = params_.h_tilde > 0.0 ? params_.h_tilde : std::max(1.0, v_phi);
  if (holder_.h_tilde < 1.0) throw std::invalid_argument("h_tilde must be >= 1");
  if (holder_.h_tilde < v_phi) {
    throw std::invalid_argument("h_tilde is below the variation of the potential");
  }
}

SystemSpec SystemSpec::default_system() {
  Params p;
  p.base = BaseMeasureSpec({0.5, 0.5});
  p.branch_count = {2, 3};
  p.nonlinearity = {0.0, 0.0};
  p.potential = {0.0, {0.1, 0.15}};
  p.observable = {{0.2, -0.1}, 1.0, {0.0, 0.25}};
  return SystemSpec(std::move(p));
}

SystemSpec SystemSpec::doubling_system() {
  Params p;
  p.base = BaseMeasureSpec({0.5, 0.5});
  p.branch_count = {2, 2};
  p.nonlinearity = {0.0, 0.0};
  p.potential = {0.0, {0.0, 0.0}};
  p.observable = {{0.2, -0.1}, 1.0, {0.0, 0.25}};
  return SystemSpec(std::move(p));
}

bool SystemSpec::is_linear() const {
  return std::all_of(params_.nonlinearity.begin(), params_.nonlinearity.end(),
                     [](double eps) { return eps == 0.0; });
}

double SystemSpec::lift(Symbol e, double z) const {
  const double eps = nonlinearity(e);
  double v = degree(e) * z;
  if (eps != 0.0) v += eps * std::sin(kTwoPi * z) / kTwoPi;
  return v;
}

double SystemSpec::map(Symbol e, double z) const { return wrap_unit(lift(e, z)); }

double SystemSpec::derivative(Symbol e, double z) const {
  return degree(e) + nonlinearity(e) * std::cos(kTwoPi * z);
}

double SystemSpec::potential(Symbol e, double z) const {
  return params_.potential.t +
         params_.potential.amp[static_cast<std::size_t>(e)] * std::cos(kTwoPi * z);
}

double SystemSpec::observable(Symbol e, double z) const {
  const auto& o = params_.observable;
  return o.offset[static_cast<std::size_t>(e)] +
         o.amplitude * std::cos(kTwoPi * (z - o.phase[static_cast<std::size_t>(e)]));
}

double FiberObservable::operator()(const SystemSpec& spec, Symbol e, double z) const {
  switch (kind) {
    case Kind::harmonic:
      return scale * spec.observable(e, z);
    case Kind::coboundary:
      return scale * (k_amp * std::cos(kTwoPi * z) - k_amp * std::cos(kTwoPi * spec.map(e, z)) +
                      constant);
    case Kind::constant:
      return scale * constant;
  }
  return 0.0;
}

double apply_map(const SystemSpec& spec, const BasePoint& x, double z) {
  return spec.map(x.symbol(0), z);
}

std::vector<double> inverse_branches(const SystemSpec& spec, Symbol e, double w,
                                     double newton_tol, int max_iter) {
  const int d = spec.degree(e);
  const double eps = spec.nonlinearity(e);
  std::vector<double> out(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    const double target = w + j;
    double z = target / d;
    if (eps != 0.0) {
      // The lift is increasing with |lift(z) - d z| <= eps / (2 pi).
      double lo = std::max(0.0, (target - eps / kTwoPi) / d);
      double hi = std::min(1.0, (target + eps / kTwoPi) / d);
      bool converged = false;
      for (int it = 0; it < max_iter; ++it) {
        const double f = spec.lift(e, z) - target;
        if (std::abs(f) <= newton_tol * d) {
          converged = true;
          break;
        }
        if (f > 0.0) hi = z; else lo = z;
        double next = z - f / spec.derivative(e, z);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == z) {
          converged = true;
          break;
        }
        z = next;
      }
      if (!converged) {
        throw std::runtime_error("inverse branch " + std::to_string(j) + " of symbol " +
                                 std::to_string(e) + " did not converge at w = " +
                                 std::to_string(w));
      }
    }
    if (z >= 1.0) z -= 1.0;
    out[static_cast<std::size_t>(j)] = z;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> inverse_branches(const SystemSpec& spec, const BasePoint& x, double w,
                                     double newton_tol, int max_iter) {
  return inverse_branches(spec, x.symbol(0), w, newton_tol, max_iter);
}

double birkhoff_sum(const SystemSpec& spec, const FiberObservable& h, const BasePoint& x,
                    double z, int n) {
  if (n < 0) throw std::invalid_argument("birkhoff_sum needs n >= 0");
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const Symbol e = x.symbol(j);
    s += h(spec, e, z);
    z = spec.map(e, z);
  }
  return s;
}

}  // namespace asiplab
