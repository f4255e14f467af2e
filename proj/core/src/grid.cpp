#include "asiplab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "asiplab/stats.hpp"

namespace asiplab {
namespace {

const double kPole = std::sqrt(3.0) - 2.0;

int wrap_index(long long i, int n) {
  long long r = i % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

int tail_terms() {
  static const int terms =
      static_cast<int>(std::ceil(std::log(1e-18) / std::log(std::abs(kPole))));
  return terms;
}

template <class T>
void prefilter_impl(std::span<T> c) {
  const int n = static_cast<int>(c.size());
  if (n == 0) return;
  const int terms = tail_terms();
  // causal pass: y_k = x_k + z1 y_{k-1}
  T init{};
  double zk = 1.0;
  for (int j = 0; j < terms; ++j) {
    init += zk * c[static_cast<std::size_t>(wrap_index(-j, n))];
    zk *= kPole;
  }
  c[0] = init;
  for (int k = 1; k < n; ++k) c[static_cast<std::size_t>(k)] += kPole * c[static_cast<std::size_t>(k - 1)];
  // anticausal pass: w_k = y_k + z1 w_{k+1}
  init = T{};
  zk = 1.0;
  for (int j = 0; j < terms; ++j) {
    init += zk * c[static_cast<std::size_t>(wrap_index(n - 1 + j, n))];
    zk *= kPole;
  }
  c[static_cast<std::size_t>(n - 1)] = init;
  for (int k = n - 2; k >= 0; --k) {
    c[static_cast<std::size_t>(k)] += kPole * c[static_cast<std::size_t>(k + 1)];
  }
  const double gain = -6.0 * kPole;
  for (auto& v : c) v *= gain;
}

template <class T>
T apply_stencil(const Stencil& s, const std::vector<T>& data) {
  T acc{};
  for (int k = 0; k < s.size; ++k) {
    acc += s.weight[static_cast<std::size_t>(k)] * data[static_cast<std::size_t>(s.index[static_cast<std::size_t>(k)])];
  }
  return acc;
}

}  // namespace

int interp_order(Interp interp) { return interp == Interp::cubic ? 4 : 2; }

const char* to_string(Interp interp) { return interp == Interp::cubic ? "cubic" : "linear"; }

Interp interp_from_string(const std::string& name) {
  if (name == "cubic") return Interp::cubic;
  if (name == "linear") return Interp::linear;
  throw std::invalid_argument("unknown interpolation rule '" + name + "'");
}

Stencil make_stencil(Interp interp, int n_points, double z) {
  if (n_points < 4) throw std::invalid_argument("grid needs at least 4 points");
  z -= std::floor(z);
  const double s = z * n_points;
  long long i0 = static_cast<long long>(std::floor(s));
  double t = s - static_cast<double>(i0);
  if (i0 >= n_points) {
    i0 -= n_points;
  }
  Stencil st;
  if (interp == Interp::linear) {
    st.size = 2;
    st.index = {wrap_index(i0, n_points), wrap_index(i0 + 1, n_points), 0, 0};
    st.weight = {1.0 - t, t, 0.0, 0.0};
    return st;
  }
  const double u = 1.0 - t;
  const double t2 = t * t;
  const double t3 = t2 * t;
  st.size = 4;
  for (int k = 0; k < 4; ++k) st.index[static_cast<std::size_t>(k)] = wrap_index(i0 - 1 + k, n_points);
  st.weight = {u * u * u / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
               (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0};
  return st;
}

void spline_prefilter(std::span<double> values) { prefilter_impl(values); }
void spline_prefilter(std::span<std::complex<double>> values) { prefilter_impl(values); }

double circle_distance(double a, double b) {
  double d = std::abs(a - b);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

template <class T>
T BasicGridFunction<T>::evaluate(double z) const {
  return Interpolant<T>(*this)(z);
}

template <class T>
double BasicGridFunction<T>::sup_norm() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v));
  return m;
}

template <class T>
Interpolant<T>::Interpolant(const BasicGridFunction<T>& f)
    : coeffs_(f.values()), interp_(f.interp()) {
  if (interp_ == Interp::cubic) spline_prefilter(std::span<T>(coeffs_));
}

template <class T>
T Interpolant<T>::operator()(double z) const {
  const Stencil s = make_stencil(interp_, static_cast<int>(coeffs_.size()), z);
  return apply_stencil(s, coeffs_);
}

template class BasicGridFunction<double>;
template class BasicGridFunction<std::complex<double>>;
template class Interpolant<double>;
template class Interpolant<std::complex<double>>;

ComplexGridFunction to_complex(const GridFunction& f) {
  std::vector<std::complex<double>> v(f.values().begin(), f.values().end());
  return ComplexGridFunction(std::move(v), f.interp(), f.tag());
}

FiberMeasure::FiberMeasure(std::vector<double> weights, FiberTag tag)
    : weights_(std::move(weights)), tag_(tag) {
  for (double w : weights_) {
    if (!std::isfinite(w)) throw std::invalid_argument("fiber measure weight is not finite");
  }
}

FiberMeasure FiberMeasure::lebesgue(int n_points, FiberTag tag) {
  return FiberMeasure(std::vector<double>(static_cast<std::size_t>(n_points), 1.0 / n_points), tag);
}

double FiberMeasure::total_mass() const { return stats::sum(weights_); }

double FiberMeasure::min_weight() const {
  return weights_.empty() ? 0.0 : *std::min_element(weights_.begin(), weights_.end());
}

void FiberMeasure::normalize() {
  const double m = total_mass();
  if (!(m > 0.0)) throw std::runtime_error("fiber measure has non-positive mass");
  for (auto& w : weights_) w /= m;
}

double FiberMeasure::integrate(const GridFunction& f) const {
  if (f.size() != size()) throw std::invalid_argument("grid size mismatch");
  stats::CompensatedSum acc;
  for (int i = 0; i < size(); ++i) acc.add(weights_[static_cast<std::size_t>(i)] * f[i]);
  return acc.value();
}

std::complex<double> FiberMeasure::integrate(const ComplexGridFunction& f) const {
  if (f.size() != size()) throw std::invalid_argument("grid size mismatch");
  stats::CompensatedSum re;
  stats::CompensatedSum im;
  for (int i = 0; i < size(); ++i) {
    const double w = weights_[static_cast<std::size_t>(i)];
    re.add(w * f[i].real());
    im.add(w * f[i].imag());
  }
  return {re.value(), im.value()};
}

namespace {

int pair_reach(int n, double radius) {
  const int k = static_cast<int>(std::floor(radius * n + 1e-9));
  return std::clamp(k, 0, n / 2);
}

}  // namespace

template <class T>
double variation_alpha(const BasicGridFunction<T>& u, double alpha, double eta) {
  const int n = u.size();
  const int reach = pair_reach(n, eta);
  std::vector<double> scale(static_cast<std::size_t>(reach) + 1, 0.0);
  for (int k = 1; k <= reach; ++k) {
    scale[static_cast<std::size_t>(k)] = std::pow(static_cast<double>(k) / n, -alpha);
  }
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = 1; k <= reach; ++k) {
      const double diff = std::abs(u[i] - u[wrap_index(i + k, n)]);
      best = std::max(best, diff * scale[static_cast<std::size_t>(k)]);
    }
  }
  return best;
}

template double variation_alpha(const GridFunction&, double, double);
template double variation_alpha(const ComplexGridFunction&, double, double);

GridFunction cone_embed(const GridFunction& u, const FiberMeasure& nu, double q_tilde,
                        double alpha, double eta) {
  const double shift = variation_alpha(u, alpha, eta) / q_tilde;
  const double denom = nu.integrate(u) + shift * nu.total_mass();
  if (!(std::abs(denom) > std::numeric_limits<double>::min())) {
    throw std::invalid_argument("zero function");
  }
  GridFunction h = u;
  for (auto& v : h.values()) v = (v + shift) / denom;
  return h;
}

ConeVariationBound cone_variation_bound(const GridFunction& h, double s, double q_tilde, double xi,
                                        double alpha, double eta, double tol) {
  if (eta > xi) throw std::invalid_argument("cone_variation_bound needs eta <= xi");
  ConeVariationBound out;
  out.variation = variation_alpha(h, alpha, eta);
  out.sup_norm = h.sup_norm();
  const double sq = s * q_tilde;
  const double xa = std::pow(xi, alpha);
  out.derived_bound = sq * std::exp(sq * xa) * out.sup_norm;
  out.literal_bound = out.derived_bound * xa;
  out.literal_holds = out.variation <= out.literal_bound + tol;
  out.derived_holds = out.variation <= out.derived_bound + tol;
  return out;
}

ConeCertificate cone_check(const GridFunction& h, double s, double q_tilde, double xi,
                           double alpha, const FiberMeasure& nu, double mass_tol,
                           double ratio_tol) {
  ConeCertificate cert;
  const int n = h.size();
  cert.mass = nu.integrate(h);

  for (int i = 0; i < n; ++i) {
    if (!(h[i] > 0.0)) {
      cert.reason = "negative";
      cert.i = i;
      cert.worst_excess = INFINITY;
      return cert;
    }
  }

  const int reach = pair_reach(n, xi);
  const double sq = s * q_tilde;
  double worst = -INFINITY;
  for (int i = 0; i < n; ++i) {
    const double li = std::log(h[i]);
    for (int k = 1; k <= reach; ++k) {
      const int j = wrap_index(i + k, n);
      const double gap = std::abs(li - std::log(h[j]));
      const double excess = gap - sq * std::pow(static_cast<double>(k) / n, alpha);
      if (excess > worst) {
        worst = excess;
        cert.i = i;
        cert.j = j;
      }
    }
  }
  cert.worst_excess = reach > 0 ? worst : 0.0;

  if (std::abs(cert.mass - 1.0) > mass_tol) {
    cert.reason = "normalization";
  } else if (cert.worst_excess > ratio_tol) {
    cert.reason = "oscillation";
  } else {
    cert.inside = true;
    cert.reason = "ok";
  }
  return cert;
}

namespace {

template <class T>
void write_csv_impl(std::ostream& os, const BasicGridFunction<T>& f) {
  os << "index,point,value_re,value_im\n";
  os << std::setprecision(17);
  for (int i = 0; i < f.size(); ++i) {
    const std::complex<double> v(f[i]);
    os << i << ',' << BasicGridFunction<T>::node(f.size(), i) << ',' << v.real() << ','
       << v.imag() << '\n';
  }
}

}  // namespace

void write_csv(std::ostream& os, const GridFunction& f) { write_csv_impl(os, f); }
void write_csv(std::ostream& os, const ComplexGridFunction& f) { write_csv_impl(os, f); }

}  // namespace asiplab
