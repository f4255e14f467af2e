#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace asiplab {

enum class Interp { linear, cubic };

/// Convergence order of the interpolation rule for smooth data.
int interp_order(Interp interp);
const char* to_string(Interp interp);
Interp interp_from_string(const std::string& name);

/// Fiber a grid function lives on: the base point identity plus how far
/// along its orbit the fiber sits.
struct FiberTag {
  std::uint64_t point = 0;
  std::int64_t step = 0;
  friend bool operator==(const FiberTag&, const FiberTag&) = default;
};

/// Interpolation weights of one evaluation point against grid data. For the
/// cubic rule they act on B-spline coefficients, not on samples.
struct Stencil {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
  int size = 0;
};

Stencil make_stencil(Interp interp, int n_points, double z);

/// Solves the periodic cubic B-spline interpolation system in place
/// ((c_{i-1} + 4 c_i + c_{i+1}) / 6 = u_i). The operator is symmetric, so the
/// same routine applies its adjoint.
void spline_prefilter(std::span<double> values);
void spline_prefilter(std::span<std::complex<double>> values);

/// Circle distance on [0, 1).
double circle_distance(double a, double b);

/// Function on the uniform grid {i / N} of a fiber.
template <class T>
class BasicGridFunction {
 public:
  using value_type = T;

  BasicGridFunction() = default;
  BasicGridFunction(std::vector<T> values, Interp interp, FiberTag tag = {})
      : values_(std::move(values)), interp_(interp), tag_(tag) {}

  template <class F>
  static BasicGridFunction sample(int n_points, Interp interp, F&& f, FiberTag tag = {}) {
    std::vector<T> v(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) v[static_cast<std::size_t>(i)] = f(node(n_points, i));
    return BasicGridFunction(std::move(v), interp, tag);
  }

  static BasicGridFunction constant(int n_points, Interp interp, T value, FiberTag tag = {}) {
    return BasicGridFunction(std::vector<T>(static_cast<std::size_t>(n_points), value), interp, tag);
  }

  static double node(int n_points, int i) { return static_cast<double>(i) / n_points; }

  int size() const { return static_cast<int>(values_.size()); }
  Interp interp() const { return interp_; }
  const FiberTag& tag() const { return tag_; }
  void set_tag(FiberTag tag) { tag_ = tag; }

  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }
  T operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  T& operator[](int i) { return values_[static_cast<std::size_t>(i)]; }

  /// Interpolated value; exact at nodes. O(N) for the cubic rule, build an
  /// Interpolant for repeated evaluation.
  T evaluate(double z) const;

  double sup_norm() const;

 private:
  std::vector<T> values_;
  Interp interp_ = Interp::cubic;
  FiberTag tag_;
};

using GridFunction = BasicGridFunction<double>;
using ComplexGridFunction = BasicGridFunction<std::complex<double>>;

/// Precomputed interpolation coefficients of a grid function.
template <class T>
class Interpolant {
 public:
  explicit Interpolant(const BasicGridFunction<T>& f);
  T operator()(double z) const;

 private:
  std::vector<T> coeffs_;
  Interp interp_;
};

extern template class BasicGridFunction<double>;
extern template class BasicGridFunction<std::complex<double>>;
extern template class Interpolant<double>;
extern template class Interpolant<std::complex<double>>;

ComplexGridFunction to_complex(const GridFunction& f);

/// Nonnegative node weights representing a fiber probability measure.
class FiberMeasure {
 public:
  FiberMeasure() = default;
  explicit FiberMeasure(std::vector<double> weights, FiberTag tag = {});

  static FiberMeasure lebesgue(int n_points, FiberTag tag = {});

  int size() const { return static_cast<int>(weights_.size()); }
  const std::vector<double>& weights() const { return weights_; }
  const FiberTag& tag() const { return tag_; }
  double total_mass() const;
  double min_weight() const;

  /// Rescales to total mass 1; throws if the mass is not positive.
  void normalize();

  double integrate(const GridFunction& f) const;
  std::complex<double> integrate(const ComplexGridFunction& f) const;

 private:
  std::vector<double> weights_;
  FiberTag tag_;
};

/// Grid proxy of v_alpha: max over node pairs with 0 < dist <= eta of
/// |u(y) - u(y')| / dist^alpha. A lower bound of the continuum variation.
template <class T>
double variation_alpha(const BasicGridFunction<T>& u, double alpha, double eta);

/// ||u||_inf + v_alpha(u).
template <class T>
double holder_norm(const BasicGridFunction<T>& u, double alpha, double eta) {
  return u.sup_norm() + variation_alpha(u, alpha, eta);
}

/// (u + v/Q) / (nu(u) + v/Q) with v = variation_alpha(u). Throws
/// std::invalid_argument("zero function") when the denominator vanishes.
GridFunction cone_embed(const GridFunction& u, const FiberMeasure& nu, double q_tilde,
                        double alpha, double eta);

struct ConeCertificate {
  bool inside = false;
  std::string reason;  ///< "ok", "negative", "normalization" or "oscillation"
  int i = -1;          ///< offending node (or worst pair)
  int j = -1;
  /// max over pairs of log(h(w1)/h(w2)) - s Q dist^alpha; <= 0 inside.
  double worst_excess = 0.0;
  double mass = 0.0;
};

/// Membership test for the cone of nonnegative, nu-normalized functions
/// with h(w1) <= exp(s Q dist^alpha) h(w2) for all node pairs within xi.
ConeCertificate cone_check(const GridFunction& h, double s, double q_tilde, double xi,
                           double alpha, const FiberMeasure& nu, double mass_tol = 1e-9,
                           double ratio_tol = 1e-12);

/// Variation bound for a cone member h (pairs within xi satisfy the
/// multiplicative oscillation bound). `literal_bound` is
/// sQ exp(sQ xi^alpha) xi^alpha ||h||_inf, the commonly quoted form;
/// `derived_bound` drops the trailing xi^alpha, which is what
/// |h(w1) - h(w2)| <= (e^{sQ rho^alpha} - 1) h(w2) gives. Needs eta <= xi.
struct ConeVariationBound {
  double variation = 0.0;
  double sup_norm = 0.0;
  double literal_bound = 0.0;
  double derived_bound = 0.0;
  bool literal_holds = false;
  bool derived_holds = false;
};

ConeVariationBound cone_variation_bound(const GridFunction& h, double s, double q_tilde, double xi,
                                        double alpha, double eta, double tol = 1e-8);

/// CSV with header index,point,value_re,value_im.
void write_csv(std::ostream& os, const GridFunction& f);
void write_csv(std::ostream& os, const ComplexGridFunction& f);

}  // namespace asiplab
