#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "asiplab/base_system.hpp"

namespace asiplab {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Hölder-calculus constants shared by every fiber.
struct HolderParams {
  double alpha = 1.0;
  double eta = 0.0;         ///< variation cutoff scale
  double xi = 0.0;          ///< inverse-branch radius (cone scale)
  double h_tilde = 1.0;     ///< uniform bound on v_alpha(phi_x), >= 1
  double gamma_star = 2.0;  ///< uniform expansion constant, > 1

  /// H~ gamma^-alpha / (1 - gamma^-alpha).
  double q_tilde() const;
};

/// phi_x(z) = t + amp[x_0] cos(2 pi z)
struct PotentialParams {
  double t = 0.0;
  std::vector<double> amp;
};

/// g_x(z) = offset[x_0] + amplitude cos(2 pi (z - phase[x_0]))
struct ObservableParams {
  std::vector<double> offset;
  double amplitude = 1.0;
  std::vector<double> phase;
};

/// Locally constant skew product: T_x(z) = d(x_0) z + eps(x_0) sin(2 pi z)/(2 pi) mod 1
/// on the unit circle, with potential and observable depending on x_0.
class SystemSpec {
 public:
  struct Params {
    BaseMeasureSpec base;
    std::vector<int> branch_count;
    std::vector<double> nonlinearity;
    PotentialParams potential;
    ObservableParams observable;
    double alpha = 1.0;
    double eta = 0.0;      // <= 0: 1 / (2 max d)
    double xi = 0.0;       // <= 0: eta
    double h_tilde = 0.0;  // <= 0: max(1, sup_e v_alpha(phi_e))
  };

  /// Validates sizes, d(e) >= 2, eps(e) >= 0 and gamma_* > 1; throws
  /// std::invalid_argument otherwise.
  explicit SystemSpec(Params params);

  /// Bernoulli(1/2) base, d = (2, 3), eps = 0, amp = (0.1, 0.15).
  static SystemSpec default_system();
  /// phi = 0, d = 2, eps = 0 on a two-symbol base.
  static SystemSpec doubling_system();

  const Params& params() const { return params_; }
  const BaseMeasureSpec& base() const { return *base_; }
  std::shared_ptr<const BaseMeasureSpec> base_ptr() const { return base_; }
  const HolderParams& holder() const { return holder_; }
  int alphabet_size() const { return base_->alphabet_size(); }
  int max_degree() const { return max_degree_; }

  int degree(Symbol e) const { return params_.branch_count[static_cast<std::size_t>(e)]; }
  double nonlinearity(Symbol e) const { return params_.nonlinearity[static_cast<std::size_t>(e)]; }
  bool is_linear() const;

  /// Lift d z + eps s(z) on [0, 1), increasing from 0 to d.
  double lift(Symbol e, double z) const;
  double map(Symbol e, double z) const;
  double derivative(Symbol e, double z) const;
  double potential(Symbol e, double z) const;
  double observable(Symbol e, double z) const;

 private:
  Params params_;
  std::shared_ptr<const BaseMeasureSpec> base_;
  HolderParams holder_;
  int max_degree_ = 0;
};

/// Fiberwise observable h_x(z). `harmonic` uses the system's observable
/// parameters, `coboundary` is k - k o T_x + c with k(z) = k_amp cos(2 pi z),
/// `constant` is c everywhere. Every kind is multiplied by `scale`.
struct FiberObservable {
  enum class Kind { harmonic, coboundary, constant };
  Kind kind = Kind::harmonic;
  double scale = 1.0;
  double constant = 0.0;
  double k_amp = 1.0;

  static FiberObservable harmonic(double scale = 1.0) { return {Kind::harmonic, scale, 0.0, 1.0}; }
  static FiberObservable coboundary(double c, double k_amp = 1.0) {
    return {Kind::coboundary, 1.0, c, k_amp};
  }
  static FiberObservable constant_value(double c) { return {Kind::constant, 1.0, c, 0.0}; }

  double operator()(const SystemSpec& spec, Symbol e, double z) const;
};

/// T_x(z); z in [0, 1), result in [0, 1).
double apply_map(const SystemSpec& spec, const BasePoint& x, double z);

/// Ascending list of the d(x_0) preimages of w under T_x. Closed form for
/// eps = 0, safeguarded Newton otherwise; throws std::runtime_error naming
/// the branch if Newton fails to converge.
std::vector<double> inverse_branches(const SystemSpec& spec, const BasePoint& x, double w,
                                     double newton_tol = 1e-15, int max_iter = 100);
std::vector<double> inverse_branches(const SystemSpec& spec, Symbol e, double w,
                                     double newton_tol = 1e-15, int max_iter = 100);

/// S_{x,n} h (z) = sum_{j<n} h_{tau^j x}(T_x^j z).
double birkhoff_sum(const SystemSpec& spec, const FiberObservable& h, const BasePoint& x,
                    double z, int n);

}  // namespace asiplab
