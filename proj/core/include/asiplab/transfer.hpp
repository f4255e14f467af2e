#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "asiplab/base_system.hpp"
#include "asiplab/fiber_system.hpp"
#include "asiplab/grid.hpp"

namespace asiplab {

enum class OperatorKind { raw, normalized, perturbed };

/// Grid discretization of the fiber transfer operators. Maps, potential and
/// observable depend on x only through x_0, so one sparse operator per
/// symbol covers every fiber: row k holds, for each preimage z of node k,
/// the weight e^{phi(z)}, the observable value g(z) and the interpolation
/// stencil of z.
class Discretization {
 public:
  Discretization(SystemSpec spec, int n_points, Interp interp,
                 FiberObservable observable = FiberObservable::harmonic());

  const SystemSpec& spec() const { return spec_; }
  const FiberObservable& observable() const { return observable_; }
  int n_points() const { return n_points_; }
  Interp interp() const { return interp_; }

  /// (L_e u)(w_k) = sum_z u(z) e^{phi_e(z)}.
  std::vector<double> apply(Symbol e, std::span<const double> u) const;
  std::vector<std::complex<double>> apply(Symbol e, std::span<const std::complex<double>> u) const;
  /// L_e(e^{i r g_e} u), without the 1/lambda normalization.
  std::vector<std::complex<double>> apply_twisted(Symbol e, std::span<const std::complex<double>> u,
                                                  double r) const;
  /// Transpose of apply: pulls node weights on the target fiber back.
  std::vector<double> adjoint(Symbol e, std::span<const double> weights) const;

  /// g_e and phi_e sampled at the grid nodes.
  const std::vector<double>& observable_nodes(Symbol e) const;

 private:
  struct Row {
    std::vector<double> preimage;
    std::vector<double> weight;  // e^{phi(z)}
    std::vector<double> g;
    std::vector<Stencil> stencil;
  };

  template <class T>
  std::vector<T> coefficients(std::span<const T> u) const;

  SystemSpec spec_;
  FiberObservable observable_;
  int n_points_;
  Interp interp_;
  std::vector<std::vector<Row>> rows_;             // [symbol][node]
  std::vector<std::vector<double>> observable_nodes_;  // [symbol][node]
};

/// L_x u, landing on fiber tau x.
GridFunction transfer_apply(const Discretization& disc, const BasePoint& x, const GridFunction& u);

/// n-fold composition along the orbit of x. `lambdas` holds lambda_{tau^j x}
/// for j < n (normalized and perturbed kinds); `r_sequence` holds r_j for the
/// perturbed kind. Throws std::invalid_argument on length mismatches.
ComplexGridFunction transfer_iterate(const Discretization& disc, const BasePoint& x,
                                     const ComplexGridFunction& u, int n, OperatorKind kind,
                                     std::span<const double> lambdas = {},
                                     std::span<const double> r_sequence = {});
GridFunction transfer_iterate(const Discretization& disc, const BasePoint& x, const GridFunction& u,
                              int n, OperatorKind kind, std::span<const double> lambdas = {});

/// Orbit-composed operator L^n_{x} of a given kind.
struct OrbitOperator {
  BasePoint start;
  int depth = 0;
  OperatorKind kind = OperatorKind::raw;
  std::vector<double> r_sequence;
  std::vector<double> lambda_chain;

  ComplexGridFunction apply(const Discretization& disc, const ComplexGridFunction& u) const;
  /// Composition this-then-next; requires next.start == tau^depth start.
  OrbitOperator then(const OrbitOperator& next) const;
};

using FiberCallable = std::function<std::complex<double>(double)>;

/// Exact (L^n u)(w) on fiber tau^n x by recursive enumeration of every
/// depth-n preimage; no grids. Throws std::length_error when deg^n exceeds
/// branch_budget.
std::complex<double> oracle_transfer(const SystemSpec& spec, const FiberObservable& g,
                                     const BasePoint& x, const FiberCallable& u, int n, double w,
                                     OperatorKind kind, std::span<const double> lambdas = {},
                                     std::span<const double> r_sequence = {},
                                     std::size_t branch_budget = 1'000'000);

/// (L_0^n (e^{i sum_j r_j g o T^j} u))(w): the right-hand side of the
/// perturbed-iterate identity, summed over depth-n preimages with the
/// multiplier evaluated by forward iteration from each leaf.
std::complex<double> oracle_twisted_normalized(const SystemSpec& spec, const FiberObservable& g,
                                               const BasePoint& x, const FiberCallable& u,
                                               double w, std::span<const double> lambdas,
                                               std::span<const double> r_sequence,
                                               std::size_t branch_budget = 1'000'000);

/// Q^n_x u = nu_x(u) rho_{tau^n x}.
GridFunction projection_Q(const GridFunction& u, const FiberMeasure& nu_x,
                          const GridFunction& rho_end);
ComplexGridFunction projection_Q(const ComplexGridFunction& u, const FiberMeasure& nu_x,
                                 const GridFunction& rho_end);

struct ChainIdentityReport {
  /// Both sides by the preimage-tree oracle; exact up to round-off.
  double oracle_discrepancy = 0.0;
  /// Sequential grid composition against the oracle right-hand side.
  double grid_discrepancy = 0.0;
  /// Interpolation budget for grid_discrepancy: the same sequential
  /// composition at N/2 compared against N, scaled by the convergence order.
  double grid_budget = 0.0;
};

ChainIdentityReport perturbed_chain_identity_check(const Discretization& disc, const BasePoint& x,
                                                   const FiberCallable& u,
                                                   std::span<const double> r_sequence,
                                                   std::span<const double> lambdas);

}  // namespace asiplab
