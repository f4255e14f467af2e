#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asiplab/base_system.hpp"
#include "asiplab/grid.hpp"
#include "asiplab/transfer.hpp"

namespace asiplab {

struct ThermoNumerics {
  int depth = 40;       ///< pullback/pushforward depth K
  int depth_max = 160;  ///< doubling stops here
  double duality_tol = 1e-6;
};

struct ConformalResult {
  FiberMeasure nu;
  double lambda = 0.0;
  int depth = 0;
  /// |lambda(K) - lambda(K - 2)|
  double depth_delta = 0.0;
  /// sup_{|u|<=1} |nu_{tau x}(L_x u) / lambda - nu_x(u)| (an l1 distance of weights)
  double duality_residual = 0.0;
  bool converged = false;
};

struct DensityResult {
  GridFunction rho;
  /// Tail Cesaro average (2/K) sum_{K/2 <= k < K} L_0^k 1 and its sup distance
  /// to rho; empty unless requested.
  std::optional<GridFunction> cesaro;
  double cesaro_difference = 0.0;
};

/// Conformal measures, eigenvalues and invariant densities for fibers
/// tau^j x, j in [first, last], computed from one shared pullback horizon so
/// that nu_{j+1}(L_j u) = lambda_j nu_j(u) and L_{0,j} rho_j = rho_{j+1} hold
/// to round-off on the grid.
class OrbitWindow {
 public:
  OrbitWindow() = default;
  OrbitWindow(BasePoint x, int first, int last, std::vector<FiberMeasure> nu,
              std::vector<double> lambda, std::vector<GridFunction> rho);

  const BasePoint& anchor() const { return x_; }
  int first() const { return first_; }
  int last() const { return last_; }
  Symbol symbol(int j) const { return x_.symbol(j); }

  const FiberMeasure& nu(int j) const;
  const GridFunction& rho(int j) const;
  double lambda(int j) const;
  /// lambda_j for j in [from, from + count).
  std::vector<double> lambdas(int from, int count) const;

  /// mu_j(h) = nu_j(rho_j h).
  double mu(int j, std::span<const double> h) const;

 private:
  BasePoint x_;
  int first_ = 0;
  int last_ = 0;
  std::vector<FiberMeasure> nu_;
  std::vector<double> lambda_;
  std::vector<GridFunction> rho_;
};

struct ThermoState {
  BasePoint x;
  int depth = 0;
  FiberMeasure nu;
  std::vector<double> lambda_chain;  ///< lambda over [x, tau^K x]
  GridFunction rho;
  double depth_delta = 0.0;
  double duality_residual = 0.0;
  double fixed_point_residual = 0.0;  ///< ||L_{0,x} rho_x - rho_{tau x}||_inf
  double rho_min = 0.0;
  double rho_max = 0.0;
  bool converged = false;
};

/// Residual history of one (x, u) instance in the gap fit.
struct GapInstance {
  std::vector<double> residual;  ///< ||L_0^n u - Q^n u||_inf / ||u||_alpha, n = 1..n_max
};

struct GapFit {
  enum class Status { measured, gap_too_strong, no_gap };
  Status status = Status::measured;
  double kappa = 0.0;
  double constant = 0.0;
  double r2 = 0.0;
  std::size_t fit_points = 0;
  std::vector<double> envelope;  ///< max over instances, n = 1..n_max
  std::vector<GapInstance> instances;
};

const char* to_string(GapFit::Status status);

struct UniformBounds {
  double rho_min = 0.0;
  double rho_max = 0.0;
  double l0n_min = 0.0;
  double l0n_max = 0.0;
  /// Smallest C with every measured value in [1/C, C].
  double constant = 1.0;
};

struct RegularityRow {
  double distance = 0.0;  ///< two-sided base distance of the pair
  double d_lambda = 0.0;
  double d_rho = 0.0;
  std::vector<double> d_l0n;  ///< per entry of n_list
};

struct RegularityFit {
  std::string quantity;
  double beta_hat = 0.0;  ///< slope of log difference against log distance
  double r2 = 0.0;
  double bounded_beta = 0.0;  ///< largest candidate beta with non-growing ratios
  double bound = 0.0;         ///< max ratio at bounded_beta
};

struct RegularityTable {
  std::vector<RegularityRow> rows;
  std::vector<RegularityFit> fits;
};

class ThermoEngine {
 public:
  explicit ThermoEngine(const Discretization& disc, ThermoNumerics numerics = {});

  const Discretization& disc() const { return *disc_; }
  const SystemSpec& spec() const { return disc_->spec(); }
  const ThermoNumerics& numerics() const { return numerics_; }
  int n_points() const { return disc_->n_points(); }

  /// nu_x(u) = Leb(L_x^K u) / Leb(L_x^K 1) as node weights.
  FiberMeasure pullback_measure(const BasePoint& x, int depth) const;

  /// Depth-K conformal measure and lambda_x = nu_{tau x}(L_x 1), both fibers
  /// pulled back to depth K independently.
  ConformalResult conformal_pullback(const BasePoint& x, int depth) const;
  /// As above, doubling K from numerics().depth until the duality residual
  /// drops below duality_tol or depth_max is reached.
  ConformalResult conformal(const BasePoint& x) const;

  /// rho_x = L^K_{tau^{-K} x} 1 normalized by nu_x.
  DensityResult invariant_density(const BasePoint& x, int depth, bool with_cesaro = false) const;

  ThermoState state(const BasePoint& x) const;

  /// Shared-horizon window over fibers tau^j x, j in [first, last].
  OrbitWindow window(const BasePoint& x, int first, int last) const;

  /// Fits ||L_0^n u - Q^n u||_inf <= C kappa^n ||u||_alpha: kappa from the
  /// mean log residual over instances while every instance is above 100
  /// machine epsilon, C as the smallest constant covering the envelope there.
  GapFit gap_estimate(std::span<const std::pair<BasePoint, GridFunction>> instances,
                      int n_max) const;

  UniformBounds uniform_bounds(std::span<const BasePoint> xs, int n_max) const;

  RegularityTable regularity_check(std::span<const std::pair<BasePoint, BasePoint>> pairs,
                                   std::span<const int> n_list,
                                   std::span<const double> beta_candidates) const;

 private:
  const Discretization* disc_;
  ThermoNumerics numerics_;
};

/// ||L_{0,x}^n u||: pushes u along the window from fiber `from` for n steps.
GridFunction push_normalized(const Discretization& disc, const OrbitWindow& w, int from,
                             GridFunction u, int n);
/// Perturbed chain L_{r_{n-1}} o ... o L_{r_0} from fiber `from`.
ComplexGridFunction push_perturbed(const Discretization& disc, const OrbitWindow& w, int from,
                                   ComplexGridFunction u, std::span<const double> r);

}  // namespace asiplab
