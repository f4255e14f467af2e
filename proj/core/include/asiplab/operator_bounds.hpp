#pragma once

#include <span>
#include <vector>

#include "asiplab/thermo.hpp"

namespace asiplab {

struct OperatorBoundsRow {
  int n = 0;
  double sup_ratio = 0.0;    ///< max ||L_r^n f||_inf / ||f||_inf
  double alpha_ratio = 0.0;  ///< max ||L_r^n h||_alpha / ||h||_alpha
};

struct OperatorBoundsReport {
  std::vector<OperatorBoundsRow> rows;
  double constant = 1.0;          ///< fitted C: max ratio over every n and r
  double sup_slope = 0.0;         ///< slope of log max sup ratio against n
  double alpha_slope = 0.0;
  double eps0 = 1.0;
  double max_abs_r = 0.0;
  /// max over (x, r, n) of alpha ratio / (C0 (1 + |r| Q~)) where C0 is the
  /// r = 0 alpha-ratio constant; <= 1 means the perturbative estimate holds.
  double perturbative_excess = 0.0;
};

/// Empirical operator-norm bounds of L_{r,x}^n in the sup and alpha norms
/// over sampled fibers, test functions and frequencies |r| <= eps0.
OperatorBoundsReport operator_norm_bounds_check(const ThermoEngine& engine,
                                                std::span<const BasePoint> xs,
                                                std::span<const double> r_grid, int n_max,
                                                double eps0, std::uint64_t seed);

}  // namespace asiplab
