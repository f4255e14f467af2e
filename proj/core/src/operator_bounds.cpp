#include "asiplab/operator_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "asiplab/parallel.hpp"
#include "asiplab/rng.hpp"
#include "asiplab/stats.hpp"

namespace asiplab {
namespace {

struct CaseResult {
  double abs_r = 0.0;
  std::vector<double> sup_ratio;
  std::vector<double> alpha_ratio;
};

// A smooth bump and a Lipschitz tent; both strictly positive.
std::vector<GridFunction> test_functions(int n, Interp interp, Rng& rng) {
  const double phase = rng.uniform();
  const double amp = rng.uniform(0.2, 0.8);
  const double centre = rng.uniform();
  const double width = rng.uniform(0.05, 0.3);
  std::vector<GridFunction> out;
  out.push_back(GridFunction::sample(n, interp, [&](double z) {
    return 1.0 + amp * std::cos(kTwoPi * (z - phase));
  }));
  out.push_back(GridFunction::sample(n, interp, [&](double z) {
    return 0.1 + std::max(0.0, 1.0 - circle_distance(z, centre) / width);
  }));
  return out;
}

}  // namespace

OperatorBoundsReport operator_norm_bounds_check(const ThermoEngine& engine,
                                                std::span<const BasePoint> xs,
                                                std::span<const double> r_grid, int n_max,
                                                double eps0, std::uint64_t seed) {
  if (n_max < 2) throw std::invalid_argument("n_max must be >= 2");
  for (double r : r_grid) {
    if (std::abs(r) > eps0) throw std::invalid_argument("frequency outside |r| <= eps0");
  }
  const auto& disc = engine.disc();
  const auto& hp = engine.spec().holder();
  const int n_points = engine.n_points();

  std::vector<double> rs(r_grid.begin(), r_grid.end());
  if (std::find(rs.begin(), rs.end(), 0.0) == rs.end()) rs.push_back(0.0);

  const auto per_x = parallel_map<std::vector<CaseResult>>(xs.size(), [&](std::size_t i) {
    Rng rng(seed, i);
    const OrbitWindow win = engine.window(xs[i], 0, n_max);
    const auto fs = test_functions(n_points, disc.interp(), rng);
    std::vector<CaseResult> cases;
    for (double r : rs) {
      const std::vector<double> r_seq(1, r);
      for (const auto& f : fs) {
        CaseResult c;
        c.abs_r = std::abs(r);
        const double sup0 = f.sup_norm();
        const double hol0 = holder_norm(f, hp.alpha, hp.eta);
        ComplexGridFunction v = to_complex(f);
        for (int n = 1; n <= n_max; ++n) {
          v = push_perturbed(disc, win, n - 1, std::move(v), r_seq);
          c.sup_ratio.push_back(v.sup_norm() / sup0);
          c.alpha_ratio.push_back(holder_norm(v, hp.alpha, hp.eta) / hol0);
        }
        cases.push_back(std::move(c));
      }
    }
    return cases;
  });

  OperatorBoundsReport rep;
  rep.eps0 = eps0;
  for (double r : r_grid) rep.max_abs_r = std::max(rep.max_abs_r, std::abs(r));
  rep.rows.resize(static_cast<std::size_t>(n_max));
  double c0 = 0.0;
  for (int n = 1; n <= n_max; ++n) rep.rows[static_cast<std::size_t>(n - 1)].n = n;
  for (const auto& cases : per_x) {
    for (const auto& c : cases) {
      for (std::size_t k = 0; k < c.sup_ratio.size(); ++k) {
        auto& row = rep.rows[k];
        row.sup_ratio = std::max(row.sup_ratio, c.sup_ratio[k]);
        row.alpha_ratio = std::max(row.alpha_ratio, c.alpha_ratio[k]);
        if (c.abs_r == 0.0) c0 = std::max(c0, c.alpha_ratio[k]);
      }
    }
  }
  const double q = hp.q_tilde();
  for (const auto& cases : per_x) {
    for (const auto& c : cases) {
      for (double a : c.alpha_ratio) {
        rep.perturbative_excess = std::max(rep.perturbative_excess, a / (c0 * (1.0 + c.abs_r * q)));
      }
    }
  }

  std::vector<double> ns;
  std::vector<double> ls;
  std::vector<double> la;
  for (const auto& row : rep.rows) {
    rep.constant = std::max({rep.constant, row.sup_ratio, row.alpha_ratio});
    ns.push_back(row.n);
    ls.push_back(std::log(row.sup_ratio));
    la.push_back(std::log(row.alpha_ratio));
  }
  rep.sup_slope = stats::linear_fit(ns, ls).slope;
  rep.alpha_slope = stats::linear_fit(ns, la).slope;
  return rep;
}

}  // namespace asiplab
