#include <doctest.h>

#include <cmath>

#include "asiplab/rng.hpp"
#include "asiplab/thermo.hpp"
#include "oracles.hpp"

using namespace asiplab;

namespace {

SystemSpec constant_potential(double t) {
  SystemSpec::Params p;
  p.base = BaseMeasureSpec({0.5, 0.5});
  p.branch_count = {2, 3};
  p.nonlinearity = {0.0, 0.0};
  p.potential.t = t;
  p.potential.amp = {0.0, 0.0};
  p.observable.offset = {0.2, -0.1};
  p.observable.phase = {0.0, 0.25};
  return SystemSpec(std::move(p));
}

struct Fixture {
  SystemSpec spec = SystemSpec::default_system();
  Discretization disc{spec, 512, Interp::cubic};
  ThermoEngine engine{disc};
  BasePoint x(std::uint64_t i) const { return sample_base(spec.base_ptr(), 42, i); }
};

GridFunction tent(int n, double c, double w) {
  return GridFunction::sample(n, Interp::cubic, [&](double z) { return std::max(0.0, 1.0 - circle_distance(z, c) / w); });
}

}  // namespace

TEST_SUITE("thermo") {
  TEST_CASE("doubling system closed forms") {
    const SystemSpec s = SystemSpec::doubling_system();
    const Discretization d(s, 256, Interp::cubic);
    const ThermoEngine e(d);
    for (int depth : {5, 20}) {
      const ConformalResult c = e.conformal_pullback(sample_base(s.base_ptr(), 1, 0), depth);
      CHECK(c.lambda == doctest::Approx(2.0).epsilon(1e-12));
      for (double w : c.nu.weights()) CHECK(std::abs(w - 1.0 / 256) <= 1e-12);
    }
    const ThermoState st = e.state(sample_base(s.base_ptr(), 1, 3));
    for (double v : st.rho.values()) CHECK(std::abs(v - 1.0) <= 1e-10);
  }

  TEST_CASE("constant potential scales lambda") {
    const double c = 0.4;
    const SystemSpec s = constant_potential(c);
    const Discretization d(s, 256, Interp::cubic);
    const ThermoEngine e(d);
    for (std::uint64_t i = 0; i < 4; ++i) {
      const BasePoint x = sample_base(s.base_ptr(), 2, i);
      const ConformalResult r = e.conformal(x);
      CHECK(r.lambda == doctest::Approx(s.degree(x.symbol(0)) * std::exp(c)).epsilon(1e-12));
      const DensityResult rho = e.invariant_density(x, 20);
      for (double v : rho.rho.values()) CHECK(std::abs(v - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("lambda stabilizes in depth for a pinned symbol") {
    Fixture f;
    const BasePoint x = f.x(0).with_symbol(0, 0);
    const double l20 = f.engine.conformal_pullback(x, 20).lambda;
    const double l30 = f.engine.conformal_pullback(x, 30).lambda;
    CHECK(std::abs(l20 - l30) < 5e-5);
    const ConformalResult c = f.engine.conformal(x);
    CHECK(c.duality_residual < 1e-6);
  }

  TEST_CASE("depth increments shrink geometrically") {
    Fixture f;
    const BasePoint x = f.x(1);
    std::vector<double> inc;
    double last = f.engine.conformal_pullback(x, 2).lambda;
    for (int k = 4; k <= 12; k += 2) {
      const double l = f.engine.conformal_pullback(x, k).lambda;
      inc.push_back(std::abs(l - last));
      last = l;
    }
    for (std::size_t i = 1; i < inc.size(); ++i) {
      if (inc[i - 1] > 1e-14) CHECK(inc[i] / inc[i - 1] < 1.0);
    }
  }

  TEST_CASE("duality over random smooth u") {
    Fixture f;
    Rng rng(5);
    for (std::uint64_t i = 0; i < 5; ++i) {
      const BasePoint x = f.x(10 + i);
      const ConformalResult here = f.engine.conformal(x);
      const ConformalResult next = f.engine.conformal(shift(x, 1));
      for (int k = 0; k < 20; ++k) {
        const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1), c = rng.uniform(-1, 1);
        const GridFunction u = GridFunction::sample(512, Interp::cubic, [&](double z) {
          return c + a * std::cos(kTwoPi * z) + b * std::sin(3 * kTwoPi * z);
        });
        const double lhs = next.nu.integrate(GridFunction(f.disc.apply(x.symbol(0), u.values()), Interp::cubic));
        CHECK(std::abs(lhs - here.lambda * here.nu.integrate(u)) <= 1e-6);
      }
    }
  }

  TEST_CASE("state residuals") {
    Fixture f;
    for (std::uint64_t i = 0; i < 3; ++i) {
      const ThermoState st = f.engine.state(f.x(20 + i));
      CHECK(st.converged);
      CHECK(st.fixed_point_residual <= 1e-6);
      CHECK(std::abs(st.nu.integrate(st.rho) - 1.0) <= 1e-8);
      CHECK(st.rho_min > 0.0);
      CHECK(st.lambda_chain.size() == static_cast<std::size_t>(st.depth));
    }
  }

  TEST_CASE("pushforward against Cesaro average") {
    SystemSpec::Params p = SystemSpec::default_system().params();
    p.nonlinearity = {0.05, 0.1};
    const SystemSpec s(p);
    const Discretization d(s, 512, Interp::cubic);
    const ThermoEngine e(d);
    const DensityResult r = e.invariant_density(sample_base(s.base_ptr(), 3, 0), 30, true);
    REQUIRE(r.cesaro.has_value());
    CHECK(r.cesaro_difference < 1e-5);
  }

  TEST_CASE("window identities") {
    Fixture f;
    const OrbitWindow w = f.engine.window(f.x(30), -2, 5);
    for (int j = -2; j < 5; ++j) {
      const GridFunction one = GridFunction::constant(512, Interp::cubic, 1.0);
      const double lhs = w.nu(j + 1).integrate(GridFunction(f.disc.apply(w.symbol(j), one.values()), Interp::cubic));
      CHECK(lhs == doctest::Approx(w.lambda(j) * w.nu(j).integrate(one)).epsilon(1e-12));
      const GridFunction pushed = push_normalized(f.disc, w, j, w.rho(j), 1);
      for (int i = 0; i < 512; i += 17) CHECK(pushed[i] == doctest::Approx(w.rho(j + 1)[i]).epsilon(1e-10));
    }
    CHECK(w.lambdas(0, 3).size() == 3);
    CHECK_THROWS(w.nu(6));
  }

  TEST_CASE("invariance of mu along the orbit") {
    // mu_x(h o T_x) = mu_{tau x}(h) fiber by fiber.
    Fixture f;
    Rng rng(8);
    for (int k = 0; k < 20; ++k) {
      const BasePoint x = f.x(40 + static_cast<std::uint64_t>(k));
      const OrbitWindow w = f.engine.window(x, 0, 1);
      const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
      const auto h = [&](double z) { return a * std::cos(kTwoPi * z) + b * std::sin(kTwoPi * z); };
      const GridFunction hT = GridFunction::sample(512, Interp::cubic, [&](double z) { return h(apply_map(f.spec, x, z)); });
      const GridFunction h1 = GridFunction::sample(512, Interp::cubic, h);
      CHECK(std::abs(w.mu(0, hT.values()) - w.mu(1, h1.values())) <= 1e-5);
    }
  }

  TEST_CASE("gap: density is the fixed line") {
    Fixture f;
    const BasePoint x = f.x(50);
    const OrbitWindow w = f.engine.window(x, 0, 0);
    const std::vector<std::pair<BasePoint, GridFunction>> inst{{x, w.rho(0)}};
    const GapFit fit = f.engine.gap_estimate(inst, 6);
    for (double r : fit.instances[0].residual) CHECK(r <= 1e-12);
    CHECK(fit.status == GapFit::Status::gap_too_strong);
  }

  TEST_CASE("gap: doubling system contracts at least at rate one half") {
    const SystemSpec s = SystemSpec::doubling_system();
    const Discretization d(s, 1024, Interp::cubic);
    const ThermoEngine e(d);
    Rng rng(3);
    std::vector<std::pair<BasePoint, GridFunction>> inst;
    for (std::uint64_t i = 0; i < 10; ++i) {
      const double c = rng.uniform(), w = rng.uniform(0.05, 0.3);
      inst.emplace_back(sample_base(s.base_ptr(), 42, i), tent(1024, c, w));
    }
    const GapFit fit = e.gap_estimate(inst, 12);
    CHECK(fit.status == GapFit::Status::measured);
    CHECK(fit.kappa <= oracle::kDoublingKappaMax);
  }

  TEST_CASE("gap: default system") {
    Fixture f;
    Rng rng(4);
    std::vector<std::pair<BasePoint, GridFunction>> inst;
    for (std::uint64_t i = 0; i < 6; ++i) {
      const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
      inst.emplace_back(f.x(60 + i), GridFunction::sample(512, Interp::cubic, [&](double z) {
                          return a * std::cos(kTwoPi * z) + b * std::sin(2 * kTwoPi * z);
                        }));
    }
    const GapFit fit = f.engine.gap_estimate(inst, 12);
    CHECK(fit.status == GapFit::Status::measured);
    CHECK(fit.kappa < 1.0);
    CHECK(fit.r2 >= 0.98);
    for (std::size_t n = 0; n < fit.envelope.size(); ++n) {
      if (static_cast<double>(n + 1) <= static_cast<double>(fit.fit_points)) {
        CHECK(fit.envelope[n] <= fit.constant * std::pow(fit.kappa, static_cast<double>(n + 1)) * (1 + 1e-12));
      }
    }
    CHECK_THROWS(f.engine.gap_estimate(inst, 1));
  }

  TEST_CASE("uniform bounds") {
    Fixture f;
    std::vector<BasePoint> xs;
    for (std::uint64_t i = 0; i < 10; ++i) xs.push_back(f.x(70 + i));
    const UniformBounds b = f.engine.uniform_bounds(xs, 10);
    CHECK(b.rho_min >= 1.0 / b.constant);
    CHECK(b.rho_max <= b.constant);
    CHECK(b.l0n_min >= 1.0 / b.constant);
    CHECK(b.l0n_max <= b.constant);
  }

  TEST_CASE("regularity") {
    Fixture f;
    const BasePoint x = f.x(80);
    const std::vector<std::pair<BasePoint, BasePoint>> same{{x, x}};
    const std::vector<int> ns{1, 3};
    const std::vector<double> betas{0.5, 1.0};
    const RegularityTable t0 = f.engine.regularity_check(same, ns, betas);
    REQUIRE(t0.rows.size() == 1);
    CHECK(t0.rows[0].d_lambda == 0.0);
    CHECK(t0.rows[0].d_rho == 0.0);
    for (double v : t0.rows[0].d_l0n) CHECK(v == 0.0);

    std::vector<std::pair<BasePoint, BasePoint>> pairs;
    for (int i = 0; i < 16; ++i) pairs.push_back(make_agreeing_pair(f.x(90 + static_cast<std::uint64_t>(i)), 1 + i % 8, 12, 5 + static_cast<std::uint64_t>(i)));
    const RegularityTable t = f.engine.regularity_check(pairs, ns, betas);
    REQUIRE(!t.fits.empty());
    for (const auto& fit : t.fits) {
      CHECK(std::isfinite(fit.bound));
      CHECK(fit.beta_hat > 0.0);
    }
  }
}
