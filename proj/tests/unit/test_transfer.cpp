#include <doctest.h>

#include <cmath>

#include "asiplab/operator_bounds.hpp"
#include "asiplab/rng.hpp"
#include "asiplab/thermo.hpp"
#include "asiplab/transfer.hpp"
#include "oracles.hpp"

using namespace asiplab;

namespace {

SystemSpec constant_potential(std::vector<int> d, double t, double amp = 0.0) {
  SystemSpec::Params p;
  const std::size_t q = d.size();
  p.base = BaseMeasureSpec(std::vector<double>(q, 1.0 / static_cast<double>(q)));
  p.branch_count = std::move(d);
  p.nonlinearity.assign(q, 0.0);
  p.potential.t = t;
  p.potential.amp.assign(q, amp);
  p.observable.offset.assign(q, 0.2);
  p.observable.phase.assign(q, 0.0);
  return SystemSpec(std::move(p));
}

BasePoint with_prefix(const SystemSpec& s, std::vector<Symbol> prefix, std::uint64_t seed = 1) {
  BasePoint x = sample_base(s.base_ptr(), seed, 0);
  for (std::size_t j = 0; j < prefix.size(); ++j) x = x.with_symbol(static_cast<std::int64_t>(j), prefix[j]);
  return x;
}

GridFunction trig(int n, double a, double b) {
  return GridFunction::sample(n, Interp::cubic, [&](double z) {
    return 1.0 + a * std::cos(kTwoPi * z) + b * std::sin(2 * kTwoPi * z);
  });
}

}  // namespace

TEST_SUITE("transfer") {
  TEST_CASE("transfer_apply examples") {
    const SystemSpec s0 = constant_potential({2, 3}, 0.0);
    const Discretization d0(s0, 128, Interp::cubic);
    const GridFunction one = GridFunction::constant(128, Interp::cubic, 1.0);
    const GridFunction l0 = transfer_apply(d0, with_prefix(s0, {0}), one);
    for (double v : l0.values()) CHECK(v == doctest::Approx(2.0).epsilon(1e-14));

    const double c = 0.3;
    const SystemSpec sc = constant_potential({2, 3}, c);
    const Discretization dc(sc, 128, Interp::cubic);
    const GridFunction lc = transfer_apply(dc, with_prefix(sc, {1}), one);
    for (double v : lc.values()) {
      CHECK(v == doctest::Approx(3.0 * std::exp(c)).epsilon(1e-14));
    }

    const SystemSpec sa = constant_potential({2, 3}, 0.0, 0.1);
    const Discretization da(sa, 128, Interp::cubic);
    CHECK(transfer_apply(da, with_prefix(sa, {0}), one)[0] == doctest::Approx(oracle::kTwoTermCosPotential).epsilon(1e-14));
  }

  TEST_CASE("transfer_iterate examples") {
    const SystemSpec s0 = constant_potential({2, 3}, 0.0);
    const Discretization d(s0, 128, Interp::cubic);
    const BasePoint x = with_prefix(s0, {0, 1, 0});
    const GridFunction u = trig(128, 0.3, 0.1);
    const GridFunction same = transfer_iterate(d, x, u, 0, OperatorKind::raw);
    CHECK(same.values() == u.values());
    const GridFunction one = GridFunction::constant(128, Interp::cubic, 1.0);
    const GridFunction l3 = transfer_iterate(d, x, one, 3, OperatorKind::raw);
    for (double v : l3.values()) {
      CHECK(v == doctest::Approx(oracle::kDegreeProduct232).epsilon(1e-13));
    }

    const SystemSpec s = SystemSpec::default_system();
    const Discretization dd(s, 128, Interp::cubic);
    const BasePoint y = sample_base(s.base_ptr(), 9, 0);
    const std::vector<double> lambdas{2.1, 3.2, 1.9};
    const std::vector<double> zeros(3, 0.0);
    const ComplexGridFunction cu = to_complex(u);
    const auto a = transfer_iterate(dd, y, cu, 3, OperatorKind::normalized, lambdas);
    const auto b = transfer_iterate(dd, y, cu, 3, OperatorKind::perturbed, lambdas, zeros);
    CHECK(a.values() == b.values());
    CHECK_THROWS_AS(transfer_iterate(dd, y, cu, 3, OperatorKind::normalized, std::vector<double>{1.0}),
                    std::invalid_argument);
  }

  TEST_CASE("positivity and linearity") {
    const SystemSpec s = SystemSpec::default_system();
    const Discretization d(s, 256, Interp::cubic);
    const BasePoint x = sample_base(s.base_ptr(), 2, 0);
    const GridFunction u = trig(256, 0.4, 0.2), v = trig(256, -0.3, 0.5);
    GridFunction w = u;
    for (int i = 0; i < 256; ++i) w[i] = 2.0 * u[i] - 0.5 * v[i];
    const auto lu = transfer_apply(d, x, u), lv = transfer_apply(d, x, v), lw = transfer_apply(d, x, w);
    for (int i = 0; i < 256; ++i) {
      CHECK(lw[i] == doctest::Approx(2.0 * lu[i] - 0.5 * lv[i]).epsilon(1e-12));
      CHECK(lu[i] > 0.0);
    }
  }

  TEST_CASE("oracle examples") {
    const SystemSpec s = SystemSpec::doubling_system();
    const BasePoint x = sample_base(s.base_ptr(), 3, 0);
    const FiberObservable g = FiberObservable::harmonic();
    const FiberCallable one = [](double) { return std::complex<double>(1.0, 0.0); };
    CHECK(oracle_transfer(s, g, x, one, 10, 0.3, OperatorKind::raw).real() == doctest::Approx(oracle::kDoublingTenSteps).epsilon(1e-13));

    const SystemSpec sd = SystemSpec::default_system();
    const BasePoint y = sample_base(sd.base_ptr(), 4, 0);
    const FiberCallable u = [](double z) { return std::complex<double>(std::cos(kTwoPi * z), 0.5); };
    const FiberCallable v = [](double z) { return std::complex<double>(z * (1 - z), 0.0); };
    const FiberCallable w = [&](double z) { return 3.0 * u(z) - 2.0 * v(z); };
    const auto ou = oracle_transfer(sd, g, y, u, 3, 0.41, OperatorKind::raw);
    const auto ov = oracle_transfer(sd, g, y, v, 3, 0.41, OperatorKind::raw);
    const auto ow = oracle_transfer(sd, g, y, w, 3, 0.41, OperatorKind::raw);
    CHECK(std::abs(ow - (3.0 * ou - 2.0 * ov)) <= 1e-12);

    CHECK_THROWS_AS(oracle_transfer(sd, g, y, u, 30, 0.41, OperatorKind::raw, {}, {}, 1000), std::length_error);
  }

  TEST_CASE("grid matches oracle at nodes for one step") {
    const SystemSpec s = SystemSpec::default_system();
    const Discretization d(s, 1024, Interp::cubic);
    const BasePoint x = sample_base(s.base_ptr(), 5, 0);
    const GridFunction u = trig(1024, 0.4, 0.2);
    const FiberCallable uf = [](double z) { return std::complex<double>(1.0 + 0.4 * std::cos(kTwoPi * z) + 0.2 * std::sin(2 * kTwoPi * z), 0.0); };
    const GridFunction lu = transfer_apply(d, x, u);
    for (int k = 0; k < 1024; k += 61) {
      const double w = GridFunction::node(1024, k);
      CHECK(std::abs(lu[k] - oracle_transfer(s, FiberObservable::harmonic(), x, uf, 1, w, OperatorKind::raw).real()) <= 1e-8);
    }
  }

  TEST_CASE("projection_Q examples") {
    const FiberMeasure leb = FiberMeasure::lebesgue(128);
    const GridFunction rho = trig(128, 0.2, 0.0);
    const GridFunction one = GridFunction::constant(128, Interp::cubic, 1.0);
    const GridFunction q1 = projection_Q(one, leb, rho);
    for (int i = 0; i < 128; ++i) CHECK(q1[i] == doctest::Approx(rho[i]).epsilon(1e-14));
    const GridFunction c = GridFunction::sample(128, Interp::cubic, [](double z) { return std::cos(kTwoPi * z); });
    const GridFunction qc = projection_Q(c, leb, rho);
    for (double v : qc.values()) CHECK(std::abs(v) <= 1e-14);

    const SystemSpec s = SystemSpec::default_system();
    const Discretization d(s, 256, Interp::cubic);
    const ThermoEngine engine(d);
    const BasePoint x = sample_base(s.base_ptr(), 6, 0);
    const OrbitWindow win = engine.window(x, 0, 3);
    const GridFunction qr = projection_Q(win.rho(0), win.nu(0), win.rho(3));
    for (int i = 0; i < 256; ++i) CHECK(qr[i] == doctest::Approx(win.rho(3)[i]).epsilon(1e-10));
  }

  TEST_CASE("chain identity examples") {
    const SystemSpec s = SystemSpec::default_system();
    const Discretization d(s, 1024, Interp::cubic);
    const ThermoEngine engine(d);
    const BasePoint x = sample_base(s.base_ptr(), 7, 0);
    const FiberCallable u = [](double z) { return std::complex<double>(1.0 + 0.5 * std::cos(kTwoPi * z), 0.0); };
    const OrbitWindow win = engine.window(x, 0, 4);
    const auto lambdas = win.lambdas(0, 4);

    const std::vector<double> r1{0.37};
    CHECK(perturbed_chain_identity_check(d, x, u, r1, std::vector<double>{lambdas[0]}).oracle_discrepancy <= 1e-14);
    const std::vector<double> r0(4, 0.0);
    CHECK(perturbed_chain_identity_check(d, x, u, r0, lambdas).oracle_discrepancy <= 1e-14);
    const std::vector<double> r{0.3, -0.2, 0.1, 0.25};
    const ChainIdentityReport c = perturbed_chain_identity_check(d, x, u, r, lambdas);
    CHECK(c.oracle_discrepancy <= 1e-8);
    CHECK(c.grid_discrepancy <= c.grid_budget);
  }

  TEST_CASE("orbit operator composition") {
    const SystemSpec s = SystemSpec::default_system();
    const Discretization d(s, 256, Interp::cubic);
    const BasePoint x = sample_base(s.base_ptr(), 8, 0);
    OrbitOperator a{x, 2, OperatorKind::raw, {}, {}};
    OrbitOperator b{shift(x, 2), 3, OperatorKind::raw, {}, {}};
    const ComplexGridFunction u = to_complex(trig(256, 0.1, 0.3));
    const auto direct = transfer_iterate(d, x, u, 5, OperatorKind::raw);
    const auto composed = a.then(b).apply(d, u);
    for (int i = 0; i < 256; ++i) CHECK(std::abs(direct[i] - composed[i]) <= 1e-12 * std::abs(direct[i]));
    OrbitOperator wrong{shift(x, 1), 3, OperatorKind::raw, {}, {}};
    CHECK_THROWS(a.then(wrong));
  }

  TEST_CASE("operator bounds: constant potential is a sup-norm contraction at r = 0") {
    const SystemSpec s = constant_potential({2, 3}, 0.2);
    const Discretization d(s, 256, Interp::cubic);
    const ThermoEngine engine(d);
    const std::vector<BasePoint> xs{sample_base(s.base_ptr(), 1, 0), sample_base(s.base_ptr(), 1, 1)};
    const std::vector<double> r{0.0};
    const OperatorBoundsReport rep = operator_norm_bounds_check(engine, xs, r, 6, 1.0, 3);
    // rho = 1 and L_0 averages over preimages, so the ratio is at most 1 and
    // does not grow with n.
    double last = 1.0;
    for (const auto& row : rep.rows) {
      CHECK(row.sup_ratio <= last + 1e-12);
      last = row.sup_ratio;
    }
  }

  TEST_CASE("operator bounds on the default system") {
    const SystemSpec s = SystemSpec::default_system();
    const Discretization d(s, 256, Interp::cubic);
    const ThermoEngine engine(d);
    std::vector<BasePoint> xs;
    for (std::uint64_t i = 0; i < 3; ++i) xs.push_back(sample_base(s.base_ptr(), 2, i));
    const std::vector<double> r{-0.5, 0.5};
    const OperatorBoundsReport rep = operator_norm_bounds_check(engine, xs, r, 8, 1.0, 4);
    CHECK(rep.perturbative_excess <= 1.0);
    CHECK(rep.constant >= 1.0);
    CHECK_THROWS(operator_norm_bounds_check(engine, xs, std::vector<double>{1.5}, 4, 1.0, 4));
  }
}
