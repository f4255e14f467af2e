#include <doctest.h>

#include <cmath>

#include "asiplab/limits.hpp"
#include "oracles.hpp"

using namespace asiplab;

namespace {

struct Engines {
  SystemSpec spec;
  Discretization disc;
  ThermoEngine thermo;
  LimitsEngine limits;
  explicit Engines(FiberObservable g = FiberObservable::harmonic(), int n = 256)
      : spec(SystemSpec::default_system()), disc(spec, n, Interp::cubic, g), thermo(disc), limits(thermo) {}
};

Engines& harmonic() {
  static Engines e;
  return e;
}

}  // namespace

TEST_SUITE("limits") {
  TEST_CASE("block config validation") {
    BlockConfig ok{1, 1, {0, 1, 2}, {0.4, 0.4}};
    CHECK_NOTHROW(ok.validate(1.0));
    CHECK_THROWS(BlockConfig{1, 1, {0, 2, 1}, {0.4, 0.4}}.validate(1.0));
    CHECK_THROWS(BlockConfig{1, 1, {0, 1, 2}, {0.4}}.validate(1.0));
    CHECK_THROWS(BlockConfig{1, 1, {0, 1, 2}, {0.4, 1.5}}.validate(1.0));
  }

  TEST_CASE("path sampler memory") {
    const auto& s = harmonic().limits.sampler();
    CHECK(s.memory() >= 8);
    CHECK(s.memory_error() < 1e-10);
    Rng rng(1);
    const auto path = s.path(sample_base(harmonic().spec.base_ptr(), 1, 0), 50, rng);
    REQUIRE(path.size() == 51);
    for (std::size_t j = 0; j + 1 < path.size(); ++j) {
      CHECK(circle_distance(apply_map(harmonic().spec, shift(sample_base(harmonic().spec.base_ptr(), 1, 0), static_cast<std::int64_t>(j)), path[j]), path[j + 1]) <= 1e-9);
    }
  }

  TEST_CASE("encoding: zero frequencies give one") {
    const std::vector<double> r(3, 0.0);
    const EncodingResult e = harmonic().limits.encoding_check(r, 50, 3);
    CHECK(std::abs(e.lhs - 1.0) <= 1e-14);
    CHECK(std::abs(e.rhs - 1.0) <= 1e-10);
  }

  TEST_CASE("encoding: single step and modulus bound") {
    for (double r0 : {0.3, -0.45}) {
      const std::vector<double> r{r0};
      const EncodingResult e = harmonic().limits.encoding_check(r, 400, 4);
      CHECK(e.within_contract);
      CHECK(std::abs(e.lhs) <= 1.0 + 1e-12);
      CHECK(std::abs(e.rhs) <= 1.0 + 1e-9);
    }
    CHECK_THROWS(harmonic().limits.encoding_check(std::vector<double>{1.5}, 10, 1));
  }

  TEST_CASE("condition H degenerate and bounded cases") {
    const BlockConfig zero{1, 1, {0, 1, 2}, {0.0, 0.0}};
    const std::vector<int> ks{0, 1, 2};
    const ConditionHResult z = harmonic().limits.condition_h_check(zero, ks, 100, 5);
    for (const auto& row : z.rows) CHECK(row.difference <= 1e-12);
    const BlockConfig c{1, 1, {0, 1, 2}, {0.4, 0.4}};
    const ConditionHResult h = harmonic().limits.condition_h_check(c, ks, 200, 5);
    for (const auto& row : h.rows) CHECK(row.difference <= 2.0);
  }

  TEST_CASE("condition H decays on single blocks") {
    const BlockConfig c{1, 1, {0, 1, 2}, {0.4, 0.4}};
    const std::vector<int> ks{0, 1, 2, 3, 4, 5, 6};
    const ConditionHResult h = harmonic().limits.condition_h_check(c, ks, 600, 6);
    CHECK_FALSE(h.noise_dominated);
    CHECK(h.c_hat > 0.0);
  }

  TEST_CASE("assumption 6 normalization and modulus") {
    const std::vector<int> ns{2, 4};
    std::vector<std::pair<BasePoint, BasePoint>> pairs;
    for (std::uint64_t i = 0; i < 6; ++i) pairs.push_back(make_agreeing_pair(sample_base(harmonic().spec.base_ptr(), 7, i), 2 + static_cast<int>(i), 10, i));
    const std::vector<std::vector<double>> zero{{0.0, 0.0, 0.0, 0.0}};
    const Assumption6Result z = harmonic().limits.assumption6_check(ns, zero, pairs, 0.25);
    for (const auto& row : z.rows) {
      CHECK(row.sup_norm == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(row.variation <= 1e-9);
    }
    const std::vector<std::vector<double>> draws{{0.3, -0.2, 0.4, 0.1}, {-0.5, 0.5, 0.2, -0.3}};
    const Assumption6Result a = harmonic().limits.assumption6_check(ns, draws, pairs, 0.25);
    for (const auto& row : a.rows) CHECK(row.sup_norm <= 1.0 + 1e-9);
  }

  TEST_CASE("covariances of a constant observable vanish") {
    Engines c(FiberObservable::constant_value(0.7));
    const CovarianceResult r = c.limits.covariance_sequence(3, 100, 50, 8);
    for (const auto& row : r.rows) {
      CHECK(std::abs(row.route_a) <= 1e-12);
      CHECK(std::abs(row.route_b) <= 1e-12);
    }
    const VarianceReport v = c.limits.sigma2_estimate(5, 100, 100, 20, 8);
    CHECK(std::abs(v.sigma2_series) <= 1e-12);
    CHECK(std::abs(v.sigma2_mc) <= 1e-12);
  }

  TEST_CASE("covariance sequence of the default observable") {
    const CovarianceResult r = harmonic().limits.covariance_sequence(4, 400, 200, 9);
    REQUIRE(r.rows.size() == 5);
    CHECK(r.rows[0].route_a >= 0.0);
    CHECK(std::abs(r.rows[4].route_a) < std::abs(r.rows[0].route_a));
  }

  TEST_CASE("stationarity of the sampled orbit") {
    // Cov(g o T^n, g o T^{n+1}) should not depend on n.
    const auto& e = harmonic();
    const int n_samples = 2000;
    std::vector<double> a0, a1, b0, b1;
    for (int i = 0; i < n_samples; ++i) {
      const BasePoint x = sample_base(e.spec.base_ptr(), 10, static_cast<std::uint64_t>(i));
      Rng rng(11, static_cast<std::uint64_t>(i));
      const auto p = e.limits.sampler().path(x, 22, rng);
      const auto g = [&](int j) { return e.disc.observable()(e.spec, x.symbol(j), p[static_cast<std::size_t>(j)]); };
      a0.push_back(g(0));
      a1.push_back(g(1));
      b0.push_back(g(20));
      b1.push_back(g(21));
    }
    const auto ca = stats::covariance_estimate(a0, a1);
    const auto cb = stats::covariance_estimate(b0, b1);
    CHECK(std::abs(ca.mean - cb.mean) <= 4.0 * std::hypot(ca.std_err, cb.std_err));
  }

  TEST_CASE("coboundary variance and norms") {
    Engines c(FiberObservable::coboundary(0.2, 1.0));
    const VarianceReport v = c.limits.sigma2_estimate(20, 400, 1000, 0, 12);
    CHECK(v.sigma2_series <= 0.01);
    const std::vector<int> ns{10, 100, 1000};
    const CoboundaryResult r = c.limits.coboundary_check(0.2, ns, 100, 13);
    for (double l2 : r.l2_norm) CHECK(l2 <= 2.0);
    CHECK(r.verdict == "coboundary-consistent");

    Engines zero(FiberObservable::constant_value(0.0));
    const CoboundaryResult z = zero.limits.coboundary_check(0.0, ns, 20, 13);
    for (double l2 : z.l2_norm) CHECK(l2 == 0.0);
  }

  TEST_CASE("default observable is not a coboundary") {
    const std::vector<int> ns{10, 100, 1000};
    const auto mean = harmonic().limits.observable_mean(200, 14);
    const CoboundaryResult r = harmonic().limits.coboundary_check(mean.mean, ns, 100, 14);
    CHECK(r.verdict == "not coboundary");
    CHECK(r.l2_slope > 0.3);
  }

  TEST_CASE("clt degenerate observable") {
    Engines zero(FiberObservable::constant_value(0.0));
    const CltResult r = zero.limits.clt_test(0.0, 0.0, 100, 50, 15);
    CHECK(r.status == "degenerate");
    for (double v : r.samples) CHECK(v == 0.0);
  }

  TEST_CASE("clt below the variance floor") {
    Engines c(FiberObservable::coboundary(0.2, 1.0));
    CHECK(c.limits.clt_test(1e-4, 0.2, 100, 50, 16).status == "below_floor");
  }

  TEST_CASE("clt small run is consistent") {
    const auto& e = harmonic();
    const auto mean = e.limits.observable_mean(400, 17);
    const VarianceReport v = e.limits.sigma2_estimate(20, 400, 500, 0, 17);
    const CltResult r = e.limits.clt_test(v.sigma2_series, mean.mean, 1000, 300, 17);
    CHECK(r.status == "ok");
    CHECK(r.p_value > 0.001);
    CHECK(std::abs(r.birkhoff_mean - mean.mean) <= 4.0 * std::hypot(r.birkhoff_mean_err, mean.std_err));
  }

  TEST_CASE("lil running max is nondecreasing") {
    const auto& e = harmonic();
    const LilResult r = e.limits.lil_probe(0.56, 0.0769, 2000, 20, 18);
    for (const auto& row : r.running_max) {
      for (std::size_t k = 1; k < row.size(); ++k) CHECK(row[k] >= row[k - 1]);
    }
    CHECK(!r.checkpoints.empty());
  }

  TEST_CASE("lil of a coboundary shrinks") {
    Engines c(FiberObservable::coboundary(0.2, 1.0));
    const LilResult r = c.limits.lil_probe(0.56, 0.2, 20000, 20, 19);
    CHECK(r.median_terminal < 0.2);
  }
}
