#include <doctest.h>

#include <cmath>

#include "asiplab/fiber_system.hpp"
#include "asiplab/grid.hpp"
#include "asiplab/rng.hpp"
#include "oracles.hpp"

using namespace asiplab;

namespace {

SystemSpec linear_spec(std::vector<int> d, std::vector<double> eps = {}) {
  SystemSpec::Params p;
  const std::size_t q = d.size();
  p.base = BaseMeasureSpec(std::vector<double>(q, 1.0 / static_cast<double>(q)));
  p.branch_count = std::move(d);
  p.nonlinearity = eps.empty() ? std::vector<double>(q, 0.0) : std::move(eps);
  p.potential.amp.assign(q, 0.0);
  p.observable.offset.assign(q, 0.2);
  p.observable.amplitude = 0.0;
  p.observable.phase.assign(q, 0.0);
  return SystemSpec(std::move(p));
}

BasePoint point_with_x0(const SystemSpec& spec, Symbol s, std::uint64_t seed = 1) {
  return sample_base(spec.base_ptr(), seed, 0).with_symbol(0, s);
}

}  // namespace

TEST_SUITE("fiber_system") {
  TEST_CASE("construction validation") {
    CHECK_THROWS_AS(linear_spec({1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(linear_spec({2, 3}, {-0.1, 0.0}), std::invalid_argument);
    // eps large enough to destroy expansion
    CHECK_THROWS_AS(linear_spec({2, 3}, {1.5, 0.0}), std::invalid_argument);
    CHECK_NOTHROW(SystemSpec::default_system());
  }

  TEST_CASE("apply_map examples") {
    const SystemSpec s = linear_spec({2, 3});
    CHECK(apply_map(s, point_with_x0(s, 0), 0.3) == doctest::Approx(oracle::kDoubling03).epsilon(1e-15));
    CHECK(apply_map(s, point_with_x0(s, 1), 0.5) == doctest::Approx(oracle::kTripling05).epsilon(1e-15));
    const SystemSpec n = linear_spec({2, 3}, {0.05, 0.0});
    CHECK(apply_map(n, point_with_x0(n, 0), 0.25) == doctest::Approx(oracle::kNonlinearQuarter).epsilon(1e-15));
  }

  TEST_CASE("inverse branch examples") {
    const SystemSpec s = linear_spec({2, 3});
    const auto b2 = inverse_branches(s, point_with_x0(s, 0), 0.5);
    REQUIRE(b2.size() == 2);
    CHECK(b2[0] == 0.25);
    CHECK(b2[1] == 0.75);
    const auto b3 = inverse_branches(s, point_with_x0(s, 1), 0.0);
    REQUIRE(b3.size() == 3);
    CHECK(b3[0] == 0.0);
    CHECK(b3[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(b3[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const SystemSpec n = linear_spec({2, 3}, {0.05, 0.0});
    const auto bn = inverse_branches(n, point_with_x0(n, 0), 0.37);
    REQUIRE(bn.size() == 2);
    for (double z : bn) CHECK(std::abs(apply_map(n, point_with_x0(n, 0), z) - 0.37) <= 1e-12);
  }

  TEST_CASE("round trip, branch count and spacing over the grid") {
    const SystemSpec s = linear_spec({2, 3}, {0.05, 0.1});
    const int N = 512;
    for (Symbol e = 0; e < 2; ++e) {
      const int d = s.degree(e);
      const double spacing = 1.0 / d - 2.0 * s.nonlinearity(e) / kTwoPi - 1e-12;
      for (int k = 0; k < N; ++k) {
        const double w = static_cast<double>(k) / N;
        const auto zs = inverse_branches(s, e, w);
        REQUIRE(static_cast<int>(zs.size()) == d);
        for (std::size_t j = 0; j < zs.size(); ++j) {
          CHECK(circle_distance(s.map(e, zs[j]), w) <= 1e-12);
          if (j > 0) CHECK(zs[j] - zs[j - 1] >= spacing);
          if (j > 0) CHECK(zs[j] > zs[j - 1]);
        }
      }
    }
  }

  TEST_CASE("linear round trip is exact") {
    const SystemSpec s = linear_spec({2, 3});
    for (int k = 0; k < 64; ++k) {
      const double w = k / 64.0;
      for (double z : inverse_branches(s, Symbol{1}, w)) CHECK(s.map(1, z) == w);
    }
  }

  TEST_CASE("expansion on the grid") {
    const SystemSpec s = linear_spec({2, 3}, {0.05, 0.1});
    const double gamma = s.holder().gamma_star;
    CHECK(gamma > 1.0);
    for (Symbol e = 0; e < 2; ++e) {
      for (int k = 0; k < 1024; ++k) CHECK(std::abs(s.derivative(e, k / 1024.0)) >= gamma - 1e-12);
    }
  }

  TEST_CASE("q_tilde from the holder constants") {
    const SystemSpec s = SystemSpec::default_system();
    const auto& h = s.holder();
    const double g = std::pow(h.gamma_star, -h.alpha);
    CHECK(h.q_tilde() == doctest::Approx(h.h_tilde * g / (1.0 - g)).epsilon(1e-15));
    CHECK(h.q_tilde() == doctest::Approx(oracle::kDefaultQTilde));
    CHECK(h.xi == doctest::Approx(oracle::kDefaultXi));
    CHECK(h.eta == doctest::Approx(oracle::kDefaultXi));
  }

  TEST_CASE("birkhoff sum examples") {
    const SystemSpec s = linear_spec({2, 3});
    const BasePoint x = sample_base(s.base_ptr(), 3, 0);
    CHECK(birkhoff_sum(s, FiberObservable::constant_value(1.0), x, 0.123, 7) == 7.0);
    CHECK(birkhoff_sum(s, FiberObservable::harmonic(), x, 0.123, 0) == 0.0);
    // offset 0.2, amplitude 0
    CHECK(birkhoff_sum(s, FiberObservable::harmonic(), x, 0.123, 5) == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("birkhoff sums are additive along the orbit") {
    const SystemSpec s = SystemSpec::default_system();
    const BasePoint x = sample_base(s.base_ptr(), 4, 0);
    const FiberObservable g = FiberObservable::harmonic();
    const double z = 0.3141;
    double z5 = z;
    for (int j = 0; j < 5; ++j) z5 = apply_map(s, shift(x, j), z5);
    CHECK(birkhoff_sum(s, g, x, z, 9) ==
          doctest::Approx(birkhoff_sum(s, g, x, z, 5) + birkhoff_sum(s, g, shift(x, 5), z5, 4)).epsilon(1e-13));
  }

  TEST_CASE("coboundary observable telescopes") {
    const SystemSpec s = SystemSpec::default_system();
    const BasePoint x = sample_base(s.base_ptr(), 6, 0);
    const FiberObservable g = FiberObservable::coboundary(0.2, 1.0);
    for (int n : {1, 10, 50}) {
      const double v = birkhoff_sum(s, g, x, 0.77, n);
      CHECK(std::abs(v - 0.2 * n) <= 2.0 + 1e-9);
    }
  }
}
