#include <doctest.h>

#include <cmath>
#include <sstream>

#include "asiplab/grid.hpp"
#include "asiplab/rng.hpp"
#include "oracles.hpp"

using namespace asiplab;

namespace {

GridFunction smooth(int n, double a1, double b2, Interp interp = Interp::cubic) {
  return GridFunction::sample(n, interp, [&](double z) {
    return 1.0 + a1 * std::cos(2 * oracle::kPi * z) + b2 * std::sin(4 * oracle::kPi * z);
  });
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("interp names") {
    CHECK(interp_from_string("cubic") == Interp::cubic);
    CHECK(interp_from_string("linear") == Interp::linear);
    CHECK_THROWS(interp_from_string("quintic"));
    CHECK(interp_order(Interp::cubic) == 4);
    CHECK(interp_order(Interp::linear) == 2);
  }

  TEST_CASE("evaluation at nodes is exact") {
    for (Interp interp : {Interp::linear, Interp::cubic}) {
      const GridFunction f = smooth(64, 0.3, 0.2, interp);
      for (int i = 0; i < 64; ++i) CHECK(f.evaluate(GridFunction::node(64, i)) == doctest::Approx(f[i]).epsilon(1e-13));
      const Interpolant<double> fi(f);
      for (int i = 0; i < 64; ++i) CHECK(fi(GridFunction::node(64, i)) == doctest::Approx(f[i]).epsilon(1e-13));
    }
  }

  TEST_CASE("interpolation converges at its order") {
    auto err = [](int n, Interp interp) {
      const GridFunction f = smooth(n, 0.3, 0.2, interp);
      const Interpolant<double> fi(f);
      double e = 0.0;
      for (int k = 0; k < 997; ++k) {
        const double z = (k + 0.5) / 997.0;
        e = std::max(e, std::abs(fi(z) - (1.0 + 0.3 * std::cos(2 * oracle::kPi * z) + 0.2 * std::sin(4 * oracle::kPi * z))));
      }
      return e;
    };
    for (Interp interp : {Interp::linear, Interp::cubic}) {
      const double order = std::log2(err(64, interp) / err(128, interp));
      CHECK(order >= interp_order(interp) - 0.2);
    }
  }

  TEST_CASE("variation examples") {
    CHECK(variation_alpha(GridFunction::constant(128, Interp::cubic, 3.0), 1.0, 0.5) == 0.0);
    const GridFunction c = GridFunction::sample(2048, Interp::cubic, [](double z) { return std::cos(2 * oracle::kPi * z); });
    const double v = variation_alpha(c, 1.0, 0.5);
    CHECK(v <= oracle::kCosLipschitz);
    CHECK(v >= 0.98 * oracle::kCosLipschitz);
  }

  TEST_CASE("spike variation grows with N") {
    double last = 0.0;
    for (int n : {64, 128, 256, 512}) {
      GridFunction f = GridFunction::constant(n, Interp::linear, 0.0);
      f[n / 2] = 1.0;
      const double v = variation_alpha(f, 1.0, 0.25);
      CHECK(v == doctest::Approx(static_cast<double>(n)));
      CHECK(v > last);
      last = v;
    }
  }

  TEST_CASE("variation is a lower bound that rises under refinement") {
    const auto f = [](double z) { return std::abs(std::sin(3 * oracle::kPi * z)); };
    double last = 0.0;
    for (int n : {128, 256, 512}) {
      const double v = variation_alpha(GridFunction::sample(n, Interp::cubic, f), 0.5, 0.25);
      CHECK(v >= last - 1e-12);
      last = v;
    }
  }

  TEST_CASE("measure basics") {
    FiberMeasure leb = FiberMeasure::lebesgue(256);
    CHECK(leb.total_mass() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(leb.integrate(smooth(256, 0.3, 0.2)) == doctest::Approx(1.0).epsilon(1e-13));
    FiberMeasure m({1.0, 3.0});
    m.normalize();
    CHECK(m.weights()[1] == doctest::Approx(0.75));
    FiberMeasure z({0.0, 0.0});
    CHECK_THROWS(z.normalize());
  }

  TEST_CASE("cone_embed examples") {
    const FiberMeasure leb = FiberMeasure::lebesgue(1024);
    const GridFunction one = GridFunction::constant(1024, Interp::cubic, 1.0);
    const GridFunction two = GridFunction::constant(1024, Interp::cubic, 2.0);
    for (const auto& u : {one, two}) {
      const GridFunction h = cone_embed(u, leb, 1.0, 1.0, 0.5);
      for (double v : h.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    }

    const GridFunction u = smooth(1024, 0.1, 0.0);
    const double v = variation_alpha(u, 1.0, 0.5);
    CHECK(v == doctest::Approx(oracle::kEmbedVariation).epsilon(1e-4));
    const GridFunction h = cone_embed(u, leb, 1.0, 1.0, 0.5);
    for (int i = 0; i < 1024; i += 37) CHECK(h[i] == doctest::Approx((u[i] + v) / (1.0 + v)).epsilon(1e-12));
    CHECK(std::abs(leb.integrate(h) - 1.0) <= 1e-10);

    CHECK_THROWS_WITH_AS(cone_embed(GridFunction::constant(64, Interp::cubic, 0.0), FiberMeasure::lebesgue(64), 1.0, 1.0, 0.5),
                         "zero function", std::invalid_argument);
  }

  TEST_CASE("cone_check examples") {
    const FiberMeasure leb = FiberMeasure::lebesgue(512);
    const GridFunction one = GridFunction::constant(512, Interp::cubic, 1.0);
    for (double s : {1.0, 2.0, 10.0}) CHECK(cone_check(one, s, 1.0, 1.0 / 6, 1.0, leb).inside);
    const GridFunction sign = smooth(512, 1.5, 0.0);
    const ConeCertificate c = cone_check(sign, 1.0, 1.0, 1.0 / 6, 1.0, leb);
    CHECK_FALSE(c.inside);
    CHECK(c.reason == "negative");
    CHECK(sign[c.i] < 0.0);
    GridFunction heavy = one;
    for (auto& v : heavy.values()) v *= 2.0;
    CHECK(cone_check(heavy, 1.0, 1.0, 1.0 / 6, 1.0, leb).reason == "normalization");
  }

  TEST_CASE("random embedded functions are in the cone") {
    Rng rng(2024);
    const FiberMeasure leb = FiberMeasure::lebesgue(512);
    for (int k = 0; k < 30; ++k) {
      const double a = rng.uniform(-0.9, 0.9), b = rng.uniform(-0.05, 0.05);
      const GridFunction u = smooth(512, a * 0.5, b);
      const GridFunction h = cone_embed(u, leb, 1.0, 1.0, 1.0 / 6);
      const ConeCertificate c = cone_check(h, 1.0, 1.0, 1.0 / 6, 1.0, leb);
      CHECK(c.inside);
      CHECK(c.worst_excess <= 0.0);
    }
  }

  TEST_CASE("cone variation bound, derived form") {
    // The oscillation condition gives |h(w1) - h(w2)| <= (e^{sQ r^alpha} - 1) h(w2)
    // <= sQ e^{sQ xi^alpha} r^alpha ||h||, so v_alpha(h) <= sQ e^{sQ xi^alpha} ||h||.
    const FiberMeasure leb = FiberMeasure::lebesgue(1024);
    const GridFunction h = cone_embed(smooth(1024, 0.1, 0.0), leb, 1.0, 1.0, 1.0 / 6);
    const ConeVariationBound b = cone_variation_bound(h, 1.0, 1.0, 1.0 / 6, 1.0, 1.0 / 6);
    CHECK(b.derived_holds);
    CHECK(b.derived_bound == doctest::Approx(std::exp(1.0 / 6) * h.sup_norm()));
    CHECK(b.literal_bound == doctest::Approx(b.derived_bound / 6.0));
    CHECK_THROWS(cone_variation_bound(h, 1.0, 1.0, 0.1, 1.0, 0.2));
  }

  TEST_CASE("csv dump") {
    std::ostringstream os;
    write_csv(os, GridFunction::constant(3, Interp::linear, 2.0));
    CHECK(os.str().rfind("index,point,value_re,value_im\n", 0) == 0);
    int lines = 0;
    for (char ch : os.str()) lines += ch == '\n';
    CHECK(lines == 4);
  }
}
