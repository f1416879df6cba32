#include <cmath>
#include <numbers>
#include <stdexcept>

#include "catch_amalgamated.hpp"
#include "lockloss/models.hpp"

using namespace lockloss;
using Catch::Approx;

TEST_CASE("build_system matrices", "[models]") {
  const PhaseSystem s1 = build_system(1, 0.5);
  CHECK(s1.order == 1);
  CHECK(s1.epsilon == 0.5);
  CHECK(s1.A == Matrix(1, 1, {0.0}));
  CHECK(s1.B == Matrix(1, 1, {1.0}));

  const PhaseSystem s2 = build_system(2, 0.5);
  CHECK(s2.dim() == 2);
  CHECK(s2.A == Matrix(2, 2, {0.0, 1.0, 0.0, 0.0}));
  CHECK(s2.B == Matrix(2, 2, {0.0, 0.0, 0.0, 1.0}));
}

TEST_CASE("build_system rejects bad input", "[models]") {
  CHECK_THROWS_AS(build_system(3, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(build_system(0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(build_system(1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_system(1, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_system(2, std::nan("")), std::invalid_argument);
}

TEST_CASE("scale_convert examples", "[models]") {
  const NoiseScale a = scale_convert(1, ScaleQuantity::rho, 1.0);
  CHECK(a.epsilon == Approx(1.0));
  CHECK(a.cnr == Approx(0.5));
  CHECK(a.cnr_db == Approx(10.0 * std::log10(0.5)).epsilon(1e-12));
  CHECK(a.cnr_db == Approx(-3.0103).margin(1e-4));

  CHECK(scale_convert(2, ScaleQuantity::rho, 1.0).epsilon == Approx(1.0));

  const NoiseScale c = scale_convert(1, ScaleQuantity::epsilon, 0.25);
  CHECK(c.rho == Approx(0.25));
  CHECK(c.cnr == Approx(8.0));
  CHECK(c.cnr_db == Approx(9.0309).margin(1e-4));

  const NoiseScale d = scale_convert(2, ScaleQuantity::rho, 0.25);
  CHECK(d.epsilon == Approx(0.125));
  CHECK(d.cnr == Approx(8.0));
}

TEST_CASE("scale_convert from cnr_db", "[models]") {
  for (int order : {1, 2}) {
    const NoiseScale s = scale_convert(order, ScaleQuantity::cnr_db, 9.0309);
    CHECK(0.5 / (s.rho * s.rho) == Approx(s.cnr).epsilon(1e-12));
    CHECK(s.epsilon == Approx(std::pow(s.rho, order == 1 ? 1.0 : 1.5)).epsilon(1e-12));
  }
}

TEST_CASE("scale_convert rejects nonpositive scales", "[models]") {
  CHECK_THROWS_AS(scale_convert(1, ScaleQuantity::epsilon, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(scale_convert(1, ScaleQuantity::rho, -2.0), std::invalid_argument);
  CHECK_THROWS_AS(scale_convert(3, ScaleQuantity::rho, 1.0), std::invalid_argument);
}

TEST_CASE("scale_convert round trip", "[models]") {
  for (int order : {1, 2}) {
    for (double lx = -3.0; lx <= 3.0; lx += 0.25) {
      const double x = std::pow(10.0, lx);
      const double eps = scale_convert(order, ScaleQuantity::rho, x).epsilon;
      const double back = scale_convert(order, ScaleQuantity::epsilon, eps).rho;
      CHECK(std::abs(back - x) <= 1e-12 * x);
    }
  }
}

TEST_CASE("measurement distance identity", "[models]") {
  for (double x = -7.0; x <= 7.0; x += 0.37) {
    for (double r = -7.0; r <= 7.0; r += 0.29) {
      const auto [s0, c0] = measurement(x);
      const auto [s1, c1] = measurement(x + r);
      const double lhs = (s0 - s1) * (s0 - s1) + (c0 - c1) * (c0 - c1);
      const double rhs = 4.0 * std::sin(0.5 * r) * std::sin(0.5 * r);
      CHECK(std::abs(lhs - rhs) < 1e-12);
    }
  }
}
