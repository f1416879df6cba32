#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "lockloss/eikonal.hpp"

using namespace lockloss;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("quadratic quasi-potential solves the truncated eikonal equation", "[eikonal]") {
  const Eigen::Matrix2d S = quadratic_quasi_potential();
  CHECK(S(0, 0) == Approx(1.0));
  CHECK(S(0, 1) == Approx(-0.5));
  CHECK(S(1, 0) == Approx(-0.5));
  CHECK(S(1, 1) == Approx(0.5));
  // quadratic part of H(z, S z): (J z).(S z) + (S z)^T Q (S z) = 0 for every z
  Eigen::Matrix2d J, Q;
  J << -1.0, 0.5, -1.0, 0.0;
  Q << 1.0, 1.0, 1.0, 2.0;
  std::mt19937_64 gen(1);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d z(nd(gen), nd(gen));
    const Eigen::Vector2d p = S * z;
    CHECK(std::abs((J * z).dot(p) + p.dot(Q * p)) < 1e-12);
    // and the full Hamiltonian vanishes to third order
    const double h = 1e-3;
    CHECK(std::abs(hamiltonian(h * z(0), h * z(1), h * p(0), h * p(1))) < 1e-8 * z.squaredNorm());
  }
  CHECK(S.determinant() > 0.0);
  CHECK(S.trace() > 0.0);
}

TEST_CASE("launch values follow the quadratic form", "[eikonal]") {
  const Eigen::Matrix2d S = quadratic_quasi_potential();
  for (double r0 : {1e-2, 1e-3, 1e-4}) {
    EikonalOptions opt;
    opt.r0 = r0;
    opt.t_max = 1e-3;
    const Characteristic ray = integrate_characteristic(0.7, opt);
    const Eigen::Vector2d z(r0 * std::cos(0.7), r0 * std::sin(0.7));
    CHECK(ray.samples.front().Phi == Approx(0.5 * z.dot(S * z)).epsilon(1e-12));
    CHECK(ray.samples.front().Phi < r0 * r0);
  }
}

TEST_CASE("rays conserve H and climb Phi", "[eikonal]") {
  const auto rays = launch_characteristics(32, 1e-3, 1e-3);
  REQUIRE(rays.size() == 32);
  for (const auto& r : rays) {
    CHECK(r.max_abs_h < 1e-6);
    for (const auto& s : r.samples) CHECK(std::abs(hamiltonian(s.e, s.phi, s.pe, s.pphi)) < 1e-6);
    for (std::size_t k = 1; k < r.samples.size(); ++k) CHECK(r.samples[k].Phi >= r.samples[k - 1].Phi);
    for (const auto& s : r.samples) {
      CHECK(std::abs(s.e) <= 2.0 * kPi);
      CHECK(std::abs(s.phi) <= 8.0);
    }
  }
  CHECK_THROWS_AS(launch_characteristics(4, 1e-3, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(launch_characteristics(16, 0.5, 1e-3), std::invalid_argument);
}

TEST_CASE("quasi-potential at the origin and the saddles", "[eikonal]") {
  const CausalExponentResult r = causal_exponent_second_order();
  CHECK(quasi_potential_at(r.rays, 0.0, 0.0) < 1e-6);
  CHECK(r.Phi_saddle == Approx(0.6).margin(0.1));
  CHECK(r.Phi_mirror == Approx(r.Phi_saddle).epsilon(0.02));
  CHECK(quasi_potential_at(r.rays, kPi, 0.0) == r.Phi_saddle);
  CHECK(r.exponent == Approx(0.85).margin(0.15));
  CHECK(r.exponent / r.Phi_saddle == Approx(std::numbers::sqrt2).epsilon(0.05));
}

TEST_CASE("exponent is linear in Phi", "[eikonal]") {
  CHECK(causal_exponent_from_quasi_potential(1.2) == Approx(2.0 * causal_exponent_from_quasi_potential(0.6)));
}

TEST_CASE("no ray near the point is an error", "[eikonal]") {
  const auto rays = launch_characteristics(8, 1e-3, 1e-2);
  CHECK_THROWS_AS(quasi_potential_at(rays, 100.0, 100.0), std::runtime_error);
}

TEST_CASE("saddle value is stable under refinement", "[eikonal][slow]") {
  const double base = causal_exponent_second_order(64).Phi_saddle;
  EikonalOptions fine;
  fine.dt = 5e-4;
  fine.record_stride = 20;
  const double half_dt = causal_exponent_second_order(64, fine).Phi_saddle;
  const double more_rays = causal_exponent_second_order(128).Phi_saddle;
  CHECK(std::abs(half_dt - base) / base < 0.02);
  CHECK(std::abs(more_rays - base) / base < 0.02);
}

TEST_CASE("ray dump layout", "[eikonal]") {
  const auto rays = launch_characteristics(8, 1e-3, 1e-2);
  std::ostringstream os;
  write_rays_csv(os, rays);
  const std::string s = os.str();
  CHECK(s.rfind("ray_id,t,e,phi,pe,pphi,Phi\n", 0) == 0);
}
