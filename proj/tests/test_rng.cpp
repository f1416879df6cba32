#include <array>
#include <cmath>
#include <cstdint>
#include <set>

#include "catch_amalgamated.hpp"
#include "lockloss/rng.hpp"

using namespace lockloss;

// Known-answer vectors of the Philox4x32-10 reference implementation.
TEST_CASE("philox known answers", "[rng]") {
  CHECK(philox::block({0, 0, 0, 0}, {0, 0}) ==
        philox::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        philox::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        philox::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("identical streams reproduce draws", "[rng]") {
  GaussianSource a(NoiseStream{42, 7});
  GaussianSource b(NoiseStream{42, 7});
  for (int i = 0; i < 1000; ++i) REQUIRE(a.normal() == b.normal());
}

TEST_CASE("different streams differ", "[rng]") {
  GaussianSource a(NoiseStream{42, 7});
  GaussianSource b(NoiseStream{42, 8});
  GaussianSource c(NoiseStream{43, 7});
  int same_b = 0, same_c = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    same_b += x == b.normal();
    same_c += x == c.normal();
  }
  CHECK(same_b == 0);
  CHECK(same_c == 0);
}

TEST_CASE("substreams are distinct and deterministic", "[rng]") {
  const NoiseStream s{1, 2};
  CHECK(s.substream(3) == s.substream(3));
  std::set<std::uint64_t> ids;
  for (std::uint64_t k = 0; k < 1000; ++k) ids.insert(s.substream(k).stream_id);
  CHECK(ids.size() == 1000);
  CHECK(s.substream(0).master_seed == 1);
}

TEST_CASE("uniform range and normal moments", "[rng]") {
  GaussianSource u(NoiseStream{9, 0});
  constexpr int n = 400000;
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(lo > 0.0);
  CHECK(hi <= 1.0);

  GaussianSource g(NoiseStream{9, 1});
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  // standard errors: 1/sqrt(n), sqrt(2/n), sqrt(15/n), sqrt(96/n)
  const double rn = std::sqrt(static_cast<double>(n));
  CHECK(std::abs(s1 / n) < 4.0 / rn);
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0) / rn);
  CHECK(std::abs(s3 / n) < 4.0 * std::sqrt(15.0) / rn);
  CHECK(std::abs(s4 / n - 3.0) < 4.0 * std::sqrt(96.0) / rn);
}
