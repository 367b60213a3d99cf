#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "plmc/random.hpp"

using namespace plmc;

TEST_SUITE("random") {
  TEST_CASE("philox4x32-10 known answers") {
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
          PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32_10({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u}) ==
          PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                        {0xa4093822u, 0x299f31d0u}) ==
          PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }

  TEST_CASE("open unit interval endpoints") {
    CHECK(to_open_unit(0, 0) > 0.0);
    CHECK(to_open_unit(~0u, ~0u) < 1.0);
  }

  TEST_CASE("draws are pure functions of (seed, path, step, draw)") {
    const CounterRng a(42), b(42), c(43);
    CHECK(a.normal(7, 3, 5) == b.normal(7, 3, 5));
    CHECK(a.uniform(7, 3, 5) == b.uniform(7, 3, 5));
    CHECK(a.normal(7, 3, 5) != c.normal(7, 3, 5));
    CHECK(a.normal(7, 3, 5) != a.normal(8, 3, 5));
    CHECK(a.normal(7, 3, 5) != a.normal(7, 4, 5));
    const CounterRng t(42, StreamDomain::target);
    CHECK(a.uniform(0, 0, 0) != t.uniform(0, 0, 0));
  }

  TEST_CASE("batch kernels match the scalar accessors") {
    const CounterRng rng(123);
    const std::size_t count = 5;
    std::vector<double> u(kLanes * count), z(kLanes * count);
    uniform_lanes(rng, 1000, 9, count, u);
    normal_lanes(rng, 1000, 9, count, z);
    for (std::size_t l = 0; l < kLanes; ++l) {
      for (std::size_t j = 0; j < count; ++j) {
        const auto jj = static_cast<std::uint32_t>(j);
        CHECK(u[l * count + j] == rng.uniform(1000 + l, 9, jj));
        CHECK(z[l * count + j] == doctest::Approx(rng.normal(1000 + l, 9, jj)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("batch buffers are size checked") {
    const CounterRng rng(1);
    std::vector<double> small(kLanes * 2 - 1);
    CHECK_THROWS_AS(normal_lanes(rng, 0, 0, 2, small), std::invalid_argument);
    CHECK_THROWS_AS(uniform_lanes(rng, 0, 0, 2, small), std::invalid_argument);
  }

  TEST_CASE("normal and uniform moments") {
    const CounterRng rng(2024);
    const std::size_t n = 100000;
    double s1 = 0, s2 = 0, s4 = 0, u1 = 0, u2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = rng.normal(i, 0, 3);
      s1 += z;
      s2 += z * z;
      s4 += z * z * z * z;
      const double u = rng.uniform(i, 0, 3);
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      u1 += u;
      u2 += u * u;
    }
    const double nn = static_cast<double>(n);
    CHECK(std::abs(s1 / nn) < 4.0 / std::sqrt(nn));
    CHECK(std::abs(s2 / nn - 1.0) < 4.0 * std::sqrt(2.0 / nn));
    CHECK(std::abs(s4 / nn - 3.0) < 4.0 * std::sqrt(96.0 / nn));
    CHECK(std::abs(u1 / nn - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / nn));
    CHECK(std::abs(u2 / nn - 1.0 / 3.0) < 4.0 * std::sqrt(4.0 / 45.0 / nn));
  }

  TEST_CASE("normal pair members are uncorrelated") {
    const CounterRng rng(5);
    const std::size_t n = 100000;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += rng.normal(i, 1, 0) * rng.normal(i, 1, 1);
    CHECK(std::abs(s / static_cast<double>(n)) < 4.0 / std::sqrt(static_cast<double>(n)));
  }
}
