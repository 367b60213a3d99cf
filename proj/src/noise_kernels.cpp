// Compiled with -ffast-math so that log/cos/sin vectorize through libmvec.
// Nothing in this file may depend on NaN/Inf semantics.
#include <math.h>

#include "plmc/random.hpp"

namespace plmc {

void normal_pair_block(const CounterRng& rng, std::uint64_t first_path,
                       std::uint32_t step, std::uint32_t pair,
                       std::span<double, kLanes> even,
                       std::span<double, kLanes> odd) {
  alignas(64) std::uint32_t w0[kLanes], w1[kLanes], w2[kLanes], w3[kLanes];
  const std::uint32_t k0 = rng.key()[0], k1 = rng.key()[1];
  for (std::size_t l = 0; l < kLanes; ++l) {
    const std::uint64_t path = first_path + l;
    std::uint32_t a = pair, b = step, c = static_cast<std::uint32_t>(path),
                  d = static_cast<std::uint32_t>(path >> 32);
    std::uint32_t x = k0, y = k1;
    for (int r = 0; r < 10; ++r) {
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * a;
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c;
      const std::uint32_t na = static_cast<std::uint32_t>(p1 >> 32) ^ b ^ x;
      const std::uint32_t nb = static_cast<std::uint32_t>(p1);
      const std::uint32_t nc = static_cast<std::uint32_t>(p0 >> 32) ^ d ^ y;
      const std::uint32_t nd = static_cast<std::uint32_t>(p0);
      a = na;
      b = nb;
      c = nc;
      d = nd;
      x += 0x9E3779B9u;
      y += 0xBB67AE85u;
    }
    w0[l] = a;
    w1[l] = b;
    w2[l] = c;
    w3[l] = d;
  }
  alignas(64) double radius[kLanes], angle[kLanes];
#pragma omp simd
  for (std::size_t l = 0; l < kLanes; ++l) {
    const double u1 = to_open_unit(w0[l], w1[l]);
    const double u2 = to_open_unit(w2[l], w3[l]);
    radius[l] = sqrt(-2.0 * log(u1));
    angle[l] = 6.283185307179586 * u2;
  }
#pragma omp simd
  for (std::size_t l = 0; l < kLanes; ++l) even[l] = radius[l] * cos(angle[l]);
#pragma omp simd
  for (std::size_t l = 0; l < kLanes; ++l) odd[l] = radius[l] * sin(angle[l]);
}

}  // namespace plmc
