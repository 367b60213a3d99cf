#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace plmc {

// Philox4x32-10 (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// Stateless: the output is a pure function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
         static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
         static_cast<std::uint32_t>(p0)};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

// Width of the batch kernels. Ensembles are processed in blocks of this many
// paths; partial blocks are padded so every path sees the same code path.
inline constexpr std::size_t kLanes = 64;

// Independent random streams derived from one master seed (the sampler, the
// iid target sampler, ...). Folded into the Philox key.
enum class StreamDomain : std::uint32_t {
  sampler = 0,
  target = 1,
  verification = 2,
};

// Counter layout: {draw-block | kind bit, step, path_lo, path_hi}.
// Normal pairs use kind bit 0, uniform pairs kind bit 1, so the value of the
// j-th normal (or uniform) drawn by `path` at `step` depends on nothing else.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t master_seed,
                      StreamDomain domain = StreamDomain::sampler);

  std::uint64_t seed() const { return seed_; }
  const PhiloxKey& key() const { return key_; }

  PhiloxCounter block(std::uint64_t path, std::uint32_t step,
                      std::uint32_t index) const {
    return philox4x32_10({index, step, static_cast<std::uint32_t>(path),
                          static_cast<std::uint32_t>(path >> 32)},
                         key_);
  }

  // Scalar accessors. Statistically identical to the batch kernels below, but
  // not guaranteed to be bit-identical to them (different math kernels); the
  // ensemble steppers only use the batch kernels.
  double uniform(std::uint64_t path, std::uint32_t step, std::uint32_t j) const;
  double normal(std::uint64_t path, std::uint32_t step, std::uint32_t j) const;

 private:
  std::uint64_t seed_;
  PhiloxKey key_;
};

inline constexpr std::uint32_t kUniformBit = 0x80000000u;

// 52-bit uniform in the open interval (0, 1). (With 53 bits the largest value
// rounds to 1.)
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (std::uint64_t{hi} << 32) | lo;
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1p-52;
}

// Uniform j for kLanes consecutive paths starting at first_path.
void uniform_block(const CounterRng& rng, std::uint64_t first_path,
                   std::uint32_t step, std::uint32_t j,
                   std::span<double, kLanes> out);

// Normals 2*pair and 2*pair+1 for kLanes consecutive paths (Box-Muller on one
// Philox block per path).
void normal_pair_block(const CounterRng& rng, std::uint64_t first_path,
                       std::uint32_t step, std::uint32_t pair,
                       std::span<double, kLanes> even,
                       std::span<double, kLanes> odd);

// Fills out[lane * count + j] with normal j of path first_path + lane, for
// j < count.
void normal_lanes(const CounterRng& rng, std::uint64_t first_path,
                  std::uint32_t step, std::size_t count, std::span<double> out);

// Same layout for uniforms.
void uniform_lanes(const CounterRng& rng, std::uint64_t first_path,
                   std::uint32_t step, std::size_t count,
                   std::span<double> out);

}  // namespace plmc
