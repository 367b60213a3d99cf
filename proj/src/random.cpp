#include "plmc/random.hpp"

#include <cmath>
#include <stdexcept>

namespace plmc {
namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t master_seed, StreamDomain domain)
    : seed_(master_seed) {
  const std::uint64_t k =
      splitmix64(master_seed ^ (0xA0761D6478BD642Full *
                                (static_cast<std::uint64_t>(domain) + 1)));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

double CounterRng::uniform(std::uint64_t path, std::uint32_t step,
                           std::uint32_t j) const {
  const auto w = block(path, step, (j >> 1) | kUniformBit);
  return (j & 1u) ? to_open_unit(w[2], w[3]) : to_open_unit(w[0], w[1]);
}

double CounterRng::normal(std::uint64_t path, std::uint32_t step,
                          std::uint32_t j) const {
  const auto w = block(path, step, j >> 1);
  const double r = std::sqrt(-2.0 * std::log(to_open_unit(w[0], w[1])));
  const double angle = 6.283185307179586 * to_open_unit(w[2], w[3]);
  return (j & 1u) ? r * std::sin(angle) : r * std::cos(angle);
}

void uniform_block(const CounterRng& rng, std::uint64_t first_path,
                   std::uint32_t step, std::uint32_t j,
                   std::span<double, kLanes> out) {
  const std::uint32_t index = (j >> 1) | kUniformBit;
  const bool second = (j & 1u) != 0;
  for (std::size_t l = 0; l < kLanes; ++l) {
    const auto w = rng.block(first_path + l, step, index);
    out[l] = second ? to_open_unit(w[2], w[3]) : to_open_unit(w[0], w[1]);
  }
}

void normal_lanes(const CounterRng& rng, std::uint64_t first_path,
                  std::uint32_t step, std::size_t count,
                  std::span<double> out) {
  if (out.size() < kLanes * count) {
    throw std::invalid_argument("normal_lanes: output buffer too small");
  }
  alignas(64) double even[kLanes], odd[kLanes];
  for (std::size_t pair = 0; 2 * pair < count; ++pair) {
    normal_pair_block(rng, first_path, step, static_cast<std::uint32_t>(pair),
                      std::span<double, kLanes>(even),
                      std::span<double, kLanes>(odd));
    const std::size_t j = 2 * pair;
    for (std::size_t l = 0; l < kLanes; ++l) {
      out[l * count + j] = even[l];
      if (j + 1 < count) out[l * count + j + 1] = odd[l];
    }
  }
}

void uniform_lanes(const CounterRng& rng, std::uint64_t first_path,
                   std::uint32_t step, std::size_t count,
                   std::span<double> out) {
  if (out.size() < kLanes * count) {
    throw std::invalid_argument("uniform_lanes: output buffer too small");
  }
  alignas(64) double buf[kLanes];
  for (std::size_t j = 0; j < count; ++j) {
    uniform_block(rng, first_path, step, static_cast<std::uint32_t>(j),
                  std::span<double, kLanes>(buf));
    for (std::size_t l = 0; l < kLanes; ++l) out[l * count + j] = buf[l];
  }
}

}  // namespace plmc
