#include "tokenmixup/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace tkmx::inline TKMX_ABI {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, RngStream stream, std::uint64_t substream)
    : key_(mix64(mix64(seed + kGolden) ^ mix64(static_cast<std::uint64_t>(stream) * kGolden + substream))) {}

std::uint64_t CounterRng::next_u64() { return mix64(key_ + (++counter_) * kGolden); }

double CounterRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double CounterRng::normal() {
  // Box-Muller, one output per pair of draws.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double CounterRng::truncated_normal() {
  for (;;) {
    const double z = normal();
    if (std::abs(z) <= 2.0) return z;
  }
}

std::size_t CounterRng::below(std::size_t n) {
  if (n == 0) throw UsageError("CounterRng::below(0)");
  // Rejection sampling keeps the result unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r < limit) return static_cast<std::size_t>(r % n);
  }
}

}  // namespace tkmx::inline TKMX_ABI
