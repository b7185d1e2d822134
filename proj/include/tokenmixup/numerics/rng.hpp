#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tokenmixup/common.hpp"

namespace tkmx::inline TKMX_ABI {

/// Purpose-specific RNG streams. Drawing from one never advances another.
enum class RngStream : std::uint64_t {
  kInit = 1,
  kData = 2,
  kShuffle = 3,
  kMixup = 4,
  kTest = 99,
};

/// Counter-based generator: draw k is a SplitMix64 hash of (seed, stream, k),
/// so any stream is reproducible from its key alone.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, RngStream stream, std::uint64_t substream = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Standard normal resampled until |z| <= 2.
  double truncated_normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tkmx::inline TKMX_ABI
