#pragma once

#include <cmath>
#include <cstdint>

namespace shprobe {

// Counter-based generator: every draw is a pure function of (seed, index),
// so parallel consumers can hash disjoint index ranges without shared state
// and results do not depend on evaluation order.  Mixing is the splitmix64
// finalizer.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t index) const {
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in (0, 1]; never returns 0 so it is safe under log().
  double uniform(std::uint64_t index) const {
    return (static_cast<double>(bits(index) >> 11) + 1.0) * 0x1p-53;
  }

  // Standard normal via Box-Muller on the uniform pair (2*index, 2*index+1).
  double normal(std::uint64_t index) const {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  // Integer in [0, n) by 128-bit multiply-shift (no modulo bias to speak of).
  std::uint64_t below(std::uint64_t index, std::uint64_t n) const {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(bits(index)) * n) >> 64);
  }

  // Derive an independent stream, e.g. one per grid cell or bootstrap shard.
  CounterRng substream(std::uint64_t key) const {
    return CounterRng(bits(0x53545245414Dull ^ key));
  }

 private:
  std::uint64_t seed_;
};

}  // namespace shprobe
