#pragma once

#include <cmath>
#include <cstdint>

namespace bdsde {

// splitmix64 finisher; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Key for the substream identified by (seed, a, b, c).  Distinct tuples give
// statistically independent streams; equal tuples always give the same stream,
// no matter which thread or in which order the stream is consumed.
inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a,
                                std::uint64_t b = 0, std::uint64_t c = 0) {
  const std::uint64_t g = 0x9e3779b97f4a7c15ULL;
  std::uint64_t k = mix64(seed + g);
  k = mix64(k ^ (a + g));
  k = mix64(k ^ (b + g));
  k = mix64(k ^ (c + g));
  return k;
}

// Counter-based scalar stream: splitmix64 counter, Box-Muller for normals.
// Self-contained on purpose: the output must be identical across runs, thread
// counts and platforms with the same libm, which std::normal_distribution
// (unspecified algorithm) does not promise.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // uniform on (0,1]; never returns 0 so log() stays finite
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = next_unit();
    const double v = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double a = 6.283185307179586476925286766559 * v;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace bdsde
