#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace aoilab {

/// Counter-based generator: the i-th output of a stream is a pure function of
/// (key, i), where key is derived from (seed, stream id). Substreams with
/// distinct ids are statistically independent, which is what the simulator
/// relies on to keep arrivals and service sizes decoupled across policies.
///
/// The mixing function is the SplitMix64 finalizer.
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix(key_ + (++counter_) * kGamma); }

  /// Independent child stream; does not advance this stream.
  CounterRng substream(std::uint64_t id) const noexcept {
    CounterRng child(0, 0);
    child.key_ = mix(key_ ^ mix(id * kGamma + 0x1f83d9abfb41bd6bULL));
    return child;
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Exponential with the given rate by inversion.
  double exponential(double rate) noexcept { return -std::log(uniform_open()) / rate; }

  std::uint64_t counter() const noexcept { return counter_; }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace aoilab
