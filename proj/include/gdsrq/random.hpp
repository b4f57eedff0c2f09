#pragma once

#include <cstdint>
#include <limits>

namespace gdsrq {

/// splitmix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Tags that separate independent random domains derived from one master seed.
enum class StreamDomain : std::uint64_t {
  graph = 1,
  dataset = 2,
  initial_iterate = 3,
  quantization = 4,
  test = 99,
};

/// Counter-based generator: the n-th output is a pure function of (key, n).
///
/// Satisfies UniformRandomBitGenerator, so it can feed <random> distributions,
/// but the library itself only uses uniform01() to keep draws identical
/// across standard library implementations.
class CounterStream {
 public:
  using result_type = std::uint64_t;

  constexpr CounterStream() noexcept = default;
  constexpr explicit CounterStream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return mix64(key_ ^ mix64(counter_++));
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform01() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Key for the stream owned by (seed, domain, index).
constexpr std::uint64_t derive_key(std::uint64_t seed, StreamDomain domain,
                                   std::uint64_t index = 0) noexcept {
  return mix64(mix64(seed) ^ mix64((static_cast<std::uint64_t>(domain) << 32) ^ index));
}

constexpr CounterStream make_stream(std::uint64_t seed, StreamDomain domain,
                                    std::uint64_t index = 0) noexcept {
  return CounterStream(derive_key(seed, domain, index));
}

}  // namespace gdsrq
