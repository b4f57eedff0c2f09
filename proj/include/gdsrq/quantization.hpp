#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gdsrq/random.hpp"

namespace gdsrq {

enum class QuantizerMode { stochastic, passthrough };

/// b-bit stochastic rounding onto the dyadic grid floor(x) + m * 2^-b.
struct QuantizerConfig {
  unsigned bits = 0;
  double delta = 0.0;
  QuantizerMode mode = QuantizerMode::passthrough;

  static constexpr unsigned kMaxBits = 52;

  static QuantizerConfig stochastic(unsigned bits) {
    if (bits < 1 || bits > kMaxBits)
      throw std::invalid_argument("QuantizerConfig: bits must be in [1, 52], got " +
                                  std::to_string(bits));
    return {bits, std::ldexp(1.0, -static_cast<int>(bits)), QuantizerMode::stochastic};
  }

  static QuantizerConfig passthrough() { return {}; }

  /// bits == 0 selects passthrough; this is the config-file convention.
  static QuantizerConfig from_bits(unsigned bits) {
    return bits == 0 ? passthrough() : stochastic(bits);
  }
};

/// The two grid points bracketing x and the probability of rounding up.
struct GridInterval {
  double lower = 0.0;
  double upper = 0.0;
  double p_upper = 0.0;
};

/// lower <= x < upper = lower + delta. Exact for finite x: the fractional
/// part and its scaling by a power of two introduce no rounding.
inline GridInterval grid_interval(double x, const QuantizerConfig& cfg) {
  const double ell = std::floor(x);
  const double scaled = (x - ell) / cfg.delta;
  const double m = std::floor(scaled);
  return {ell + m * cfg.delta, ell + (m + 1.0) * cfg.delta, scaled - m};
}

/// (x - tau_i)(tau_{i+1} - x): the variance of the stochastic rounding of x.
inline double exact_quantizer_variance(double x, const QuantizerConfig& cfg) {
  if (cfg.mode == QuantizerMode::passthrough) return 0.0;
  const auto iv = grid_interval(x, cfg);
  return (x - iv.lower) * (iv.upper - x);
}

inline double quantize_scalar(double x, const QuantizerConfig& cfg, CounterStream& rng) {
  if (!std::isfinite(x)) throw std::invalid_argument("quantize_scalar: non-finite input");
  if (cfg.mode == QuantizerMode::passthrough) return x;
  const auto iv = grid_interval(x, cfg);
  // Always consume one draw so stream positions do not depend on the data.
  const double u = rng.uniform01();
  if (iv.p_upper == 0.0) return iv.lower;
  return u < iv.p_upper ? iv.upper : iv.lower;
}

/// Componentwise quantization with an independent draw per coordinate.
inline void quantize_vector(std::span<const double> x, std::span<double> out,
                            const QuantizerConfig& cfg, CounterStream& rng) {
  if (x.size() != out.size())
    throw std::invalid_argument("quantize_vector: output size does not match input");
  for (std::size_t d = 0; d < x.size(); ++d) out[d] = quantize_scalar(x[d], cfg, rng);
}

inline std::vector<double> quantize_vector(std::span<const double> x, const QuantizerConfig& cfg,
                                           CounterStream& rng) {
  std::vector<double> out(x.size());
  quantize_vector(x, out, cfg, rng);
  return out;
}

/// Quantizer policy used by the simulator. Any type with the same call
/// operator can stand in (e.g. an instrumented quantizer in tests).
struct StochasticQuantizer {
  QuantizerConfig cfg;

  void operator()(std::span<const double> x, std::span<double> out, CounterStream& rng) const {
    quantize_vector(x, out, cfg, rng);
  }
};

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased, 0 for a single trial
  std::uint64_t trials = 0;

  double standard_error() const {
    return trials > 0 ? std::sqrt(variance / static_cast<double>(trials)) : 0.0;
  }
};

inline SampleMoments estimate_quantizer_moments(double x, const QuantizerConfig& cfg,
                                                std::uint64_t trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("estimate_quantizer_moments: trials must be >= 1");
  CounterStream rng = make_stream(seed, StreamDomain::test);
  // Welford accumulation.
  double mean = 0.0, m2 = 0.0;
  for (std::uint64_t t = 1; t <= trials; ++t) {
    const double q = quantize_scalar(x, cfg, rng);
    const double d = q - mean;
    mean += d / static_cast<double>(t);
    m2 += d * (q - mean);
  }
  SampleMoments m;
  m.mean = mean;
  m.variance = trials > 1 ? m2 / static_cast<double>(trials - 1) : 0.0;
  m.trials = trials;
  return m;
}

}  // namespace gdsrq
