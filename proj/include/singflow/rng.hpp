#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "singflow/vec.hpp"

namespace singflow {

/// Derives an independent stream seed from (seed, index). Counter-based
/// splitting: every trajectory owns a stream keyed by its index, so draws
/// are a pure function of (seed, index) regardless of scheduling or worker
/// count. SplitMix64 finalizer provides the avalanche.
inline std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream. mt19937_64 output is pinned by the standard;
/// uniform/normal converters are hand-rolled so draw sequences do not depend
/// on the standard library's distribution implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t stream_seed) : engine_(stream_seed) {}

  RngStream(std::uint64_t seed, std::uint64_t index)
      : engine_(derive_stream_seed(seed, index)) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller; draws exactly two uniforms per pair.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  /// Uniform direction on S^{d-1} (normalized Gaussian vector).
  UnitVec unit_vector(int dim) {
    while (true) {
      Vec v(dim);
      for (int i = 0; i < dim; ++i) v[i] = normal();
      if (v.norm() > 1e-12) return UnitVec(v);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace singflow
