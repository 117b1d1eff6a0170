// Special functions and reproducible normal variates.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace derdose {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Standard normal density.
template <typename Scalar>
Scalar std_normal_pdf(Scalar x) {
  return Scalar(kInvSqrt2Pi) * std::exp(Scalar(-0.5) * x * x);
}

/// Standard normal CDF, clamped to the open interval (0, 1).
///
/// Evaluated through the complementary error function so that both tails keep
/// full relative precision; Phi(x) + Phi(-x) == 1 to rounding.
template <typename Scalar>
Scalar std_normal_cdf(Scalar x) {
  const Scalar p = Scalar(0.5) * std::erfc(-x * Scalar(kInvSqrt2));
  constexpr Scalar lo = std::numeric_limits<Scalar>::min();
  constexpr Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / 2;
  return p < lo ? lo : (p > hi ? hi : p);
}

/// Logistic function 1 / (1 + exp(-x)), branched on sign so exp never overflows.
template <typename Scalar>
Scalar expit(Scalar x) {
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// Inverse of the standard normal CDF. Returns -inf at 0, +inf at 1 and NaN
/// outside [0, 1].
///
/// Wichura's AS 241 (PPND16), relative accuracy about 1e-16.
double std_normal_quantile(double p);

/// SplitMix64 finalizer. Used to derive per-replication sub-seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Sub-seed for replication `stream_index` of a run seeded with `master_seed`.
constexpr std::uint64_t derive_subseed(std::uint64_t master_seed,
                                       std::uint64_t stream_index) {
  return splitmix64(splitmix64(master_seed) ^ splitmix64(~stream_index));
}

/// Deterministic random stream identified by (master_seed, stream_index).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard; uniforms and normals are produced by hand (53-bit mantissa,
/// inverse-CDF transform) so sequences match across platforms and standard
/// library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_seed_(master_seed),
        stream_index_(stream_index),
        engine_(derive_subseed(master_seed, stream_index)) {}

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  /// Uniform variate on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return std_normal_quantile(uniform()); }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

/// `count` i.i.d. standard normal variates drawn from `stream`.
Eigen::VectorXd draw_std_normal(RngStream& stream, Eigen::Index count);

}  // namespace derdose
