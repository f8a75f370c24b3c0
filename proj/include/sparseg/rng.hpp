#pragma once

#include <array>
#include <cstdint>

namespace sparseg {

/// Deterministic xoshiro256** generator addressed by (seed, stream).
///
/// The 256-bit state is filled by four splitmix64 outputs whose counter starts
/// at `seed ^ splitmix64(stream ^ 0x5851f42d4c957f2d)`. The algorithm is part of
/// the reproducibility contract: changing it changes every recorded trace.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  /// Uniform real in [0, 1) with 53 bits of resolution.
  double next_uniform();
  /// Uniform integer in [lo, hi], both inclusive. Throws if lo > hi.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller (cosine branch only, so draws stay paired with calls).
  double next_normal();
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  /// Independent child generator. Children of different ids never share a stream
  /// and do not depend on how many values the parent has drawn.
  Rng fork(std::uint64_t id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stream ids used by the training pipeline. Fixed so traces replay exactly.
namespace streams {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kPlans = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kBatchesPhase1 = 4;
inline constexpr std::uint64_t kBatchesPhase2 = 5;
inline constexpr std::uint64_t kFullSubset = 6;
}  // namespace streams

}  // namespace sparseg
