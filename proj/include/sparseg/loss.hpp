#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sparseg {

/// Smoothing added to numerator and denominator of both Dice losses.
inline constexpr double kDiceEpsilon = 1e-6;

/// Batch Dice loss over every voxel of the minibatch jointly:
///   -(2 * sum(t*r) + eps) / (sum(t) + sum(r) + eps)
/// Accumulation is sequential in 64 bits so values are bit-reproducible.
double batch_dice(std::span<const double> r, std::span<const std::uint8_t> t, double eps = kDiceEpsilon);

struct LossOutput {
  double value = 0.0;
  std::vector<double> gradient;  ///< dL/dr_i, exactly 0 where s_i = 0
};

/// Selective batch Dice loss: the batch Dice loss restricted to voxels with
/// s_i = 1. With A = sum_s t*r and B = sum_s t + sum_s r, the gradient at a
/// selected voxel j is -(2 t_j (B+eps) - (2A+eps)) / (B+eps)^2.
LossOutput selective_batch_dice(std::span<const double> r, std::span<const std::uint8_t> t,
                                std::span<const std::uint8_t> s, double eps = kDiceEpsilon);

/// Value only; skips the gradient allocation.
double selective_batch_dice_value(std::span<const double> r, std::span<const std::uint8_t> t,
                                  std::span<const std::uint8_t> s, double eps = kDiceEpsilon);

}  // namespace sparseg
