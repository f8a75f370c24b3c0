#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sparseg/volume.hpp"

namespace sparseg {

struct MetricReport {
  double dice = 0.0;
  std::optional<double> hausdorff_mm;  ///< undefined unless both masks are non-empty
  std::optional<double> assd2d_mm;     ///< undefined unless some slice is non-empty in both
};

/// 2|a and b| / (|a| + |b|); 1 when both are empty.
double dice_score(const BinaryMask3D& a, const BinaryMask3D& b);

/// Symmetric Hausdorff distance in mm between boundary-voxel centres. A boundary
/// voxel is foreground with a background 6-neighbour; outside the grid counts
/// as background.
std::optional<double> hausdorff_mm(const BinaryMask3D& a, const BinaryMask3D& b, const Spacing& spacing);
std::optional<double> hausdorff_mm(const BinaryMask3D& a, const BinaryMask3D& b);

/// Mean over slices where both masks are non-empty of the in-plane average
/// symmetric surface distance (4-neighbour boundary pixels, sx/sy spacing).
/// Slices where only one mask is non-empty are skipped.
std::optional<double> assd2d_mm(const BinaryMask3D& a, const BinaryMask3D& b, const Spacing& spacing);
std::optional<double> assd2d_mm(const BinaryMask3D& a, const BinaryMask3D& b);

/// All three metrics; spacing is taken from the ground truth.
MetricReport evaluate(const BinaryMask3D& prediction, const BinaryMask3D& truth);

/// 3D boundary flags (6-neighbourhood).
std::vector<std::uint8_t> boundary3d(const BinaryMask3D& mask);
/// Per-slice boundary flags (4-neighbourhood in x/y).
std::vector<std::uint8_t> boundary2d(const BinaryMask3D& mask);

/// Exact squared Euclidean distance (mm^2) from every voxel to the nearest
/// feature voxel, with per-axis spacing. +inf when there are no features.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& features, const Dims& dims,
                                               const Spacing& spacing);

}  // namespace sparseg
