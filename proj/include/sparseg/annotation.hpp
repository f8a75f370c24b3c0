#pragma once

#include <cstdint>
#include <vector>

#include "sparseg/rng.hpp"
#include "sparseg/volume.hpp"

namespace sparseg {

/// First and last non-empty slice of a structure (the annotator's two clicks).
struct StructureExtent {
  int z_min = 0;
  int z_max = 0;

  int length() const { return z_max - z_min + 1; }
  friend bool operator==(const StructureExtent&, const StructureExtent&) = default;
};

/// Consecutive annotation window inside the extent, plus the border slices
/// outside it which are known to be empty.
struct AnnotationPlan {
  StructureExtent extent;
  int depth = 0;
  int window_lo = 0;
  int window_hi = 0;
  double percentage = 1.0;

  int window_length() const { return window_hi - window_lo + 1; }
  bool in_window(int z) const { return z >= window_lo && z <= window_hi; }
  bool is_border(int z) const { return (z >= 0 && z < extent.z_min) || (z > extent.z_max && z < depth); }
};

enum class SliceStatus : std::uint8_t { unannotated = 0, window = 1, border = 2 };

/// Labels known only on annotated slices; unannotated slices hold zeros that carry no claim.
struct PartialLabel {
  Dims dims;
  Spacing spacing;
  std::vector<SliceStatus> status;
  std::vector<std::uint8_t> labels;

  bool annotated(int z) const { return status[static_cast<std::size_t>(z)] != SliceStatus::unannotated; }
  int annotated_slice_count() const;
};

/// Throws std::invalid_argument on an empty mask. Interior empty slices do not
/// split the extent; see has_interior_gaps.
StructureExtent compute_extent(const BinaryMask3D& gt);
bool has_interior_gaps(const BinaryMask3D& gt, const StructureExtent& extent);

/// Number of window slices for percentage p over an extent of n slices:
/// round-half-away-from-zero of p*n, clamped to [1, n].
int window_size(double p, int n);

/// Window of `window_size(p, n)` slices centred on `center` and shifted the minimum
/// amount needed to stay inside the extent.
AnnotationPlan plan_annotation_at(const StructureExtent& extent, int depth, double p, int center);
/// Draws the centre uniformly from [z_min, z_max] and delegates to plan_annotation_at.
AnnotationPlan plan_annotation(const StructureExtent& extent, int depth, double p, Rng& rng);

/// Window slices copy gt; border slices are all-zero and annotated unless
/// include_borders is false, in which case they become unannotated.
PartialLabel build_partial_label(const BinaryMask3D& gt, const AnnotationPlan& plan, bool include_borders = true);

/// Delineated slices only; border slices cost two clicks and are not counted.
int annotation_cost(const AnnotationPlan& plan);

}  // namespace sparseg
