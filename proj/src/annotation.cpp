#include "sparseg/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sparseg {

int PartialLabel::annotated_slice_count() const {
  return static_cast<int>(
      std::count_if(status.begin(), status.end(), [](SliceStatus s) { return s != SliceStatus::unannotated; }));
}

StructureExtent compute_extent(const BinaryMask3D& gt) {
  const int depth = gt.dims().z;
  int lo = -1;
  int hi = -1;
  for (int z = 0; z < depth; ++z) {
    if (!gt.slice_empty(z)) {
      if (lo < 0) lo = z;
      hi = z;
    }
  }
  if (lo < 0) throw std::invalid_argument("compute_extent: mask is empty");
  return {lo, hi};
}

bool has_interior_gaps(const BinaryMask3D& gt, const StructureExtent& extent) {
  for (int z = extent.z_min; z <= extent.z_max; ++z) {
    if (gt.slice_empty(z)) return true;
  }
  return false;
}

int window_size(double p, int n) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("annotation percentage must lie in (0, 1], got " + std::to_string(p));
  }
  const long k = std::lround(p * n);
  return static_cast<int>(std::clamp<long>(k, 1, n));
}

AnnotationPlan plan_annotation_at(const StructureExtent& extent, int depth, double p, int center) {
  if (extent.z_min < 0 || extent.z_max < extent.z_min || extent.z_max >= depth) {
    throw std::invalid_argument("plan_annotation: extent does not fit the volume depth");
  }
  if (center < extent.z_min || center > extent.z_max) {
    throw std::invalid_argument("plan_annotation: centre slice outside the extent");
  }
  const int k = window_size(p, extent.length());
  int lo = center - (k - 1) / 2;
  int hi = center + k / 2;  // ceil((k-1)/2)
  if (lo < extent.z_min) {
    hi += extent.z_min - lo;
    lo = extent.z_min;
  }
  if (hi > extent.z_max) {
    lo -= hi - extent.z_max;
    hi = extent.z_max;
  }
  return {extent, depth, lo, hi, p};
}

AnnotationPlan plan_annotation(const StructureExtent& extent, int depth, double p, Rng& rng) {
  // validate p before consuming a draw
  window_size(p, extent.length());
  const int center = static_cast<int>(rng.next_int(extent.z_min, extent.z_max));
  return plan_annotation_at(extent, depth, p, center);
}

PartialLabel build_partial_label(const BinaryMask3D& gt, const AnnotationPlan& plan, bool include_borders) {
  const Dims& dims = gt.dims();
  if (plan.depth != dims.z) {
    throw std::invalid_argument("build_partial_label: plan depth " + std::to_string(plan.depth) +
                                " does not match mask depth " + std::to_string(dims.z));
  }
  PartialLabel out{dims, gt.spacing(), std::vector<SliceStatus>(static_cast<std::size_t>(dims.z)),
                   std::vector<std::uint8_t>(dims.count(), 0)};
  const std::size_t plane = dims.slice_count();
  const auto src = gt.voxels();
  for (int z = 0; z < dims.z; ++z) {
    auto& st = out.status[static_cast<std::size_t>(z)];
    if (plan.in_window(z)) {
      st = SliceStatus::window;
      const std::size_t off = static_cast<std::size_t>(z) * plane;
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(off), plane,
                  out.labels.begin() + static_cast<std::ptrdiff_t>(off));
    } else if (include_borders && plan.is_border(z)) {
      st = SliceStatus::border;
    } else {
      st = SliceStatus::unannotated;
    }
  }
  return out;
}

int annotation_cost(const AnnotationPlan& plan) { return plan.window_length(); }

}  // namespace sparseg
