#include "sparseg/volume.hpp"

#include <algorithm>
#include <cmath>

namespace sparseg {

std::string to_string(const Dims& d) {
  return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

bool Spacing::valid() const {
  return std::isfinite(sx) && std::isfinite(sy) && std::isfinite(sz) && sx > 0.0 && sy > 0.0 && sz > 0.0;
}

namespace {

void check_geometry(const Dims& dims, const Spacing& spacing, std::size_t n) {
  if (!dims.positive()) {
    throw std::invalid_argument("grid dims must be positive, got " + to_string(dims));
  }
  if (!spacing.valid()) {
    throw std::invalid_argument("voxel spacing must be finite and > 0");
  }
  if (n != dims.count()) {
    throw std::invalid_argument("voxel count " + std::to_string(n) + " does not match dims " + to_string(dims));
  }
}

}  // namespace

Volume3D::Volume3D(Dims dims, Spacing spacing, std::vector<float> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
  check_geometry(dims_, spacing_, voxels_.size());
  if (!std::all_of(voxels_.begin(), voxels_.end(), [](float v) { return std::isfinite(v); })) {
    throw std::invalid_argument("volume contains non-finite intensities");
  }
}

BinaryMask3D::BinaryMask3D(Dims dims, Spacing spacing, std::vector<std::uint8_t> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
  check_geometry(dims_, spacing_, voxels_.size());
  if (!std::all_of(voxels_.begin(), voxels_.end(), [](std::uint8_t v) { return v <= 1; })) {
    throw std::invalid_argument("binary mask contains values outside {0,1}");
  }
}

BinaryMask3D BinaryMask3D::zeros(Dims dims, Spacing spacing) {
  return BinaryMask3D(dims, spacing, std::vector<std::uint8_t>(dims.count(), 0));
}

std::size_t BinaryMask3D::count() const {
  return static_cast<std::size_t>(std::count(voxels_.begin(), voxels_.end(), std::uint8_t{1}));
}

bool BinaryMask3D::slice_empty(int k) const {
  const auto n = dims_.slice_count();
  const auto first = voxels_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * n);
  return std::none_of(first, first + static_cast<std::ptrdiff_t>(n), [](std::uint8_t v) { return v != 0; });
}

void require_same_dims(const Dims& a, const Dims& b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dims mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

}  // namespace sparseg
