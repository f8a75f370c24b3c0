#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparseg {

/// Grid extent in voxels. Memory order is x-fastest, then y, then z.
struct Dims {
  int x = 0;
  int y = 0;
  int z = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  std::size_t slice_count() const { return static_cast<std::size_t>(x) * static_cast<std::size_t>(y); }
  bool positive() const { return x > 0 && y > 0 && z > 0; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(y) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(x) +
           static_cast<std::size_t>(i);
  }
  bool contains(int i, int j, int k) const { return i >= 0 && j >= 0 && k >= 0 && i < x && j < y && k < z; }

  friend bool operator==(const Dims&, const Dims&) = default;
};

std::string to_string(const Dims& d);

/// Voxel edge lengths in millimetres.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  bool valid() const;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Scalar intensity grid (32-bit floats, all finite).
class Volume3D {
 public:
  Volume3D(Dims dims, Spacing spacing, std::vector<float> voxels);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<const float> voxels() const { return voxels_; }
  float at(int i, int j, int k) const { return voxels_[dims_.index(i, j, k)]; }

  friend bool operator==(const Volume3D&, const Volume3D&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<float> voxels_;
};

/// Binary label grid; construction rejects anything outside {0, 1}.
class BinaryMask3D {
 public:
  BinaryMask3D(Dims dims, Spacing spacing, std::vector<std::uint8_t> voxels);

  static BinaryMask3D zeros(Dims dims, Spacing spacing);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<const std::uint8_t> voxels() const { return voxels_; }
  std::uint8_t at(int i, int j, int k) const { return voxels_[dims_.index(i, j, k)]; }

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool slice_empty(int k) const;

  friend bool operator==(const BinaryMask3D&, const BinaryMask3D&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<std::uint8_t> voxels_;
};

/// Throws std::invalid_argument when the two grids disagree on dims.
void require_same_dims(const Dims& a, const Dims& b, const char* what);

}  // namespace sparseg
