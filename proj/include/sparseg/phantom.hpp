#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "sparseg/rng.hpp"
#include "sparseg/volume.hpp"

namespace sparseg {

/// Parameters of the synthetic labelled volumes used in place of clinical scans.
///
/// The structure is a union of `lobes_min..lobes_max` ellipsoids. Each principal
/// radius of the main lobe is drawn from [size_min, size_max] times the half extent
/// of its axis; secondary lobes are smaller and overlap the main one. Each lobe is
/// rotated about the z axis by a random angle.
struct PhantomSpec {
  Dims dims{48, 48, 32};
  Spacing spacing{1.5, 1.5, 3.0};
  int lobes_min = 1;
  int lobes_max = 3;
  double size_min = 0.25;
  double size_max = 0.5;
  double contrast = 1.0;
  double noise_sigma = 0.3;
  double texture_amplitude = 0.4;

  /// Throws std::invalid_argument if the spec is inconsistent or cannot fit.
  void validate() const;
};

struct LabeledVolume {
  Volume3D image;
  BinaryMask3D mask;
};

LabeledVolume generate_phantom(const PhantomSpec& spec, Rng& rng);

/// Case i is generated from `rng.fork(i)`; the parent is not advanced.
LabeledVolume generate_case(const PhantomSpec& spec, const Rng& rng, std::size_t index);
std::vector<LabeledVolume> generate_dataset(const PhantomSpec& spec, std::size_t n, const Rng& rng);

}  // namespace sparseg
