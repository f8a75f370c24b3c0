#pragma once

#include "sparseg/volume.hpp"

namespace sparseg {

/// Background voxels not 6-connected to the volume border become foreground.
BinaryMask3D fill_holes(const BinaryMask3D& mask);

/// Keeps the largest 26-connected foreground component. Equal sizes are broken
/// in favour of the component containing the smallest linear voxel index.
BinaryMask3D largest_component(const BinaryMask3D& mask);

/// Standard refinement: fill_holes, then largest_component.
BinaryMask3D postprocess(const BinaryMask3D& mask);

}  // namespace sparseg
