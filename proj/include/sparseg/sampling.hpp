#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sparseg/annotation.hpp"
#include "sparseg/rng.hpp"
#include "sparseg/volume.hpp"

namespace sparseg {

/// Training block. `selection` marks voxels on annotated slices and is fed to the
/// network unchanged as the mask channel, so the two can never disagree.
struct Patch {
  Dims dims;
  std::vector<float> image;
  std::vector<std::uint8_t> target;
  std::vector<std::uint8_t> selection;
  int origin_x = 0;
  int origin_y = 0;
  int origin_z = 0;

  std::span<const std::uint8_t> mask_channel() const { return selection; }
  std::size_t selected_count() const;
};

/// Minibatch of I patches; N = I * C voxels, of which N' are selected.
struct Batch {
  std::vector<Patch> patches;

  std::size_t size() const { return patches.size(); }
  std::size_t voxel_count() const;
  std::size_t selected_count() const;
};

/// Sliding-window origins along one axis: 0, stride, 2*stride, ... plus a final
/// origin flush with the far boundary.
std::vector<int> tile_origins(int extent, int patch, int stride);

/// Keeps every block with at least one annotated (window or border) slice.
std::vector<Patch> extract_blocks(const Volume3D& image, const PartialLabel& label, const Dims& patch,
                                  const Dims& stride);

/// Draws batch_size blocks: without replacement when enough blocks exist, with
/// replacement otherwise. With `augment`, each drawn patch is flipped along x
/// and/or y with probability 1/2; z is never flipped.
Batch sample_batch(std::span<const Patch> blocks, std::size_t batch_size, Rng& rng, bool augment = true);

void flip_x(Patch& p);
void flip_y(Patch& p);

}  // namespace sparseg
