#include "sparseg/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sparseg {

std::size_t Patch::selected_count() const {
  return static_cast<std::size_t>(std::count(selection.begin(), selection.end(), std::uint8_t{1}));
}

std::size_t Batch::voxel_count() const {
  std::size_t n = 0;
  for (const auto& p : patches) n += p.dims.count();
  return n;
}

std::size_t Batch::selected_count() const {
  std::size_t n = 0;
  for (const auto& p : patches) n += p.selected_count();
  return n;
}

std::vector<int> tile_origins(int extent, int patch, int stride) {
  if (patch > extent) {
    throw std::invalid_argument("patch extent " + std::to_string(patch) + " exceeds volume extent " +
                                std::to_string(extent));
  }
  if (patch < 1 || stride < 1) throw std::invalid_argument("patch and stride must be >= 1");
  std::vector<int> out;
  for (int o = 0; o + patch < extent; o += stride) out.push_back(o);
  out.push_back(extent - patch);
  return out;
}

std::vector<Patch> extract_blocks(const Volume3D& image, const PartialLabel& label, const Dims& patch,
                                  const Dims& stride) {
  const Dims& dims = image.dims();
  require_same_dims(dims, label.dims, "extract_blocks");
  if (patch.x > dims.x || patch.y > dims.y || patch.z > dims.z) {
    throw std::invalid_argument("extract_blocks: patch " + to_string(patch) + " larger than volume " +
                                to_string(dims));
  }
  const auto xs = tile_origins(dims.x, patch.x, stride.x);
  const auto ys = tile_origins(dims.y, patch.y, stride.y);
  const auto zs = tile_origins(dims.z, patch.z, stride.z);
  const auto src = image.voxels();

  std::vector<Patch> out;
  for (int oz : zs) {
    bool any_annotated = false;
    for (int z = oz; z < oz + patch.z; ++z) any_annotated = any_annotated || label.annotated(z);
    if (!any_annotated) continue;
    for (int oy : ys) {
      for (int ox : xs) {
        Patch p;
        p.dims = patch;
        p.origin_x = ox;
        p.origin_y = oy;
        p.origin_z = oz;
        p.image.resize(patch.count());
        p.target.resize(patch.count());
        p.selection.resize(patch.count());
        for (int k = 0; k < patch.z; ++k) {
          const std::uint8_t sel = label.annotated(oz + k) ? 1 : 0;
          for (int j = 0; j < patch.y; ++j) {
            const std::size_t from = dims.index(ox, oy + j, oz + k);
            const std::size_t to = patch.index(0, j, k);
            for (int i = 0; i < patch.x; ++i) {
              p.image[to + i] = src[from + i];
              p.target[to + i] = sel ? label.labels[from + i] : 0;
              p.selection[to + i] = sel;
            }
          }
        }
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

namespace {

template <typename T>
void flip_rows_x(std::vector<T>& v, const Dims& d) {
  for (std::size_t row = 0; row < static_cast<std::size_t>(d.y) * d.z; ++row) {
    auto first = v.begin() + static_cast<std::ptrdiff_t>(row * d.x);
    std::reverse(first, first + d.x);
  }
}

template <typename T>
void flip_rows_y(std::vector<T>& v, const Dims& d) {
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y / 2; ++j) {
      auto a = v.begin() + static_cast<std::ptrdiff_t>(d.index(0, j, k));
      auto b = v.begin() + static_cast<std::ptrdiff_t>(d.index(0, d.y - 1 - j, k));
      std::swap_ranges(a, a + d.x, b);
    }
  }
}

}  // namespace

void flip_x(Patch& p) {
  flip_rows_x(p.image, p.dims);
  flip_rows_x(p.target, p.dims);
  flip_rows_x(p.selection, p.dims);
}

void flip_y(Patch& p) {
  flip_rows_y(p.image, p.dims);
  flip_rows_y(p.target, p.dims);
  flip_rows_y(p.selection, p.dims);
}

Batch sample_batch(std::span<const Patch> blocks, std::size_t batch_size, Rng& rng, bool augment) {
  if (blocks.empty()) throw std::invalid_argument("sample_batch: empty block list");
  if (batch_size == 0) throw std::invalid_argument("sample_batch: batch size must be >= 1");
  const auto n = static_cast<std::int64_t>(blocks.size());

  std::vector<std::size_t> picks;
  picks.reserve(batch_size);
  if (blocks.size() < batch_size) {
    for (std::size_t b = 0; b < batch_size; ++b) picks.push_back(static_cast<std::size_t>(rng.next_int(0, n - 1)));
  } else {
    // partial Fisher-Yates
    std::vector<std::size_t> order(blocks.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t b = 0; b < batch_size; ++b) {
      const auto j = static_cast<std::size_t>(rng.next_int(static_cast<std::int64_t>(b), n - 1));
      std::swap(order[b], order[j]);
      picks.push_back(order[b]);
    }
  }

  Batch batch;
  batch.patches.reserve(batch_size);
  for (std::size_t idx : picks) {
    Patch p = blocks[idx];
    if (augment) {
      if (rng.next_uniform() < 0.5) flip_x(p);
      if (rng.next_uniform() < 0.5) flip_y(p);
    }
    batch.patches.push_back(std::move(p));
  }
  return batch;
}

}  // namespace sparseg
