#include "sparseg/postproc.hpp"

#include <cstdint>
#include <vector>

namespace sparseg {

namespace {

struct Voxel {
  int i, j, k;
};

template <typename Visit>
void for_neighbors6(const Dims& d, const Voxel& v, Visit&& visit) {
  static constexpr int off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  for (const auto& o : off) {
    const Voxel n{v.i + o[0], v.j + o[1], v.k + o[2]};
    if (d.contains(n.i, n.j, n.k)) visit(n);
  }
}

template <typename Visit>
void for_neighbors26(const Dims& d, const Voxel& v, Visit&& visit) {
  for (int dk = -1; dk <= 1; ++dk)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0 && dk == 0) continue;
        const Voxel n{v.i + di, v.j + dj, v.k + dk};
        if (d.contains(n.i, n.j, n.k)) visit(n);
      }
}

}  // namespace

BinaryMask3D fill_holes(const BinaryMask3D& mask) {
  const Dims& d = mask.dims();
  const auto src = mask.voxels();
  std::vector<std::uint8_t> outside(d.count(), 0);
  std::vector<Voxel> stack;

  auto seed = [&](int i, int j, int k) {
    const std::size_t idx = d.index(i, j, k);
    if (src[idx] == 0 && !outside[idx]) {
      outside[idx] = 1;
      stack.push_back({i, j, k});
    }
  };
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        if (i == 0 || j == 0 || k == 0 || i == d.x - 1 || j == d.y - 1 || k == d.z - 1) seed(i, j, k);
      }
  while (!stack.empty()) {
    const Voxel v = stack.back();
    stack.pop_back();
    for_neighbors6(d, v, [&](const Voxel& n) { seed(n.i, n.j, n.k); });
  }

  std::vector<std::uint8_t> out(d.count());
  for (std::size_t idx = 0; idx < out.size(); ++idx) out[idx] = outside[idx] ? 0 : 1;
  return BinaryMask3D(d, mask.spacing(), std::move(out));
}

BinaryMask3D largest_component(const BinaryMask3D& mask) {
  const Dims& d = mask.dims();
  const auto src = mask.voxels();
  std::vector<std::int32_t> label(d.count(), -1);
  std::vector<std::size_t> sizes;
  std::vector<Voxel> stack;

  // scanning in linear order means component c contains a smaller minimum index than c+1
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        const std::size_t start = d.index(i, j, k);
        if (!src[start] || label[start] >= 0) continue;
        const auto id = static_cast<std::int32_t>(sizes.size());
        std::size_t size = 0;
        label[start] = id;
        stack.push_back({i, j, k});
        while (!stack.empty()) {
          const Voxel v = stack.back();
          stack.pop_back();
          ++size;
          for_neighbors26(d, v, [&](const Voxel& n) {
            const std::size_t idx = d.index(n.i, n.j, n.k);
            if (src[idx] && label[idx] < 0) {
              label[idx] = id;
              stack.push_back(n);
            }
          });
        }
        sizes.push_back(size);
      }

  std::vector<std::uint8_t> out(d.count(), 0);
  if (sizes.empty()) return BinaryMask3D(d, mask.spacing(), std::move(out));
  std::int32_t best = 0;
  for (std::size_t c = 1; c < sizes.size(); ++c) {
    if (sizes[c] > sizes[static_cast<std::size_t>(best)]) best = static_cast<std::int32_t>(c);
  }
  for (std::size_t idx = 0; idx < out.size(); ++idx) out[idx] = label[idx] == best ? 1 : 0;
  return BinaryMask3D(d, mask.spacing(), std::move(out));
}

BinaryMask3D postprocess(const BinaryMask3D& mask) { return largest_component(fill_holes(mask)); }

}  // namespace sparseg
