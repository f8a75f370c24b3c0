#include "sparseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sparseg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) on one line of n
// samples spaced `step` mm apart. f holds squared distances, updated in place.
void edt_line(double* f, std::size_t stride, int n, double step, std::vector<double>& buf, std::vector<int>& v,
              std::vector<double>& z) {
  buf.resize(static_cast<std::size_t>(n));
  v.resize(static_cast<std::size_t>(n));
  z.resize(static_cast<std::size_t>(n) + 1);
  for (int q = 0; q < n; ++q) buf[q] = f[static_cast<std::size_t>(q) * stride];

  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (buf[q] == kInf) continue;
    const double xq = step * q;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s = 0.0;
    // z[0] = -inf, so the loop always stops at k = 0
    while (true) {
      const double xv = step * v[k];
      s = ((buf[q] + xq * xq) - (buf[v[k]] + xv * xv)) / (2.0 * (xq - xv));
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) return;  // no finite sites on this line

  int j = 0;
  for (int q = 0; q < n; ++q) {
    const double xq = step * q;
    while (z[j + 1] < xq) ++j;
    const double dx = xq - step * v[j];
    f[static_cast<std::size_t>(q) * stride] = buf[v[j]] + dx * dx;
  }
}

bool on_border3(const Dims& d, int i, int j, int k) {
  return i == 0 || j == 0 || k == 0 || i == d.x - 1 || j == d.y - 1 || k == d.z - 1;
}

struct SliceSums {
  double total = 0.0;
  std::size_t count = 0;
};

}  // namespace

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& features, const Dims& dims,
                                               const Spacing& spacing) {
  std::vector<double> f(dims.count());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = features[i] ? 0.0 : kInf;
  std::vector<double> buf;
  std::vector<int> v;
  std::vector<double> z;
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(dims.x);
  const std::size_t sz = dims.slice_count();
  for (int k = 0; k < dims.z; ++k)
    for (int j = 0; j < dims.y; ++j) edt_line(f.data() + dims.index(0, j, k), sx, dims.x, spacing.sx, buf, v, z);
  for (int k = 0; k < dims.z; ++k)
    for (int i = 0; i < dims.x; ++i) edt_line(f.data() + dims.index(i, 0, k), sy, dims.y, spacing.sy, buf, v, z);
  for (int j = 0; j < dims.y; ++j)
    for (int i = 0; i < dims.x; ++i) edt_line(f.data() + dims.index(i, j, 0), sz, dims.z, spacing.sz, buf, v, z);
  return f;
}

double dice_score(const BinaryMask3D& a, const BinaryMask3D& b) {
  require_same_dims(a.dims(), b.dims(), "dice_score");
  const auto va = a.voxels();
  const auto vb = b.voxels();
  std::size_t inter = 0;
  std::size_t na = 0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    na += va[i];
    nb += vb[i];
    inter += va[i] & vb[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::vector<std::uint8_t> boundary3d(const BinaryMask3D& mask) {
  const Dims& d = mask.dims();
  const auto m = mask.voxels();
  std::vector<std::uint8_t> out(d.count(), 0);
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        const std::size_t idx = d.index(i, j, k);
        if (!m[idx]) continue;
        if (on_border3(d, i, j, k) || !m[d.index(i - 1, j, k)] || !m[d.index(i + 1, j, k)] ||
            !m[d.index(i, j - 1, k)] || !m[d.index(i, j + 1, k)] || !m[d.index(i, j, k - 1)] ||
            !m[d.index(i, j, k + 1)]) {
          out[idx] = 1;
        }
      }
  return out;
}

std::vector<std::uint8_t> boundary2d(const BinaryMask3D& mask) {
  const Dims& d = mask.dims();
  const auto m = mask.voxels();
  std::vector<std::uint8_t> out(d.count(), 0);
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        const std::size_t idx = d.index(i, j, k);
        if (!m[idx]) continue;
        if (i == 0 || j == 0 || i == d.x - 1 || j == d.y - 1 || !m[d.index(i - 1, j, k)] ||
            !m[d.index(i + 1, j, k)] || !m[d.index(i, j - 1, k)] || !m[d.index(i, j + 1, k)]) {
          out[idx] = 1;
        }
      }
  return out;
}

std::optional<double> hausdorff_mm(const BinaryMask3D& a, const BinaryMask3D& b, const Spacing& spacing) {
  require_same_dims(a.dims(), b.dims(), "hausdorff_mm");
  if (a.empty() || b.empty()) return std::nullopt;
  const Dims& d = a.dims();
  const auto ba = boundary3d(a);
  const auto bb = boundary3d(b);
  const auto da = squared_distance_transform(ba, d, spacing);
  const auto db = squared_distance_transform(bb, d, spacing);
  double worst = 0.0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (ba[i]) worst = std::max(worst, db[i]);
    if (bb[i]) worst = std::max(worst, da[i]);
  }
  return std::sqrt(worst);
}

std::optional<double> hausdorff_mm(const BinaryMask3D& a, const BinaryMask3D& b) {
  return hausdorff_mm(a, b, a.spacing());
}

std::optional<double> assd2d_mm(const BinaryMask3D& a, const BinaryMask3D& b, const Spacing& spacing) {
  require_same_dims(a.dims(), b.dims(), "assd2d_mm");
  const Dims& d = a.dims();
  const Dims plane{d.x, d.y, 1};
  const std::size_t n = plane.count();
  const auto ba = boundary2d(a);
  const auto bb = boundary2d(b);

  double slice_sum = 0.0;
  int slices = 0;
  for (int k = 0; k < d.z; ++k) {
    if (a.slice_empty(k) || b.slice_empty(k)) continue;
    const auto first = static_cast<std::ptrdiff_t>(static_cast<std::size_t>(k) * n);
    const std::vector<std::uint8_t> sa(ba.begin() + first, ba.begin() + first + static_cast<std::ptrdiff_t>(n));
    const std::vector<std::uint8_t> sb(bb.begin() + first, bb.begin() + first + static_cast<std::ptrdiff_t>(n));
    const auto da = squared_distance_transform(sa, plane, spacing);
    const auto db = squared_distance_transform(sb, plane, spacing);
    SliceSums from_a;
    SliceSums from_b;
    for (std::size_t i = 0; i < n; ++i) {
      if (sa[i]) {
        from_a.total += std::sqrt(db[i]);
        ++from_a.count;
      }
      if (sb[i]) {
        from_b.total += std::sqrt(da[i]);
        ++from_b.count;
      }
    }
    slice_sum += (from_a.total + from_b.total) / static_cast<double>(from_a.count + from_b.count);
    ++slices;
  }
  if (slices == 0) return std::nullopt;
  return slice_sum / slices;
}

std::optional<double> assd2d_mm(const BinaryMask3D& a, const BinaryMask3D& b) {
  return assd2d_mm(a, b, a.spacing());
}

MetricReport evaluate(const BinaryMask3D& prediction, const BinaryMask3D& truth) {
  return {dice_score(prediction, truth), hausdorff_mm(prediction, truth, truth.spacing()),
          assd2d_mm(prediction, truth, truth.spacing())};
}

}  // namespace sparseg
