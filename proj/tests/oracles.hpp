#pragma once

// Slow reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "sparseg/loss.hpp"
#include "sparseg/model.hpp"
#include "sparseg/rng.hpp"
#include "sparseg/sampling.hpp"
#include "sparseg/volume.hpp"

namespace sparseg::oracle {

inline double sq_dist(int i, int j, int k, int ii, int jj, int kk, const Spacing& s) {
  const double dx = (i - ii) * s.sx, dy = (j - jj) * s.sy, dz = (k - kk) * s.sz;
  return dx * dx + dy * dy + dz * dz;
}

inline bool fg(const BinaryMask3D& m, int i, int j, int k) {
  return m.dims().contains(i, j, k) && m.at(i, j, k) == 1;
}

struct Voxel {
  int i, j, k;
};

inline std::vector<Voxel> boundary3(const BinaryMask3D& m) {
  std::vector<Voxel> out;
  const Dims& d = m.dims();
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        if (!fg(m, i, j, k)) continue;
        if (!fg(m, i - 1, j, k) || !fg(m, i + 1, j, k) || !fg(m, i, j - 1, k) || !fg(m, i, j + 1, k) ||
            !fg(m, i, j, k - 1) || !fg(m, i, j, k + 1)) {
          out.push_back({i, j, k});
        }
      }
  return out;
}

inline std::vector<Voxel> boundary2(const BinaryMask3D& m, int k) {
  std::vector<Voxel> out;
  const Dims& d = m.dims();
  for (int j = 0; j < d.y; ++j)
    for (int i = 0; i < d.x; ++i) {
      if (!fg(m, i, j, k)) continue;
      if (!fg(m, i - 1, j, k) || !fg(m, i + 1, j, k) || !fg(m, i, j - 1, k) || !fg(m, i, j + 1, k)) {
        out.push_back({i, j, k});
      }
    }
  return out;
}

inline double dice_oracle(const BinaryMask3D& a, const BinaryMask3D& b) {
  double inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.voxels().size(); ++i) {
    inter += a.voxels()[i] && b.voxels()[i];
    na += a.voxels()[i];
    nb += b.voxels()[i];
  }
  return na + nb == 0 ? 1.0 : 2.0 * inter / (na + nb);
}

// Directed distances from every point of `from` to the nearest point of `to`.
inline std::vector<double> nearest(const std::vector<Voxel>& from, const std::vector<Voxel>& to, const Spacing& s) {
  std::vector<double> out;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, sq_dist(p.i, p.j, p.k, q.i, q.j, q.k, s));
    out.push_back(std::sqrt(best));
  }
  return out;
}

inline std::optional<double> hausdorff_oracle(const BinaryMask3D& a, const BinaryMask3D& b, const Spacing& s) {
  const auto ba = boundary3(a), bb = boundary3(b);
  if (ba.empty() || bb.empty()) return std::nullopt;
  double h = 0.0;
  for (double v : nearest(ba, bb, s)) h = std::max(h, v);
  for (double v : nearest(bb, ba, s)) h = std::max(h, v);
  return h;
}

inline double assd2d_oracle_slice(const BinaryMask3D& a, const BinaryMask3D& b, int k, const Spacing& s) {
  const auto ba = boundary2(a, k), bb = boundary2(b, k);
  const auto ab = nearest(ba, bb, s), ba_ = nearest(bb, ba, s);
  const double total = std::accumulate(ab.begin(), ab.end(), 0.0) + std::accumulate(ba_.begin(), ba_.end(), 0.0);
  return total / static_cast<double>(ab.size() + ba_.size());
}

inline std::optional<double> assd2d_oracle(const BinaryMask3D& a, const BinaryMask3D& b, const Spacing& s) {
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < a.dims().z; ++k) {
    if (boundary2(a, k).empty() || boundary2(b, k).empty()) continue;
    sum += assd2d_oracle_slice(a, b, k, s);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// Background voxels reachable from the border, by repeated relaxation.
inline BinaryMask3D fill_holes_oracle(const BinaryMask3D& m) {
  const Dims& d = m.dims();
  std::vector<std::uint8_t> outside(d.count(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = 0; k < d.z; ++k)
      for (int j = 0; j < d.y; ++j)
        for (int i = 0; i < d.x; ++i) {
          const auto idx = d.index(i, j, k);
          if (m.at(i, j, k) || outside[idx]) continue;
          bool reach = i == 0 || j == 0 || k == 0 || i == d.x - 1 || j == d.y - 1 || k == d.z - 1;
          const int off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
          for (const auto& o : off) {
            const int a = i + o[0], b = j + o[1], c = k + o[2];
            if (d.contains(a, b, c) && outside[d.index(a, b, c)]) reach = true;
          }
          if (reach) {
            outside[idx] = 1;
            changed = true;
          }
        }
  }
  std::vector<std::uint8_t> out(d.count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = !outside[i];
  return BinaryMask3D(d, m.spacing(), std::move(out));
}

inline std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) x = parent[x] = parent[parent[x]];
  return x;
}

// Union-find labelling with 26-connectivity.
inline BinaryMask3D largest_component_oracle(const BinaryMask3D& m) {
  const Dims& d = m.dims();
  std::vector<std::size_t> parent(d.count());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        if (!m.at(i, j, k)) continue;
        for (int dk = -1; dk <= 1; ++dk)
          for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
              if (!fg(m, i + di, j + dj, k + dk)) continue;
              const auto a = find_root(parent, d.index(i, j, k));
              const auto b = find_root(parent, d.index(i + di, j + dj, k + dk));
              if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
      }
  std::vector<std::size_t> size(d.count(), 0), min_index(d.count(), d.count());
  for (std::size_t v = 0; v < d.count(); ++v) {
    if (!m.voxels()[v]) continue;
    const auto r = find_root(parent, v);
    ++size[r];
    min_index[r] = std::min(min_index[r], v);
  }
  std::size_t best = d.count();
  for (std::size_t r = 0; r < d.count(); ++r) {
    if (size[r] == 0) continue;
    if (best == d.count() || size[r] > size[best] || (size[r] == size[best] && min_index[r] < min_index[best])) {
      best = r;
    }
  }
  std::vector<std::uint8_t> out(d.count(), 0);
  for (std::size_t v = 0; v < d.count(); ++v)
    if (m.voxels()[v] && find_root(parent, v) == best) out[v] = 1;
  return BinaryMask3D(d, m.spacing(), std::move(out));
}

// Random mask: a few boxes and balls plus salt noise; sometimes empty.
inline BinaryMask3D random_mask(Rng& rng, int max_dim, const Dims& dims, const Spacing& s) {
  const Dims& d = dims;
  std::vector<std::uint8_t> v(d.count(), 0);
  const int kind = static_cast<int>(rng.next_int(0, 9));
  if (kind == 0) return BinaryMask3D(d, s, std::move(v));
  const double salt = kind < 4 ? rng.next_uniform(0.0, 0.3) : 0.0;
  const int shapes = static_cast<int>(rng.next_int(1, 4));
  for (int n = 0; n < shapes; ++n) {
    const double cx = rng.next_uniform(0, d.x), cy = rng.next_uniform(0, d.y), cz = rng.next_uniform(0, d.z);
    const double r = rng.next_uniform(0.5, max_dim / 2.5);
    const bool ball = rng.next_uniform() < 0.5;
    const bool hollow = rng.next_uniform() < 0.3;
    for (int k = 0; k < d.z; ++k)
      for (int j = 0; j < d.y; ++j)
        for (int i = 0; i < d.x; ++i) {
          const double dx = i - cx, dy = j - cy, dz = k - cz;
          const double q = ball ? std::sqrt(dx * dx + dy * dy + dz * dz)
                                : std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
          if (q <= r && !(hollow && q < r - 1.2)) v[d.index(i, j, k)] = 1;
        }
  }
  for (auto& x : v)
    if (rng.next_uniform() < salt) x = 1 - x;
  return BinaryMask3D(d, s, std::move(v));
}

inline Dims random_dims(Rng& rng, int max_dim) {
  return {static_cast<int>(rng.next_int(1, max_dim)), static_cast<int>(rng.next_int(1, max_dim)),
          static_cast<int>(rng.next_int(1, max_dim))};
}

inline BinaryMask3D random_mask(Rng& rng, int max_dim) {
  const Dims d = random_dims(rng, max_dim);
  return random_mask(rng, max_dim, d, {1, 1, 1});
}

inline std::pair<BinaryMask3D, BinaryMask3D> random_mask_pair(Rng& rng, int max_dim) {
  const Dims d = random_dims(rng, max_dim);
  const Spacing s{rng.next_uniform(0.5, 2.0), rng.next_uniform(0.5, 2.0), rng.next_uniform(0.5, 4.0)};
  BinaryMask3D a = random_mask(rng, max_dim, d, s);
  BinaryMask3D b = random_mask(rng, max_dim, d, s);
  return {std::move(a), std::move(b)};
}

// Straight transcription of the selective Dice formula.
inline double selective_dice_oracle(const std::vector<double>& r, const std::vector<std::uint8_t>& t,
                                    const std::vector<std::uint8_t>& s, double eps) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!s[i]) continue;
    a += t[i] * r[i];
    b += t[i] + r[i];
  }
  return -(2.0 * a + eps) / (b + eps);
}

// Random two-channel patch with whole slices selected or not.
inline Patch random_patch(const Dims& d, Rng& rng) {
  Patch p;
  p.dims = d;
  p.image.resize(d.count());
  p.target.resize(d.count());
  p.selection.resize(d.count());
  for (int k = 0; k < d.z; ++k) {
    const std::uint8_t sel = rng.next_uniform() < 0.6 ? 1 : 0;
    for (int j = 0; j < d.y; ++j)
      for (int i = 0; i < d.x; ++i) {
        const auto idx = d.index(i, j, k);
        p.image[idx] = static_cast<float>(rng.next_normal());
        p.target[idx] = rng.next_uniform() < 0.4 ? 1 : 0;
        p.selection[idx] = sel;
      }
  }
  p.selection[0] = 1;
  return p;
}

inline double net_loss(const NetParams& params, const Patch& p) {
  const auto cache = forward(params, make_input(p));
  return selective_batch_dice_value(cache.probabilities, p.target, p.selection);
}

}  // namespace sparseg::oracle
