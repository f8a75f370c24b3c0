#include "sparseg/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sparseg {

namespace {

struct Lobe {
  std::array<double, 3> center;
  std::array<double, 3> radius;
  double cos_t;
  double sin_t;

  // squared normalised distance; <= 1 inside
  double norm2(double x, double y, double z) const {
    const double dx = x - center[0];
    const double dy = y - center[1];
    const double u = cos_t * dx + sin_t * dy;
    const double v = -sin_t * dx + cos_t * dy;
    const double w = z - center[2];
    return (u * u) / (radius[0] * radius[0]) + (v * v) / (radius[1] * radius[1]) +
           (w * w) / (radius[2] * radius[2]);
  }

  std::array<double, 3> half_extent() const {
    const double c2 = cos_t * cos_t;
    const double s2 = sin_t * sin_t;
    const double rx2 = radius[0] * radius[0];
    const double ry2 = radius[1] * radius[1];
    return {std::sqrt(rx2 * c2 + ry2 * s2), std::sqrt(rx2 * s2 + ry2 * c2), radius[2]};
  }
};

// Keeps the lobe's bounding box inside [1, dim-2] on every axis.
void clamp_center(Lobe& lobe, const Dims& dims) {
  const auto h = lobe.half_extent();
  const std::array<int, 3> d{dims.x, dims.y, dims.z};
  for (int a = 0; a < 3; ++a) {
    const double lo = 1.0 + h[a];
    const double hi = static_cast<double>(d[a]) - 2.0 - h[a];
    if (lo > hi) {
      // secondary lobe wider than the room left: shrink it to fit
      const double room = (static_cast<double>(d[a]) - 3.0) / 2.0;
      const double scale = room / h[a];
      for (auto& r : lobe.radius) r *= scale;
      clamp_center(lobe, dims);
      return;
    }
    lobe.center[a] = std::clamp(lobe.center[a], lo, hi);
  }
}

}  // namespace

void PhantomSpec::validate() const {
  if (dims.x < 16 || dims.y < 16 || dims.z < 16) {
    throw std::invalid_argument("phantom dims must be >= 16 on every axis, got " + to_string(dims));
  }
  if (!spacing.valid()) throw std::invalid_argument("phantom spacing must be finite and > 0");
  if (lobes_min < 1 || lobes_max > 3 || lobes_min > lobes_max) {
    throw std::invalid_argument("phantom lobe counts must satisfy 1 <= lobes_min <= lobes_max <= 3");
  }
  if (!(size_min > 0.0) || !(size_max >= size_min)) {
    throw std::invalid_argument("phantom size range must satisfy 0 < size_min <= size_max");
  }
  if (!(contrast > 0.0) || !(noise_sigma >= 0.0) || !(texture_amplitude >= 0.0)) {
    throw std::invalid_argument("phantom contrast must be > 0, noise and texture >= 0");
  }
  const double in_plane = size_max * std::max(dims.x, dims.y) / 2.0;
  const double in_plane_room = (std::min(dims.x, dims.y) - 3.0) / 2.0;
  const double depth = size_max * dims.z / 2.0;
  const double depth_room = (dims.z - 3.0) / 2.0;
  if (in_plane > in_plane_room || depth > depth_room) {
    throw std::invalid_argument("phantom size range cannot fit inside " + to_string(dims) +
                                " with an empty border slice on each side");
  }
  if (size_min * std::min({dims.x, dims.y, dims.z}) / 2.0 < 1.0) {
    throw std::invalid_argument("phantom size_min gives radii below one voxel");
  }
}

LabeledVolume generate_phantom(const PhantomSpec& spec, Rng& rng) {
  spec.validate();
  const Dims& dims = spec.dims;
  const std::array<double, 3> half{dims.x / 2.0, dims.y / 2.0, dims.z / 2.0};

  const int n_lobes = static_cast<int>(rng.next_int(spec.lobes_min, spec.lobes_max));
  std::vector<Lobe> lobes;
  lobes.reserve(static_cast<std::size_t>(n_lobes));

  Lobe main{};
  for (int a = 0; a < 3; ++a) {
    main.radius[a] = rng.next_uniform(spec.size_min, spec.size_max) * half[a];
    main.center[a] = half[a] - 0.5 + rng.next_uniform(-0.15, 0.15) * 2.0 * half[a];
  }
  const double theta = rng.next_uniform(0.0, std::numbers::pi);
  main.cos_t = std::cos(theta);
  main.sin_t = std::sin(theta);
  clamp_center(main, dims);
  lobes.push_back(main);

  for (int l = 1; l < n_lobes; ++l) {
    Lobe lobe{};
    // random direction on the sphere, offset proportional to the main radii
    const double phi = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
    const double cz = rng.next_uniform(-1.0, 1.0);
    const double sz = std::sqrt(1.0 - cz * cz);
    const std::array<double, 3> dir{sz * std::cos(phi), sz * std::sin(phi), cz};
    const double reach = rng.next_uniform(0.5, 1.0);
    for (int a = 0; a < 3; ++a) {
      lobe.radius[a] = main.radius[a] * rng.next_uniform(0.5, 0.8);
      lobe.center[a] = main.center[a] + dir[a] * reach * main.radius[a];
    }
    const double t = rng.next_uniform(0.0, std::numbers::pi);
    lobe.cos_t = std::cos(t);
    lobe.sin_t = std::sin(t);
    clamp_center(lobe, dims);
    lobes.push_back(lobe);
  }

  // low-frequency background texture: three random plane waves
  struct Wave {
    std::array<double, 3> freq;
    double phase;
  };
  std::array<Wave, 3> waves{};
  for (auto& w : waves) {
    for (int a = 0; a < 3; ++a) {
      const double f = rng.next_uniform(0.5, 2.0);
      w.freq[a] = (rng.next_uniform() < 0.5 ? -f : f) / (2.0 * half[a]);
    }
    w.phase = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
  }

  std::vector<float> image(dims.count());
  std::vector<std::uint8_t> mask(dims.count(), 0);
  for (int k = 0; k < dims.z; ++k) {
    for (int j = 0; j < dims.y; ++j) {
      for (int i = 0; i < dims.x; ++i) {
        const std::size_t idx = dims.index(i, j, k);
        double d2 = std::numeric_limits<double>::infinity();
        for (const auto& lobe : lobes) d2 = std::min(d2, lobe.norm2(i, j, k));
        double value = 0.0;
        if (d2 <= 1.0) {
          mask[idx] = 1;
          // radial profile with unit mean over a solid ellipsoid (E[d^2] = 3/5)
          value = spec.contrast * (1.0 + 0.5 * (0.6 - d2));
        }
        double texture = 0.0;
        for (const auto& w : waves) {
          texture += std::sin(2.0 * std::numbers::pi * (w.freq[0] * i + w.freq[1] * j + w.freq[2] * k) + w.phase);
        }
        value += spec.texture_amplitude * texture / 3.0;
        image[idx] = static_cast<float>(value);
      }
    }
  }
  if (spec.noise_sigma > 0.0) {
    for (auto& v : image) v = static_cast<float>(v + spec.noise_sigma * rng.next_normal());
  }

  BinaryMask3D seg(dims, spec.spacing, std::move(mask));
  if (seg.empty() || !seg.slice_empty(0) || !seg.slice_empty(dims.z - 1)) {
    throw std::logic_error("phantom generator produced a structure touching the volume border");
  }
  return {Volume3D(dims, spec.spacing, std::move(image)), std::move(seg)};
}

LabeledVolume generate_case(const PhantomSpec& spec, const Rng& rng, std::size_t index) {
  Rng child = rng.fork(index);
  return generate_phantom(spec, child);
}

std::vector<LabeledVolume> generate_dataset(const PhantomSpec& spec, std::size_t n, const Rng& rng) {
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be >= 1");
  std::vector<LabeledVolume> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_case(spec, rng, i));
  return out;
}

}  // namespace sparseg
