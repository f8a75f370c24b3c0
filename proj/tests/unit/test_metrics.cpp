#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "oracles.hpp"
#include "sparseg/metrics.hpp"
#include "sparseg/postproc.hpp"
#include "sparseg/rng.hpp"

using namespace sparseg;
using namespace sparseg::oracle;

namespace {

BinaryMask3D box(const Dims& d, const Spacing& s, int x0, int x1, int y0, int y1, int z0, int z1) {
  std::vector<std::uint8_t> v(d.count(), 0);
  for (int k = z0; k <= z1; ++k)
    for (int j = y0; j <= y1; ++j)
      for (int i = x0; i <= x1; ++i) v[d.index(i, j, k)] = 1;
  return BinaryMask3D(d, s, std::move(v));
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("dice examples") {
    const Dims d{4, 1, 1};
    const Spacing s{1, 1, 1};
    const BinaryMask3D a(d, s, {1, 1, 0, 0});
    const BinaryMask3D b(d, s, {1, 0, 0, 0});
    const BinaryMask3D c(d, s, {0, 0, 1, 1});
    CHECK(dice_score(a, a) == 1.0);
    CHECK(dice_score(a, c) == 0.0);
    CHECK(dice_score(a, b) == doctest::Approx(2.0 / 3.0));
    CHECK(dice_score(BinaryMask3D::zeros(d, s), BinaryMask3D::zeros(d, s)) == 1.0);
    CHECK_THROWS_AS(dice_score(a, BinaryMask3D::zeros({2, 2, 1}, s)), std::invalid_argument);
  }

  TEST_CASE("hausdorff examples") {
    const Dims d{5, 5, 8};
    const Spacing s{1, 1, 2};
    const auto a = box(d, s, 2, 2, 2, 2, 1, 1);
    const auto b = box(d, s, 2, 2, 2, 2, 4, 4);
    CHECK(*hausdorff_mm(a, b) == doctest::Approx(6.0));
    CHECK(*hausdorff_mm(a, a) == 0.0);
    CHECK_FALSE(hausdorff_mm(a, BinaryMask3D::zeros(d, s)).has_value());
  }

  TEST_CASE("assd of concentric squares") {
    const Dims d{9, 9, 3};
    const Spacing s{1.5, 1.5, 3.0};
    const auto outer = box(d, s, 1, 7, 1, 7, 0, 2);
    const auto inner = box(d, s, 2, 6, 2, 6, 0, 2);
    const double per_slice = assd2d_oracle_slice(outer, inner, 1, s);
    CHECK(per_slice > 0.0);
    CHECK(*assd2d_mm(outer, inner) == doctest::Approx(per_slice).epsilon(1e-12));
    CHECK(*assd2d_mm(outer, outer) == 0.0);
  }

  TEST_CASE("one-sided slices are skipped") {
    const Dims d{6, 6, 4};
    const Spacing s{1, 1, 1};
    const auto a = box(d, s, 1, 3, 1, 3, 0, 2);
    const auto b = box(d, s, 2, 4, 1, 3, 1, 3);
    // only slices 1 and 2 are non-empty in both
    const double expect = 0.5 * (assd2d_oracle_slice(a, b, 1, s) + assd2d_oracle_slice(a, b, 2, s));
    CHECK(*assd2d_mm(a, b) == doctest::Approx(expect).epsilon(1e-12));
    const auto c = box(d, s, 1, 3, 1, 3, 3, 3);
    CHECK_FALSE(assd2d_mm(box(d, s, 1, 3, 1, 3, 0, 0), c).has_value());
  }

  TEST_CASE("distance transform matches brute force") {
    Rng rng(5, 5);
    const Dims d{7, 5, 6};
    const Spacing s{0.7, 1.3, 2.9};
    std::vector<std::uint8_t> f(d.count(), 0);
    for (auto& v : f) v = rng.next_uniform() < 0.05;
    f[3] = 1;
    const auto dt = squared_distance_transform(f, d, s);
    for (int k = 0; k < d.z; ++k)
      for (int j = 0; j < d.y; ++j)
        for (int i = 0; i < d.x; ++i) {
          double best = std::numeric_limits<double>::infinity();
          for (int kk = 0; kk < d.z; ++kk)
            for (int jj = 0; jj < d.y; ++jj)
              for (int ii = 0; ii < d.x; ++ii)
                if (f[d.index(ii, jj, kk)]) best = std::min(best, sq_dist(i, j, k, ii, jj, kk, s));
          CHECK(dt[d.index(i, j, k)] == doctest::Approx(best).epsilon(1e-12));
        }
  }

  TEST_CASE("random masks match the all-pairs oracles") {
    Rng rng(2024, 1);
    for (int trial = 0; trial < 60; ++trial) {
      const auto [a, b] = random_mask_pair(rng, 12);
      const Spacing& s = a.spacing();
      CHECK(dice_score(a, b) == dice_oracle(a, b));
      CHECK(dice_score(a, b) == dice_score(b, a));
      const auto h = hausdorff_mm(a, b);
      const auto ho = hausdorff_oracle(a, b, s);
      REQUIRE(h.has_value() == ho.has_value());
      if (h) {
        CHECK(std::abs(*h - *ho) <= 1e-9);
        CHECK(*hausdorff_mm(b, a) == *h);
      }
      const auto as = assd2d_mm(a, b);
      const auto ao = assd2d_oracle(a, b, s);
      REQUIRE(as.has_value() == ao.has_value());
      if (as) {
        CHECK(std::abs(*as - *ao) <= 1e-9);
        CHECK(std::abs(*assd2d_mm(b, a) - *as) <= 1e-12);
      }
    }
  }

  TEST_CASE("distances scale with spacing") {
    Rng rng(31, 1);
    for (int trial = 0; trial < 10; ++trial) {
      const auto [a, b] = random_mask_pair(rng, 10);
      const Spacing s = a.spacing();
      const Spacing s3{3 * s.sx, 3 * s.sy, 3 * s.sz};
      const auto h = hausdorff_mm(a, b, s);
      const auto as = assd2d_mm(a, b, s);
      if (h) CHECK(*hausdorff_mm(a, b, s3) == doctest::Approx(3 * *h).epsilon(1e-12));
      if (as) CHECK(*assd2d_mm(a, b, s3) == doctest::Approx(3 * *as).epsilon(1e-12));
    }
  }

  TEST_CASE("evaluate uses the ground-truth spacing") {
    const Dims d{5, 5, 8};
    const auto a = box(d, {1, 1, 2}, 2, 2, 2, 2, 1, 1);
    const auto b = box(d, {1, 1, 2}, 2, 2, 2, 2, 4, 4);
    const MetricReport r = evaluate(a, b);
    CHECK(r.dice == 0.0);
    CHECK(*r.hausdorff_mm == doctest::Approx(6.0));
    CHECK_FALSE(r.assd2d_mm.has_value());
  }
}

TEST_SUITE("postproc") {
  TEST_CASE("hole filling") {
    const Dims d{7, 7, 7};
    const Spacing s{1, 1, 1};
    const auto cube = box(d, s, 1, 5, 1, 5, 1, 5);
    CHECK(fill_holes(cube) == cube);
    std::vector<std::uint8_t> shell(cube.voxels().begin(), cube.voxels().end());
    for (int k = 2; k <= 4; ++k)
      for (int j = 2; j <= 4; ++j)
        for (int i = 2; i <= 4; ++i) shell[d.index(i, j, k)] = 0;
    CHECK(fill_holes(BinaryMask3D(d, s, shell)) == cube);
    const auto empty = BinaryMask3D::zeros(d, s);
    CHECK(fill_holes(empty) == empty);
  }

  TEST_CASE("largest component") {
    const Dims d{10, 4, 4};
    const Spacing s{1, 1, 1};
    std::vector<std::uint8_t> v(d.count(), 0);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 2; ++j) v[d.index(i, j, 0)] = 1;  // 10 voxels
    for (int i = 7; i < 10; ++i) v[d.index(i, 3, 3)] = 1;    // 3 voxels
    const auto out = largest_component(BinaryMask3D(d, s, v));
    CHECK(out.count() == 10);
    CHECK(out.at(9, 3, 3) == 0);
    const auto single = box(d, s, 1, 3, 1, 2, 1, 2);
    CHECK(largest_component(single) == single);
    CHECK(largest_component(BinaryMask3D::zeros(d, s)).empty());
  }

  TEST_CASE("diagonal voxels are one component, ties go to the first") {
    const Dims d{6, 6, 6};
    const Spacing s{1, 1, 1};
    std::vector<std::uint8_t> v(d.count(), 0);
    v[d.index(0, 0, 0)] = 1;
    v[d.index(1, 1, 1)] = 1;
    v[d.index(4, 4, 4)] = 1;
    v[d.index(5, 5, 5)] = 1;
    const auto out = largest_component(BinaryMask3D(d, s, v));
    CHECK(out.count() == 2);
    CHECK(out.at(0, 0, 0) == 1);
    CHECK(out.at(1, 1, 1) == 1);
  }

  TEST_CASE("random masks match brute-force labelling") {
    Rng rng(77, 3);
    for (int trial = 0; trial < 40; ++trial) {
      const BinaryMask3D m = random_mask(rng, 16);
      const auto filled = fill_holes(m);
      CHECK(filled == fill_holes_oracle(m));
      CHECK(fill_holes(filled) == filled);
      const auto lc = largest_component(m);
      CHECK(lc == largest_component_oracle(m));
      CHECK(largest_component(lc) == lc);
      CHECK(postprocess(m) == largest_component(fill_holes(m)));
    }
  }
}
