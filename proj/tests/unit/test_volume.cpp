#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "sparseg/mvol.hpp"
#include "sparseg/rng.hpp"
#include "sparseg/volume.hpp"

using namespace sparseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sparseg_unit";
  fs::create_directories(dir);
  return dir / name;
}

Volume3D random_volume(const Dims& d, std::uint64_t seed) {
  Rng rng(seed, 99);
  std::vector<float> v(d.count());
  for (auto& x : v) x = static_cast<float>(rng.next_uniform(-1000.0, 1000.0));
  return Volume3D(d, {0.7, 1.1, 2.5}, std::move(v));
}

}  // namespace

TEST_SUITE("volume") {
  TEST_CASE("dims index is x fastest") {
    const Dims d{4, 3, 2};
    CHECK(d.count() == 24);
    CHECK(d.index(1, 0, 0) == 1);
    CHECK(d.index(0, 1, 0) == 4);
    CHECK(d.index(0, 0, 1) == 12);
    CHECK(d.index(3, 2, 1) == 23);
  }

  TEST_CASE("grid constructors validate") {
    CHECK_THROWS_AS(Volume3D({2, 2, 2}, {1, 1, 1}, std::vector<float>(7)), std::invalid_argument);
    CHECK_THROWS_AS(Volume3D({2, 2, 0}, {1, 1, 1}, {}), std::invalid_argument);
    CHECK_THROWS_AS(Volume3D({1, 1, 1}, {0, 1, 1}, {0.f}), std::invalid_argument);
    CHECK_THROWS_AS(Volume3D({1, 1, 1}, {1, 1, 1}, {std::numeric_limits<float>::quiet_NaN()}),
                    std::invalid_argument);
    CHECK_THROWS_AS(BinaryMask3D({1, 1, 2}, {1, 1, 1}, {0, 2}), std::invalid_argument);
    const BinaryMask3D m({1, 1, 3}, {1, 1, 1}, {0, 1, 0});
    CHECK(m.count() == 1);
    CHECK(m.slice_empty(0));
    CHECK_FALSE(m.slice_empty(1));
  }
}

TEST_SUITE("rng") {
  TEST_CASE("degenerate range") {
    Rng rng(3, 4);
    for (int i = 0; i < 100; ++i) CHECK(rng.next_int(5, 5) == 5);
    CHECK_THROWS_AS(rng.next_int(2, 1), std::invalid_argument);
  }

  TEST_CASE("replay is identical") {
    Rng a(42, 7);
    Rng b(42, 7);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  }

  TEST_CASE("distinct streams differ") {
    Rng a(42, 1);
    Rng b(42, 2);
    int same = 0;
    for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
  }

  TEST_CASE("known first outputs") {
    // frozen from this generator; any change breaks recorded traces
    Rng rng(0, 0);
    const std::uint64_t first = rng.next_u64();
    Rng again(0, 0);
    CHECK(again.next_u64() == first);
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  }

  TEST_CASE("uniform and int ranges") {
    Rng rng(9, 9);
    int hits[4] = {0, 0, 0, 0};
    for (int i = 0; i < 4000; ++i) {
      const double u = rng.next_uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      const auto k = rng.next_int(-1, 2);
      REQUIRE(k >= -1);
      REQUIRE(k <= 2);
      ++hits[k + 1];
    }
    for (int h : hits) CHECK(h > 850);
  }

  TEST_CASE("fork ignores parent position") {
    Rng a(5, 6);
    const Rng b(5, 6);
    a.next_u64();
    Rng fa = a.fork(3);
    Rng fb = b.fork(3);
    CHECK(fa.next_u64() == fb.next_u64());
    Rng f4 = b.fork(4);
    Rng f3 = b.fork(3);
    CHECK(f4.next_u64() != f3.next_u64());
  }

  TEST_CASE("normal moments") {
    Rng rng(11, 12);
    double s = 0.0, s2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double z = rng.next_normal();
      s += z;
      s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.03);
    CHECK(std::abs(s2 / n - 1.0) < 0.05);
  }
}

TEST_SUITE("mvol") {
  TEST_CASE("all-zero mask round trip") {
    const auto m = BinaryMask3D::zeros({4, 4, 4}, {1, 1, 1});
    const auto path = scratch("zeros.mvol");
    write_mvol(m, path);
    CHECK(read_mask(path) == m);
  }

  TEST_CASE("payload length mismatch") {
    std::string bytes = "{\"dims\":[2,2,2],\"spacing\":[1,1,1],\"dtype\":\"f32\"}\n";
    bytes += std::string(7 * 4, '\0');
    CHECK_THROWS_AS(decode_mvol(bytes), MvolError);
  }

  TEST_CASE("malformed header") {
    CHECK_THROWS_AS(decode_mvol("not json\n"), MvolError);
    CHECK_THROWS_AS(decode_mvol("{\"dims\":[1,1,1]}"), MvolError);
    CHECK_THROWS_AS(decode_mvol("{\"dims\":[1,1],\"spacing\":[1,1,1],\"dtype\":\"u8\"}\n\x01"), MvolError);
  }

  TEST_CASE("mask rejects non-binary payload") {
    std::string bytes = "{\"dims\":[1,1,2],\"spacing\":[1,1,1],\"dtype\":\"u8\"}\n";
    bytes += '\x00';
    bytes += '\x02';
    CHECK_THROWS_AS(decode_mvol(bytes), MvolError);
  }

  TEST_CASE("random volumes round trip bitwise") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Volume3D v = random_volume({8, 8, 8}, seed);
      const auto path = scratch("rand" + std::to_string(seed) + ".mvol");
      write_mvol(v, path);
      const Volume3D back = read_volume(path);
      REQUIRE(back.dims() == v.dims());
      CHECK(back.spacing() == v.spacing());
      CHECK(std::memcmp(back.voxels().data(), v.voxels().data(), v.voxels().size() * sizeof(float)) == 0);
    }
  }

  TEST_CASE("writes are byte-identical") {
    const Volume3D v = random_volume({5, 3, 2}, 8);
    write_mvol(v, scratch("a.mvol"));
    write_mvol(v, scratch("b.mvol"));
    CHECK(read_file_bytes(scratch("a.mvol")) == read_file_bytes(scratch("b.mvol")));
  }

  TEST_CASE("payload sizes") {
    const auto m = BinaryMask3D::zeros({3, 2, 1}, {1, 1, 1});
    const std::string mb = encode_mvol(m);
    CHECK(mb.size() - (mb.find('\n') + 1) == 6);
    const Volume3D v({3, 2, 1}, {1, 1, 1}, std::vector<float>(6, 1.5f));
    const std::string vb = encode_mvol(v);
    CHECK(vb.size() - (vb.find('\n') + 1) == 24);
    CHECK(vb.substr(0, vb.find('\n')) == R"({"dims":[3,2,1],"spacing":[1.0,1.0,1.0],"dtype":"f32"})");
  }

  TEST_CASE("f32 file is not a mask") {
    const Volume3D v({1, 1, 1}, {1, 1, 1}, {1.0f});
    write_mvol(v, scratch("f.mvol"));
    CHECK_THROWS_AS(read_mask(scratch("f.mvol")), MvolError);
  }

  TEST_CASE("unwritable path") {
    const auto m = BinaryMask3D::zeros({1, 1, 1}, {1, 1, 1});
    CHECK_THROWS(write_mvol(m, "/nonexistent_dir_sparseg/x.mvol"));
  }
}
