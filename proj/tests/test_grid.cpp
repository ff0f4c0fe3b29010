#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fold/grid.hpp"
#include "fold/rng.hpp"

using namespace fold;

TEST_CASE("bounding box basics") {
  BoundingBox b;
  CHECK(b.empty());
  b = {1, 2, 3, 4, 5, 6};
  CHECK(!b.empty());
  CHECK(b.size() == Dims3{4, 4, 4});
  CHECK(b.contains(1, 2, 3));
  CHECK(b.contains(4, 5, 6));
  CHECK(!b.contains(0, 2, 3));
  CHECK(!b.contains(1, 2, 7));
  CHECK(clip(expand(b, 10), {6, 6, 6}) == BoundingBox{0, 0, 0, 5, 5, 5});
  CHECK(scale_box_down({2, 3, 4, 9, 9, 9}, 2) == BoundingBox{1, 1, 2, 4, 4, 4});
}

TEST_CASE("crop then pad recenters content") {
  ScalarGrid g({8, 8, 8});
  g.at(3, 4, 5) = 1.0f;
  const ScalarGrid c = crop(g, {2, 3, 4, 5, 6, 7});
  CHECK(c.dims == Dims3{4, 4, 4});
  CHECK(c.at(1, 1, 1) == 1.0f);

  const ScalarGrid p = pad_to(c, {9, 9, 9});
  // offsets floor((9-4)/2) = 2 per axis
  CHECK(p.at(3, 3, 3) == 1.0f);
  const Vec3d off = pad_offset(c.dims, {9, 9, 9});
  CHECK(off.x == 2.0);

  CHECK_THROWS_AS(crop(g, {5, 0, 0, 2, 7, 7}), RangeError);
  CHECK_THROWS_AS(crop(g, {0, 0, 0, 8, 7, 7}), RangeError);
  CHECK_THROWS_AS(pad_to(g, {4, 8, 8}), RangeError);
}

TEST_CASE("flip_lr mirrors x and is an involution") {
  LabelGrid g({4, 3, 2});
  g.at(0, 1, 1) = 7;
  g.at(3, 2, 0) = 9;
  const LabelGrid f = flip_lr(g);
  CHECK(f.at(3, 1, 1) == 7);
  CHECK(f.at(0, 2, 0) == 9);
  CHECK(flip_lr(f).data == g.data);
}

TEST_CASE("downsample averages blocks, edge blocks use what they have") {
  ScalarGrid g({4, 4, 3});
  for (int z = 0; z < 3; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) g.at(x, y, z) = float(x >= 2);
  const ScalarGrid d = downsample(g, 2);
  CHECK(d.dims == Dims3{2, 2, 2});
  CHECK(d.voxel_mm.x == 2.0f);
  CHECK(d.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(d.at(1, 0, 0) == doctest::Approx(1.0));
  // last z block holds a single slice, mean is still well defined
  CHECK(d.at(1, 1, 1) == doctest::Approx(1.0));

  BinaryGrid b({4, 2, 2});
  b.at(3, 1, 1) = 1;
  const BinaryGrid a = downsample_any(b, 2);
  CHECK(a.dims == Dims3{2, 1, 1});
  CHECK(a.at(0, 0, 0) == 0);
  CHECK(a.at(1, 0, 0) == 1);
}

TEST_CASE("chamfer_field weights for the three neighbor classes") {
  BinaryGrid obj({5, 5, 5});
  obj.at(2, 2, 2) = 1;
  const ScalarGrid d = chamfer_field(obj);
  CHECK(d.at(2, 2, 2) == doctest::Approx(0.0));
  CHECK(d.at(3, 2, 2) == doctest::Approx(1.0));          // face: 3/3
  CHECK(d.at(3, 3, 2) == doctest::Approx(4.0 / 3.0));    // edge
  CHECK(d.at(3, 3, 3) == doctest::Approx(5.0 / 3.0));    // corner
  CHECK(d.at(4, 2, 2) == doctest::Approx(2.0));
  // two steps mixing classes: face + edge
  CHECK(d.at(4, 3, 2) == doctest::Approx(1.0 + 4.0 / 3.0));
}

TEST_CASE("chamfer_field scales with voxel size per axis") {
  BinaryGrid obj({5, 5, 5}, {2.0f, 1.0f, 0.5f});
  obj.at(2, 2, 2) = 1;
  const ScalarGrid d = chamfer_field(obj);
  CHECK(d.at(3, 2, 2) == doctest::Approx(2.0));
  CHECK(d.at(2, 3, 2) == doctest::Approx(1.0));
  CHECK(d.at(2, 2, 3) == doctest::Approx(0.5));
}

TEST_CASE("dilate keeps everything within the radius and nothing beyond") {
  BinaryGrid g({9, 9, 9});
  g.at(4, 4, 4) = 1;
  const BinaryGrid d = dilate(g, 2.0);
  const ScalarGrid field = chamfer_field(g);
  for (int z = 0; z < 9; ++z)
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x)
        CHECK(int(d.at(x, y, z)) == int(field.at(x, y, z) <= 2.0));
}

TEST_CASE("tight_bbox finds the support") {
  BinaryGrid g({6, 6, 6});
  CHECK(tight_bbox(g).empty());
  g.at(1, 2, 3) = 1;
  g.at(4, 2, 5) = 1;
  CHECK(tight_bbox(g) == BoundingBox{1, 2, 3, 4, 2, 5});
}

TEST_CASE("rotate_about: zero angles reproduce the grid exactly") {
  Rng rng(3);
  ScalarGrid g({6, 7, 8});
  for (float& v : g.data) v = float(rng.uniform());
  const ScalarGrid r =
      rotate_about(g, {2.5, 3.0, 3.5}, {0.0, 0.0, 0.0}, 0.0f);
  for (std::size_t i = 0; i < g.data.size(); ++i)
    CHECK(r.data[i] == doctest::Approx(g.data[i]).epsilon(1e-6));
}

TEST_CASE("rotate_about: quarter turn about z maps lattice to lattice") {
  ScalarGrid g({7, 7, 3});
  g.at(5, 3, 1) = 1.0f;
  // rotating (x,y) about the exact center (3,3): the sample at (5,3)
  // must land where the inverse rotation of the probe recovers it
  const ScalarGrid r = rotate_about(g, {3, 3, 1}, {0, 0, 90}, 0.0f);
  int hits = 0;
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x)
      if (r.at(x, y, 1) > 0.99f) {
        ++hits;
        CHECK(((x == 3 && y == 5) || (x == 3 && y == 1)));
      }
  CHECK(hits == 1);
}
