#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <queue>
#include <vector>

#include "doctest.h"
#include "fold/grid.hpp"
#include "fold/preprocess.hpp"
#include "fold/rng.hpp"

using namespace fold;

namespace {

// independent oracle: Dijkstra over the 26-neighbor graph with the same
// class weights the scanning transform uses
std::vector<double> dijkstra_field(const BinaryGrid& object) {
  const Dims3 d = object.dims;
  const Vec3f s = object.voxel_mm;
  std::vector<double> dist(d.count(), std::numeric_limits<double>::infinity());
  using Node = std::pair<double, std::size_t>;
  std::priority_queue<Node, std::vector<Node>, std::greater<>> q;
  for (std::size_t i = 0; i < object.data.size(); ++i)
    if (object.data[i]) {
      dist[i] = 0.0;
      q.push({0.0, i});
    }
  while (!q.empty()) {
    const auto [dv, i] = q.top();
    q.pop();
    if (dv > dist[i]) continue;
    const int z = int(i / (std::size_t(d.nx) * d.ny));
    const int y = int(i / d.nx % d.ny);
    const int x = int(i % d.nx);
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          if (!object.in_bounds(x + dx, y + dy, z + dz)) continue;
          const int cls = std::abs(dx) + std::abs(dy) + std::abs(dz);
          const double coef = cls == 1   ? 1.0
                              : cls == 2 ? (4.0 / 3.0) / std::sqrt(2.0)
                                         : (5.0 / 3.0) / std::sqrt(3.0);
          const double ex = dx * s.x, ey = dy * s.y, ez = dz * s.z;
          const double w =
              float(coef * std::sqrt(ex * ex + ey * ey + ez * ez));
          const std::size_t j = object.index(x + dx, y + dy, z + dz);
          if (dv + w < dist[j]) {
            dist[j] = dv + w;
            q.push({dv + w, j});
          }
        }
  }
  return dist;
}

LabelGrid random_skeleton(Dims3 dims, Vec3f voxel, int points, Rng& rng) {
  LabelGrid g(dims, voxel);
  for (int k = 0; k < points; ++k)
    g.at(rng.uniform_int(0, dims.nx - 1), rng.uniform_int(0, dims.ny - 1),
         rng.uniform_int(0, dims.nz - 1)) = rng.uniform_int(1, 8);
  return g;
}

}  // namespace

TEST_CASE("two-pass distance transform matches Dijkstra on the step graph") {
  Rng rng(41);
  const Vec3f voxels[] = {{1, 1, 1}, {1.0f, 1.6f, 0.7f}};
  for (const Vec3f& v : voxels)
    for (int rep = 0; rep < 3; ++rep) {
      const LabelGrid skel = random_skeleton({9, 7, 8}, v, 5, rng);
      const DistanceMap dt = chamfer_dt(skel);
      BinaryGrid obj(skel.dims, v);
      for (std::size_t i = 0; i < skel.data.size(); ++i)
        obj.data[i] = skel.data[i] ? 1 : 0;
      const std::vector<double> oracle = dijkstra_field(obj);
      for (std::size_t i = 0; i < oracle.size(); ++i)
        CHECK(dt.grid.data[i] == doctest::Approx(oracle[i]).epsilon(1e-4));
    }
}

TEST_CASE("chamfer distance stays within 15% of Euclidean distance") {
  Rng rng(42);
  for (int rep = 0; rep < 4; ++rep) {
    const LabelGrid skel = random_skeleton({12, 12, 12}, {1, 1, 1}, 6, rng);
    const DistanceMap dt = chamfer_dt(skel);
    std::vector<Vec3d> pts;
    for (int z = 0; z < 12; ++z)
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
          if (skel.at(x, y, z)) pts.push_back({double(x), double(y), double(z)});
    for (int z = 0; z < 12; ++z)
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
          double best = 1e30;
          for (const Vec3d& p : pts) {
            const double dx = x - p.x, dy = y - p.y, dz = z - p.z;
            best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
          }
          if (best == 0.0)
            CHECK(dt.grid.at(x, y, z) == 0.0f);
          else
            CHECK(std::abs(dt.grid.at(x, y, z) - best) / best <= 0.15);
        }
  }
}

TEST_CASE("normalization squashes distance into (0,1] with known values") {
  DistanceMap dt{ScalarGrid({3, 1, 1})};
  dt.grid.data = {0.0f, 1.0f, 4.5f};
  const NormalizedMap n = normalize_map(dt);
  CHECK(n.grid.data[0] == 1.0f);
  CHECK(n.grid.data[1] == doctest::Approx(2.0 / (1.0 + std::exp(1.0))));
  CHECK(n.grid.data[2] == doctest::Approx(2.0 / (1.0 + std::exp(4.5))));
  CHECK(n.grid.data[2] < 0.025f);
}

TEST_CASE("learn_mask pools target labels, dilates, and reports geometry") {
  LabelGrid a({10, 8, 6});
  a.at(2, 3, 1) = 2;
  a.at(7, 7, 5) = 5;
  LabelGrid b({10, 8, 6});
  b.at(3, 3, 1) = 2;
  const std::vector<const LabelGrid*> subjects{&a, &b};

  const RegionMask m = learn_mask(subjects, {2}, 1.0, 3);
  CHECK(m.margin == 3);
  CHECK(m.dilation_mm == 1.0);
  CHECK(m.mask.at(2, 3, 1) == 1);
  CHECK(m.mask.at(3, 3, 1) == 1);
  CHECK(m.mask.at(1, 3, 1) == 1);   // face neighbor at distance 1
  CHECK(m.mask.at(1, 2, 1) == 0);   // edge neighbor at 4/3
  CHECK(m.mask.at(7, 7, 5) == 0);   // non-target label
  CHECK(m.bbox == BoundingBox{1, 2, 0, 4, 4, 2});
  CHECK(m.center.x == doctest::Approx(2.5));
  CHECK(m.center.y == doctest::Approx(3.0));
  CHECK(m.center.z == doctest::Approx(1.0));

  // empty target list means every nonzero label; zero dilation keeps support
  const RegionMask all = learn_mask(subjects, {}, 0.0, 0);
  CHECK(all.mask.at(7, 7, 5) == 1);
  CHECK(all.mask.at(2, 3, 1) == 1);
  CHECK(all.mask.at(1, 3, 1) == 0);

  CHECK_THROWS_AS(learn_mask({}, {}, 1.0, 0), RangeError);
  CHECK_THROWS_AS(learn_mask(subjects, {9}, 1.0, 0), RangeError);
  LabelGrid c({9, 8, 6});
  const std::vector<const LabelGrid*> bad{&a, &c};
  CHECK_THROWS_AS(learn_mask(bad, {}, 1.0, 0), RangeError);
}

TEST_CASE("preprocess at full resolution lands the skeleton where expected") {
  LabelGrid skel({12, 10, 8});
  skel.at(5, 4, 3) = 1;
  const RegionMask mask = learn_mask({&skel}, {}, 2.0, 1);
  // dilated ball spans [3,7]x[2,6]x[1,5]; margin 1 grows it by one voxel
  CHECK(mask.bbox == BoundingBox{3, 2, 1, 7, 6, 5});

  const NormalizedMap out = preprocess_subject(skel, mask, 1, {9, 9, 9});
  CHECK(out.grid.dims == Dims3{9, 9, 9});
  // crop [2,8]x[1,7]x[0,6] then centered pad adds one on each low side
  CHECK(out.grid.at(4, 4, 4) == 1.0f);
  CHECK(out.grid.at(5, 4, 4) == doctest::Approx(2.0 / (1.0 + std::exp(1.0))));
  for (int z = 0; z < 9; ++z)
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 9; ++x) {
        const float v = out.grid.at(x, y, z);
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        const bool interior = x >= 1 && x <= 7 && y >= 1 && y <= 7 &&
                              z >= 1 && z <= 7;
        if (interior)
          CHECK(v > 0.0f);  // crop content: finite distances everywhere
        else
          CHECK(v == 0.0f);  // centered pad fills the border with zeros
      }

  const CropMask cm = mask_in_crop_frame(mask, 1, {9, 9, 9});
  CHECK(cm.mask.dims == Dims3{9, 9, 9});
  CHECK(cm.center.x == doctest::Approx(4.0));
  CHECK(cm.center.y == doctest::Approx(4.0));
  CHECK(cm.center.z == doctest::Approx(4.0));
  CHECK(cm.mask.at(4, 4, 4) == 1);
  CHECK(cm.mask.at(6, 4, 4) == 1);  // +2mm along x, inside the dilation
  CHECK(cm.mask.at(4, 6, 6) == 0);  // +2,+2 along y,z is beyond it

  const NormalizedMap masked = apply_mask(out, cm);
  CHECK(masked.grid.at(4, 4, 4) == 1.0f);
  for (std::size_t i = 0; i < masked.grid.data.size(); ++i) {
    if (cm.mask.data[i])
      CHECK(masked.grid.data[i] == out.grid.data[i]);
    else
      CHECK(masked.grid.data[i] == 0.0f);
  }
}

TEST_CASE("native boxes transport into the crop frame and clip to it") {
  LabelGrid skel({12, 10, 8});
  skel.at(5, 4, 3) = 1;
  const RegionMask mask = learn_mask({&skel}, {}, 2.0, 1);

  const BoundingBox in{5, 4, 3, 7, 5, 3};
  CHECK(box_in_crop_frame(in, mask, 1, {12, 10, 8}, {9, 9, 9}) ==
        BoundingBox{4, 4, 4, 6, 5, 4});
  // fully outside the crop window
  CHECK(box_in_crop_frame({10, 8, 6, 11, 9, 7}, mask, 1, {12, 10, 8},
                          {9, 9, 9})
            .empty());
  CHECK(box_in_crop_frame({}, mask, 1, {12, 10, 8}, {9, 9, 9}).empty());
}

TEST_CASE("preprocess is deterministic and honors downsampling dims") {
  Rng rng(7);
  const LabelGrid skel = random_skeleton({16, 14, 12}, {1, 1, 1}, 40, rng);
  const RegionMask mask = learn_mask({&skel}, {}, 3.0, 2);
  const NormalizedMap a = preprocess_subject(skel, mask, 2, {10, 10, 8});
  const NormalizedMap b = preprocess_subject(skel, mask, 2, {10, 10, 8});
  CHECK(a.grid.dims == Dims3{10, 10, 8});
  CHECK(a.grid.data == b.grid.data);
  CHECK(a.grid.voxel_mm == Vec3f{2, 2, 2});
}

TEST_CASE("augmentation at zero angle reduces to masking") {
  Rng rng(9);
  const LabelGrid skel = random_skeleton({16, 14, 12}, {1, 1, 1}, 30, rng);
  const RegionMask mask = learn_mask({&skel}, {}, 3.0, 2);
  const NormalizedMap x = preprocess_subject(skel, mask, 2, {10, 10, 8});
  const CropMask cm = mask_in_crop_frame(mask, 2, {10, 10, 8});
  const NormalizedMap plain = apply_mask(x, cm);

  Rng r1(5);
  const NormalizedMap zero = augment(x, cm, 0.0, r1);
  for (std::size_t i = 0; i < plain.grid.data.size(); ++i)
    CHECK(zero.grid.data[i] ==
          doctest::Approx(plain.grid.data[i]).epsilon(1e-5));
}

TEST_CASE("augmentation stays bounded, masked, and seed-deterministic") {
  Rng rng(11);
  const LabelGrid skel = random_skeleton({16, 14, 12}, {1, 1, 1}, 30, rng);
  const RegionMask mask = learn_mask({&skel}, {}, 3.0, 2);
  const NormalizedMap x = preprocess_subject(skel, mask, 2, {10, 10, 8});
  const CropMask cm = mask_in_crop_frame(mask, 2, {10, 10, 8});

  Rng r1(123), r2(123), r3(124);
  const NormalizedMap a = augment(x, cm, 10.0, r1);
  const NormalizedMap b = augment(x, cm, 10.0, r2);
  const NormalizedMap c = augment(x, cm, 10.0, r3);
  CHECK(a.grid.data == b.grid.data);
  CHECK(a.grid.data != c.grid.data);
  for (std::size_t i = 0; i < a.grid.data.size(); ++i) {
    CHECK(a.grid.data[i] >= 0.0f);
    CHECK(a.grid.data[i] <= 1.0f);
    if (!cm.mask.data[i]) CHECK(a.grid.data[i] == 0.0f);
  }
}
