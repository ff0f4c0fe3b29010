#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "fold/grid.hpp"
#include "fold/synth.hpp"

using namespace fold;

namespace {

RegionMask full_mask(Dims3 dims) {
  RegionMask m;
  m.mask = BinaryGrid(dims, {1, 1, 1}, 1);
  m.bbox = {0, 0, 0, dims.nx - 1, dims.ny - 1, dims.nz - 1};
  return m;
}

// subject with explicit labeled voxels; truth is left empty on purpose,
// downstream code must work from the skeleton alone
SyntheticSubject make_subject(Dims3 dims,
                              const std::map<std::uint32_t, int>& sizes) {
  SyntheticSubject s;
  s.skeleton = LabelGrid(dims);
  std::size_t pos = 0;
  for (const auto& [label, n] : sizes)
    for (int k = 0; k < n; ++k) s.skeleton.data[pos++] = label;
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic in (params, seed)") {
  GeneratorParams p;
  const SyntheticSubject a = generate_subject(p, 77);
  const SyntheticSubject b = generate_subject(p, 77);
  const SyntheticSubject c = generate_subject(p, 78);
  CHECK(a.skeleton.data == b.skeleton.data);
  CHECK(a.truth.knob_count == b.truth.knob_count);
  CHECK(a.skeleton.data != c.skeleton.data);
  CHECK(a.seed == 77);
  CHECK(a.skeleton.dims == p.dims);

  GeneratorParams small = p;
  small.dims = {48, 40, 60};
  small.main_xc = 24.0;
  CHECK(generate_subject(small, 5).skeleton.dims == Dims3{48, 40, 60});
}

TEST_CASE("reported component sizes recount from the skeleton") {
  GeneratorParams p;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const SyntheticSubject s = generate_subject(p, seed);
    std::map<std::uint32_t, int> counted;
    for (std::uint32_t v : s.skeleton.data)
      if (v) counted[v] += 1;
    CHECK(counted == s.truth.ss_sizes);
    CHECK(s.truth.ss_sizes.contains(1));  // main ribbon always present
    CHECK(s.truth.ss_sizes.contains(3));  // posterior neighbor too
    for (const auto& [label, n] : s.truth.ss_sizes)
      if (label >= 7) CHECK(n <= 400);  // branches stay small surfaces
  }
}

TEST_CASE("left subjects mirror the right construction voxel for voxel") {
  GeneratorParams right;
  GeneratorParams left = right;
  left.side = Side::left;
  const SyntheticSubject r = generate_subject(right, 31);
  const SyntheticSubject l = generate_subject(left, 31);
  CHECK(r.truth.hemisphere == Side::right);
  CHECK(l.truth.hemisphere == Side::left);
  CHECK(l.skeleton.data == flip_lr(r.skeleton).data);
}

TEST_CASE("interruption carves a labeled gap in the main ribbon") {
  GeneratorParams p;
  p.interruption_prob = 1.0;
  p.gap_voxels = 8;
  for (std::uint64_t seed : {10, 11, 12, 13, 14}) {
    const SyntheticSubject s = generate_subject(p, seed);
    CHECK(s.truth.interrupted);
    REQUIRE(s.truth.gap_box.has_value());
    const BoundingBox box = *s.truth.gap_box;
    CHECK(!box.empty());
    CHECK(box.z1 - box.z0 + 1 <= 8);
    CHECK(s.truth.ss_sizes.contains(kMainLabelA));
    CHECK(s.truth.ss_sizes.contains(kMainLabelB));
    // the two halves sit strictly on either side of the carved slab
    const LabelGrid& g = s.skeleton;
    for (int z = 0; z < g.dims.nz; ++z)
      for (int y = 0; y < g.dims.ny; ++y)
        for (int x = 0; x < g.dims.nx; ++x) {
          const std::uint32_t v = g.at(x, y, z);
          if (v == kMainLabelA) CHECK(z < box.z0);
          if (v == kMainLabelB) CHECK(z > box.z1);
        }
  }

  GeneratorParams q;
  q.interruption_prob = 0.0;
  const SyntheticSubject t = generate_subject(q, 10);
  CHECK(!t.truth.interrupted);
  CHECK(!t.truth.gap_box.has_value());
  CHECK(!t.truth.ss_sizes.contains(kMainLabelB));
}

TEST_CASE("in-mask sizes honor the mask support") {
  SyntheticSubject s = make_subject({6, 6, 6}, {{1, 4}, {2, 3}});
  RegionMask m = full_mask({6, 6, 6});
  CHECK(in_mask_sizes(s, m) == std::map<std::uint32_t, int>{{1, 4}, {2, 3}});

  // mask only the first three voxels in memory order
  RegionMask half = full_mask({6, 6, 6});
  std::fill(half.mask.data.begin() + 3, half.mask.data.end(), std::uint8_t{0});
  CHECK(in_mask_sizes(s, half) == std::map<std::uint32_t, int>{{1, 3}});

  RegionMask wrong = full_mask({5, 6, 6});
  CHECK_THROWS_AS(in_mask_sizes(s, wrong), RangeError);
}

TEST_CASE("deleting a component erases exactly the chosen label") {
  const SyntheticSubject s = make_subject({6, 6, 6}, {{1, 4}, {2, 3}});
  const RegionMask m = full_mask({6, 6, 6});
  Rng rng(1);

  const auto hit = delete_ss(s, m, {4, 5}, rng);
  REQUIRE(hit.has_value());
  CHECK(hit->erased_label == 1);
  CHECK(hit->erased_total == 4);
  CHECK(hit->erased_in_mask == 4);
  int ones = 0, twos = 0;
  for (std::uint32_t v : hit->skeleton.data) {
    if (v == 1) ++ones;
    if (v == 2) ++twos;
  }
  CHECK(ones == 0);
  CHECK(twos == 3);

  CHECK(!delete_ss(s, m, {100, 200}, rng).has_value());
  // half-open band: size 4 is outside [2,4)
  const auto low = delete_ss(s, m, {2, 4}, rng);
  REQUIRE(low.has_value());
  CHECK(low->erased_label == 2);
}

TEST_CASE("candidate eligibility uses in-mask counts, erasure is global") {
  const SyntheticSubject s = make_subject({6, 6, 6}, {{1, 4}});
  RegionMask partial = full_mask({6, 6, 6});
  partial.mask.data[3] = 0;  // hide one of the four label-1 voxels
  Rng rng(2);
  const auto out = delete_ss(s, partial, {3, 4}, rng);
  REQUIRE(out.has_value());
  CHECK(out->erased_in_mask == 3);
  CHECK(out->erased_total == 4);
}

TEST_CASE("the erased component is picked uniformly among candidates") {
  const SyntheticSubject s = make_subject({6, 6, 6}, {{2, 3}, {3, 3}});
  const RegionMask m = full_mask({6, 6, 6});
  int picked2 = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto out = delete_ss(s, m, {3, 4}, rng);
    REQUIRE(out.has_value());
    if (out->erased_label == 2) ++picked2;
  }
  CHECK(picked2 > 200 * 0.35);
  CHECK(picked2 < 200 * 0.65);
}

TEST_CASE("deletion benchmark splits eligible subjects into halves") {
  std::vector<SyntheticSubject> test;
  for (int n : {3, 3, 4, 4, 5}) test.push_back(make_subject({6, 6, 6}, {{1, n}}));
  test.push_back(make_subject({6, 6, 6}, {{1, 8}}));  // out of band
  const RegionMask m = full_mask({6, 6, 6});

  Rng rng(5);
  const BenchmarkSet b = build_deletion_benchmark(test, m, {3, 6}, rng, 0.5);
  CHECK(b.kind == "deletion");
  CHECK(b.band.lo == 3);
  CHECK(b.band.hi == 6);
  CHECK(b.controls.size() == 2);
  CHECK(b.altered.size() == 3);

  std::set<std::size_t> sources;
  for (const auto& e : b.controls) {
    CHECK(!e.deletion.has_value());
    CHECK(e.subject.skeleton.data == test[e.source_index].skeleton.data);
    sources.insert(e.source_index);
  }
  for (const auto& e : b.altered) {
    REQUIRE(e.deletion.has_value());
    CHECK(e.deletion->erased_in_mask >= 3);
    CHECK(e.deletion->erased_in_mask < 6);
    for (std::uint32_t v : e.subject.skeleton.data)
      CHECK(v != e.deletion->erased_label);
    sources.insert(e.source_index);
  }
  CHECK(sources == std::set<std::size_t>{0, 1, 2, 3, 4});

  Rng rng2(6);
  CHECK_THROWS_AS(build_deletion_benchmark(test, m, {100, 200}, rng2, 0.5),
                  RangeError);
}

TEST_CASE("asymmetry benchmark mirrors a distinct left population") {
  GeneratorParams right;
  right.double_knob_prob = 0.0;
  GeneratorParams left = right;
  left.double_knob_prob = 1.0;

  const BenchmarkSet b = build_asymmetry_benchmark(right, left, 4, 99);
  CHECK(b.kind == "asymmetry");
  CHECK(b.controls.size() == 4);
  CHECK(b.altered.size() == 4);
  for (const auto& e : b.controls) {
    CHECK(e.subject.truth.hemisphere == Side::right);
    CHECK(e.subject.truth.knob_count == 1);
  }
  for (const auto& e : b.altered) {
    CHECK(e.subject.truth.hemisphere == Side::left);
    CHECK(e.subject.truth.knob_count == 2);
  }

  const BenchmarkSet again = build_asymmetry_benchmark(right, left, 4, 99);
  CHECK(again.controls[0].subject.skeleton.data ==
        b.controls[0].subject.skeleton.data);
  CHECK(again.altered[0].subject.skeleton.data ==
        b.altered[0].subject.skeleton.data);
  CHECK(b.controls[0].subject.skeleton.data !=
        b.altered[0].subject.skeleton.data);
}
