#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "fold/error.hpp"
#include "fold/explore.hpp"
#include "fold/preprocess.hpp"
#include "fold/rng.hpp"
#include "fold/vae.hpp"

using namespace fold;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_dims = {8, 8, 8};
  c.channels = {2, 3, 4};
  c.latent_dim = 3;
  c.seed = 4;
  return c;
}

}  // namespace

TEST_CASE("latent mean averages per dimension") {
  const std::vector<std::vector<double>> codes{{1.0, 2.0}, {3.0, 6.0},
                                               {5.0, 10.0}};
  const std::vector<double> m = latent_mean(codes);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(latent_mean({{7.0}}) == std::vector<double>{7.0});

  CHECK_THROWS_AS(latent_mean({}), RangeError);
  CHECK_THROWS_AS(latent_mean({{1.0}, {1.0, 2.0}}), RangeError);
}

TEST_CASE("interpolation hits both endpoints and spaces evenly") {
  const std::vector<double> a{0.0, -2.0};
  const std::vector<double> b{1.0, 2.0};
  const auto path = interpolate(a, b, 5);
  REQUIRE(path.size() == 5);
  CHECK(path.front() == a);
  CHECK(path.back() == b);
  CHECK(path[2][0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(path[2][1] == doctest::Approx(0.0).epsilon(1e-12));
  for (int k = 1; k < 5; ++k) {
    CHECK(path[k][0] - path[k - 1][0] == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(path[k][1] - path[k - 1][1] == doctest::Approx(1.0).epsilon(1e-9));
  }

  CHECK_THROWS_AS(interpolate(a, {1.0}, 3), RangeError);
  CHECK_THROWS_AS(interpolate(a, b, 1), RangeError);
}

TEST_CASE("dimension traversal sweeps one coordinate of the base code") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = init_parameters(cfg);
  const std::vector<double> base{0.3, -0.2, 0.8};

  const Traversal tr = dimension_traversal(cfg, p, base, 1, -2.0, 2.0, 5);
  CHECK(tr.dim == 1);
  CHECK(tr.base == base);
  REQUIRE(tr.values.size() == 5);
  REQUIRE(tr.decoded.size() == 5);
  CHECK(tr.values.front() == -2.0);
  CHECK(tr.values.back() == 2.0);
  CHECK(tr.values[2] == doctest::Approx(0.0).epsilon(1e-12));

  for (std::size_t k = 0; k < tr.values.size(); ++k) {
    std::vector<double> z = base;
    z[1] = tr.values[k];
    CHECK(decode(cfg, p, z).data == tr.decoded[k].data);
    CHECK(tr.decoded[k].dims == cfg.input_dims);
  }

  CHECK_THROWS_AS(dimension_traversal(cfg, p, {0.0}, 0, 0, 1, 3), RangeError);
  CHECK_THROWS_AS(dimension_traversal(cfg, p, base, 3, 0, 1, 3), RangeError);
  CHECK_THROWS_AS(dimension_traversal(cfg, p, base, -1, 0, 1, 3), RangeError);
  CHECK_THROWS_AS(dimension_traversal(cfg, p, base, 1, 1, 0, 3), RangeError);
  CHECK_THROWS_AS(dimension_traversal(cfg, p, base, 1, 0, 1, 1), RangeError);
}

TEST_CASE("binarize includes the boundary") {
  ScalarGrid g({4, 1, 1}, {2, 2, 2});
  g.data = {0.39f, 0.4f, 0.41f, 0.0f};
  const BinaryGrid b = binarize(g);
  CHECK(b.data == std::vector<std::uint8_t>{0, 1, 1, 0});
  CHECK(b.voxel_mm == g.voxel_mm);

  const BinaryGrid strict = binarize(g, 0.41f);
  CHECK(strict.data == std::vector<std::uint8_t>{0, 0, 1, 0});
}

TEST_CASE("thresholding a normalized map recovers the exact skeleton") {
  // skeleton value is exactly 1; the nearest off-skeleton value is
  // 2/(1+e) ~ 0.538, so a 0.6 threshold separates them exactly
  Rng rng(3);
  LabelGrid skel({10, 9, 8});
  for (int k = 0; k < 25; ++k)
    skel.at(rng.uniform_int(0, 9), rng.uniform_int(0, 8),
            rng.uniform_int(0, 7)) = rng.uniform_int(1, 6);
  const NormalizedMap norm = normalize_map(chamfer_dt(skel));
  const BinaryGrid rec = binarize(norm.grid, 0.6f);
  for (std::size_t i = 0; i < skel.data.size(); ++i)
    CHECK(int(rec.data[i]) == int(skel.data[i] != 0));
}

TEST_CASE("slice bytes scale min-max with constant volumes black") {
  ScalarGrid flat({3, 2, 2}, {1, 1, 1}, 0.7f);
  CHECK(slice_bytes(flat, 1) == std::vector<std::uint8_t>(6, 0));

  ScalarGrid g({3, 2, 2});
  g.at(1, 0, 1) = 1.0f;  // impulse; min 0 max 1
  const auto bytes = slice_bytes(g, 1);
  REQUIRE(bytes.size() == 6);
  for (std::size_t k = 0; k < bytes.size(); ++k)
    CHECK(bytes[k] == (k == 1 ? 255 : 0));
  CHECK(slice_bytes(g, 0) == std::vector<std::uint8_t>(6, 0));

  // affine range: byte = round((v - lo)/(hi - lo) * 255)
  ScalarGrid r({2, 1, 1});
  r.data = {-1.0f, 3.0f};
  const auto rb = slice_bytes(r, 0);
  CHECK(rb == std::vector<std::uint8_t>{0, 255});

  CHECK_THROWS_AS(slice_bytes(g, 2), RangeError);
  CHECK_THROWS_AS(slice_bytes(g, -1), RangeError);
  CHECK_THROWS_AS(slice_bytes(ScalarGrid{}, 0), RangeError);
}

TEST_CASE("rendered slices are valid binary pgm files") {
  ScalarGrid g({4, 3, 5});
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = float(i);
  const fs::path dir = fs::temp_directory_path() / "fold_explore_pgm_test";
  fs::remove_all(dir);
  render_slices(g, {0, 4}, dir, "trav");

  for (int depth : {0, 4}) {
    char name[32];
    std::snprintf(name, sizeof name, "trav_z%03d.pgm", depth);
    const fs::path path = dir / name;
    REQUIRE(fs::exists(path));

    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    CHECK(magic == "P5");
    CHECK(w == 4);
    CHECK(h == 3);
    CHECK(maxval == 255);
    in.get();  // single whitespace after the header
    std::vector<std::uint8_t> payload(12);
    in.read(reinterpret_cast<char*>(payload.data()), 12);
    CHECK(in.gcount() == 12);
    CHECK(payload == slice_bytes(g, depth));
    CHECK(in.get() == std::ifstream::traits_type::eof());
  }
  fs::remove_all(dir);
}
