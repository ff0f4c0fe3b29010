#include "fold/synth.hpp"

#include <algorithm>
#include <cmath>

#include "fold/error.hpp"

namespace fold {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Knob {
  double zk, amp, sigma;
};

struct RibbonSpec {
  double xc = 0.0;
  double z0 = 0.0, z1 = 0.0;
  double y0 = 0.0, depth = 0.0;
  double tilt = 0.0;   // x drift along the length
  double bow = 0.0;    // x bow along the depth
  double wob_amp = 0.0, wob_lambda = 32.0, wob_phase = 0.0;
  double taper = 0.2;  // depth shrink at the ends
  std::vector<Knob> knobs;
};

double ribbon_x(const RibbonSpec& r, double y, double z) {
  const double zm = 0.5 * (r.z0 + r.z1);
  const double half = std::max(1.0, 0.5 * (r.z1 - r.z0));
  double x = r.xc + r.tilt * (z - zm) / half;
  for (const Knob& k : r.knobs) {
    const double dz = z - k.zk;
    x += k.amp * std::exp(-0.5 * dz * dz / (k.sigma * k.sigma));
  }
  x += r.bow * std::sin(kPi * std::clamp((y - r.y0) / r.depth, 0.0, 1.0));
  x += r.wob_amp * std::sin(2.0 * kPi * z / r.wob_lambda + r.wob_phase);
  return x;
}

double ribbon_depth_at(const RibbonSpec& r, double z) {
  const double zm = 0.5 * (r.z0 + r.z1);
  const double half = std::max(1.0, 0.5 * (r.z1 - r.z0));
  const double u = (z - zm) / half;
  return r.depth * (1.0 - r.taper * u * u);
}

void put_if_empty(LabelGrid& g, int x, int y, int z, std::uint32_t label) {
  if (!g.in_bounds(x, y, z)) return;
  std::uint32_t& v = g.at(x, y, z);
  if (v == 0) v = label;
}

// sweep the (y,z) parameter domain, one x per sample, restricted to [zlo,zhi]
void rasterize_ribbon(LabelGrid& g, const RibbonSpec& r, std::uint32_t label,
                      double zlo, double zhi) {
  const double za = std::max(r.z0, zlo);
  const double zb = std::min(r.z1, zhi);
  for (double z = za; z <= zb; z += 0.25) {
    const double d = ribbon_depth_at(r, z);
    for (double y = r.y0; y <= r.y0 + d; y += 0.5) {
      const int xi = static_cast<int>(std::lround(ribbon_x(r, y, z)));
      put_if_empty(g, xi, static_cast<int>(std::lround(y)),
                   static_cast<int>(std::lround(z)), label);
    }
  }
}

void rasterize_ribbon(LabelGrid& g, const RibbonSpec& r, std::uint32_t label) {
  rasterize_ribbon(g, r, label, r.z0, r.z1);
}

// small flap leaving the host surface sideways
void rasterize_branch(LabelGrid& g, const RibbonSpec& host, double yb, double zb,
                      int w, int h, int dir, double drift, std::uint32_t label) {
  for (double t = 1.0; t <= w; t += 0.5) {
    const double z = zb + drift * (t / w);
    for (double y = yb; y < yb + h; y += 0.5) {
      const double x = ribbon_x(host, y, zb) + dir * t;
      put_if_empty(g, static_cast<int>(std::lround(x)),
                   static_cast<int>(std::lround(y)),
                   static_cast<int>(std::lround(z)), label);
    }
  }
}

}  // namespace

SyntheticSubject generate_subject(const GeneratorParams& p,
                                  std::uint64_t seed) {
  Rng rng(seed);
  SyntheticSubject out;
  out.seed = seed;
  out.truth.hemisphere = p.side;
  out.skeleton = LabelGrid(p.dims, p.voxel_mm);
  LabelGrid& g = out.skeleton;

  // one overall size factor per subject, then the main ribbon
  const double scale = rng.uniform(p.size_scale_min, p.size_scale_max);
  RibbonSpec main;
  {
    const double len = scale * rng.uniform(p.main_len_min, p.main_len_max);
    const double cz = p.dims.nz * 0.5 + rng.uniform(-2.0, 2.0);
    main.z0 = cz - 0.5 * len;
    main.z1 = cz + 0.5 * len;
    main.depth = scale * rng.uniform(p.main_depth_min, p.main_depth_max);
    main.y0 = p.dims.ny * 0.33 + rng.uniform(-2.0, 2.0);
    main.xc = p.main_xc + rng.uniform(-p.main_xc_jitter, p.main_xc_jitter);
    main.tilt = rng.uniform(-1.5, 1.5);
    main.bow = rng.uniform(1.0, 2.5);
    main.wob_amp = rng.uniform(0.4, 1.0);
    main.wob_lambda = rng.uniform(26.0, 40.0);
    main.wob_phase = rng.uniform(0.0, 2.0 * kPi);

    const bool double_knob = rng.bernoulli(p.double_knob_prob);
    out.truth.knob_count = double_knob ? 2 : 1;
    Knob k1;
    k1.zk = main.z0 + len * rng.uniform(p.knob_pos_min, p.knob_pos_max);
    k1.amp = std::clamp(rng.normal(p.knob_amp_mean, p.knob_amp_sd), 2.0, 8.0);
    k1.sigma = rng.uniform(4.5, 6.5);
    main.knobs.push_back(k1);
    if (double_knob) {
      Knob k2;
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      k2.zk = std::clamp(k1.zk + sign * rng.uniform(13.0, 17.0), main.z0 + 4.0,
                         main.z1 - 4.0);
      k2.amp = k1.amp * rng.uniform(0.7, 0.95);
      k2.sigma = rng.uniform(4.0, 6.0);
      main.knobs.push_back(k2);
    }
  }

  // interruption decision ahead of rasterization so draw order is stable
  out.truth.interrupted = rng.bernoulli(p.interruption_prob);
  int gap_z0 = 0;
  if (out.truth.interrupted) {
    const double cz = 0.5 * (main.z0 + main.z1);
    const double lo = main.z0 + 8.0;
    const double hi = main.z1 - 8.0 - p.gap_voxels;
    gap_z0 = static_cast<int>(
        std::lround(std::clamp(cz + rng.uniform(-8.0, 8.0), lo, hi)));
  }

  rasterize_ribbon(g, main, kMainLabelA);

  // carve the gap and split the main labels around it
  if (out.truth.interrupted) {
    const int gap_z1 = gap_z0 + p.gap_voxels - 1;
    BoundingBox box{g.dims.nx, g.dims.ny, g.dims.nz, -1, -1, -1};
    for (int z = gap_z0; z <= gap_z1; ++z)
      for (int y = 0; y < g.dims.ny; ++y)
        for (int x = 0; x < g.dims.nx; ++x)
          if (g.in_bounds(x, y, z) && g.at(x, y, z) == kMainLabelA) {
            g.at(x, y, z) = 0;
            box.x0 = std::min(box.x0, x);
            box.y0 = std::min(box.y0, y);
            box.z0 = std::min(box.z0, z);
            box.x1 = std::max(box.x1, x);
            box.y1 = std::max(box.y1, y);
            box.z1 = std::max(box.z1, z);
          }
    for (int z = gap_z1 + 1; z < g.dims.nz; ++z)
      for (int y = 0; y < g.dims.ny; ++y)
        for (int x = 0; x < g.dims.nx; ++x)
          if (g.at(x, y, z) == kMainLabelA) g.at(x, y, z) = kMainLabelB;
    out.truth.gap_box = box;

    // both walls flare sideways around the buried ridge that splits the fold
    const int dir = rng.bernoulli(0.5) ? 1 : -1;
    const int flare = rng.uniform_int(4, 6);
    const int end_z[2] = {gap_z0 - 1, gap_z1 + 1};
    const std::uint32_t end_label[2] = {kMainLabelA, kMainLabelB};
    for (int e = 0; e < 2; ++e) {
      const double d = ribbon_depth_at(main, end_z[e]);
      for (double y = main.y0; y <= main.y0 + d; y += 0.5)
        for (int t = 1; t <= flare; ++t) {
          const double x = ribbon_x(main, y, end_z[e]) + dir * t;
          put_if_empty(g, static_cast<int>(std::lround(x)),
                       static_cast<int>(std::lround(y)), end_z[e],
                       end_label[e]);
        }
    }
  }

  // posterior neighbor, labels 3/4
  RibbonSpec post;
  {
    const double off = rng.uniform(11.0, 13.0);
    const double len = rng.uniform(30.0, 52.0);
    const double cz = 0.5 * (main.z0 + main.z1) + rng.uniform(-3.0, 3.0);
    post.z0 = cz - 0.5 * len;
    post.z1 = cz + 0.5 * len;
    post.depth = rng.uniform(12.0, 20.0);
    post.y0 = main.y0 + rng.uniform(-1.0, 3.0);
    post.xc = main.xc + off;
    post.tilt = rng.uniform(-1.5, 1.5);
    post.bow = rng.uniform(0.5, 1.5);
    post.wob_amp = rng.uniform(0.4, 1.2);
    post.wob_lambda = rng.uniform(24.0, 40.0);
    post.wob_phase = rng.uniform(0.0, 2.0 * kPi);
    post.knobs.push_back({cz + rng.uniform(-8.0, 8.0),
                          rng.uniform(0.5, 2.0), rng.uniform(5.0, 8.0)});
    const bool split = rng.bernoulli(0.35);
    const double zs = cz + rng.uniform(-6.0, 6.0);
    const double gap = rng.uniform(3.0, 5.0);
    if (split) {
      rasterize_ribbon(g, post, 3, post.z0, zs - 0.5 * gap);
      rasterize_ribbon(g, post, 4, zs + 0.5 * gap, post.z1);
    } else {
      rasterize_ribbon(g, post, 3);
    }
  }

  // anterior neighbor, labels 5/6; absent in a minority of subjects
  RibbonSpec ant;
  const bool has_ant = rng.bernoulli(0.85);
  if (has_ant) {
    const double off = rng.uniform(12.0, 14.0);
    const double len = rng.uniform(20.0, 42.0);
    const double cz = 0.5 * (main.z0 + main.z1) + rng.uniform(-4.0, 4.0);
    ant.z0 = cz - 0.5 * len;
    ant.z1 = cz + 0.5 * len;
    ant.depth = rng.uniform(10.0, 16.0);
    ant.y0 = main.y0 + rng.uniform(-1.0, 3.0);
    ant.xc = main.xc - off;
    ant.tilt = rng.uniform(-1.5, 1.5);
    ant.bow = rng.uniform(0.5, 1.5);
    ant.wob_amp = rng.uniform(0.4, 1.2);
    ant.wob_lambda = rng.uniform(24.0, 40.0);
    ant.wob_phase = rng.uniform(0.0, 2.0 * kPi);
    ant.knobs.push_back({cz + rng.uniform(-8.0, 8.0), rng.uniform(0.5, 2.0),
                         rng.uniform(5.0, 8.0)});
    const bool split = rng.bernoulli(0.6);
    const double zs = cz + rng.uniform(-5.0, 5.0);
    const double gap = rng.uniform(3.0, 5.0);
    if (split) {
      rasterize_ribbon(g, ant, 5, ant.z0, zs - 0.5 * gap);
      rasterize_ribbon(g, ant, 6, zs + 0.5 * gap, ant.z1);
    } else {
      rasterize_ribbon(g, ant, 5);
    }
  }

  // branches, labels from 7 on
  {
    const int nb = rng.uniform_int(p.branch_count_min, p.branch_count_max);
    std::vector<const RibbonSpec*> hosts{&main, &post};
    if (has_ant) hosts.push_back(&ant);
    for (int i = 0; i < nb; ++i) {
      const RibbonSpec& host = *hosts[rng.below(hosts.size())];
      const int size = rng.uniform_int(p.branch_size_min, p.branch_size_max);
      const int w = rng.uniform_int(4, 16);
      const int h = std::clamp(
          static_cast<int>(std::lround(static_cast<double>(size) / w)), 3, 26);
      double zb = 0.0;
      for (int tries = 0; tries < 20; ++tries) {
        zb = rng.uniform(host.z0 + 4.0, host.z1 - 4.0);
        if (!out.truth.interrupted || &host != &main) break;
        if (zb < gap_z0 - 5.0 || zb > gap_z0 + p.gap_voxels + 5.0) break;
      }
      const double dmax = ribbon_depth_at(host, zb);
      const double yb =
          rng.uniform(host.y0 + 1.0, std::max(host.y0 + 2.0,
                                              host.y0 + dmax - h - 1.0));
      const int dir = rng.bernoulli(0.5) ? 1 : -1;
      const double drift = rng.uniform(-2.0, 2.0);
      rasterize_branch(g, host, yb, zb, w, h, dir, drift,
                       static_cast<std::uint32_t>(7 + i));
    }
  }

  if (p.side == Side::left) {
    g = flip_lr(g);
    if (out.truth.gap_box) {
      BoundingBox& b = *out.truth.gap_box;
      const int nx = g.dims.nx;
      b = {nx - 1 - b.x1, b.y0, b.z0, nx - 1 - b.x0, b.y1, b.z1};
    }
  }

  for (std::uint32_t v : g.data)
    if (v != 0) out.truth.ss_sizes[v] += 1;
  return out;
}

std::map<std::uint32_t, int> in_mask_sizes(const SyntheticSubject& s,
                                           const RegionMask& mask) {
  if (!(s.skeleton.dims == mask.mask.dims))
    throw RangeError("in_mask_sizes: dims differ");
  std::map<std::uint32_t, int> sizes;
  for (std::size_t i = 0; i < s.skeleton.data.size(); ++i) {
    const std::uint32_t v = s.skeleton.data[i];
    if (v != 0 && mask.mask.data[i]) sizes[v] += 1;
  }
  return sizes;
}

std::optional<DeletionOutcome> delete_ss(const SyntheticSubject& s,
                                         const RegionMask& mask, Band band,
                                         Rng& rng) {
  const auto sizes = in_mask_sizes(s, mask);
  std::vector<std::uint32_t> candidates;
  for (const auto& [label, n] : sizes)
    if (n >= band.lo && n < band.hi) candidates.push_back(label);
  if (candidates.empty()) return std::nullopt;
  const std::uint32_t chosen =
      candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
  DeletionOutcome out;
  out.skeleton = s.skeleton;
  for (std::uint32_t& v : out.skeleton.data)
    if (v == chosen) {
      v = 0;
      ++out.erased_total;
    }
  out.erased_label = chosen;
  out.erased_in_mask = sizes.at(chosen);
  return out;
}

BenchmarkSet build_deletion_benchmark(const std::vector<SyntheticSubject>& test,
                                      const RegionMask& mask, Band band,
                                      Rng& rng, double split_ratio) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto sizes = in_mask_sizes(test[i], mask);
    for (const auto& [label, n] : sizes)
      if (n >= band.lo && n < band.hi) {
        eligible.push_back(i);
        break;
      }
  }
  if (eligible.size() < 2)
    throw RangeError("deletion benchmark: fewer than 2 eligible subjects");
  rng.shuffle(eligible);
  const auto n_ctrl = static_cast<std::size_t>(
      std::floor(static_cast<double>(eligible.size()) * split_ratio));
  BenchmarkSet b;
  b.kind = "deletion";
  b.band = band;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    const std::size_t src = eligible[i];
    if (i < n_ctrl) {
      b.controls.push_back({test[src], src, std::nullopt});
    } else {
      auto outcome = delete_ss(test[src], mask, band, rng);
      BenchmarkEntry e;
      e.subject = test[src];
      e.subject.skeleton = outcome->skeleton;
      e.source_index = src;
      e.deletion = std::move(outcome);
      b.altered.push_back(std::move(e));
    }
  }
  return b;
}

BenchmarkSet build_asymmetry_benchmark(const GeneratorParams& right_params,
                                       const GeneratorParams& left_params,
                                       int n, std::uint64_t seed) {
  BenchmarkSet b;
  b.kind = "asymmetry";
  for (int i = 0; i < n; ++i) {
    GeneratorParams rp = right_params;
    rp.side = Side::right;
    b.controls.push_back(
        {generate_subject(rp, derive_seed(seed, "asym-right", i)),
         static_cast<std::size_t>(i), std::nullopt});
  }
  for (int i = 0; i < n; ++i) {
    GeneratorParams lp = left_params;
    lp.side = Side::left;
    SyntheticSubject s =
        generate_subject(lp, derive_seed(seed, "asym-left", i));
    s.skeleton = flip_lr(s.skeleton);
    if (s.truth.gap_box) {
      BoundingBox& box = *s.truth.gap_box;
      const int nx = s.skeleton.dims.nx;
      box = {nx - 1 - box.x1, box.y0, box.z0, nx - 1 - box.x0, box.y1, box.z1};
    }
    b.altered.push_back({std::move(s), static_cast<std::size_t>(i), std::nullopt});
  }
  return b;
}

}  // namespace fold
