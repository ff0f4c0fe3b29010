#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fold/grid.hpp"
#include "fold/preprocess.hpp"
#include "fold/rng.hpp"

namespace fold {

enum class Side { right, left };

inline const char* to_string(Side s) {
  return s == Side::right ? "right" : "left";
}

struct GeneratorParams {
  Dims3 dims{64, 64, 80};
  Vec3f voxel_mm{1.0f, 1.0f, 1.0f};
  Side side = Side::right;

  int branch_count_min = 2;
  int branch_count_max = 5;
  int branch_size_min = 40;   // target voxels per branch
  int branch_size_max = 220;
  double double_knob_prob = 0.10;
  double interruption_prob = 0.0;
  int gap_voxels = 8;

  // per-subject factor on all ribbon dimensions, like head-size variation
  double size_scale_min = 1.0;
  double size_scale_max = 1.0;
  // knob center as a fraction of main ribbon length
  double knob_pos_min = 0.35;
  double knob_pos_max = 0.65;

  // main ribbon geometry, native voxels
  double main_xc = 32.0;
  double main_xc_jitter = 2.0;
  double main_len_min = 40.0;
  double main_len_max = 48.0;
  double main_depth_min = 18.0;
  double main_depth_max = 22.0;
  double knob_amp_mean = 4.5;
  double knob_amp_sd = 1.0;
};

struct SubjectTruth {
  Side hemisphere = Side::right;
  int knob_count = 1;
  bool interrupted = false;
  std::optional<BoundingBox> gap_box;
  std::map<std::uint32_t, int> ss_sizes;  // label -> voxel count
};

struct SyntheticSubject {
  LabelGrid skeleton;
  SubjectTruth truth;
  std::uint64_t seed = 0;
};

// Fully determined by (params, seed): a curved main ribbon with 1-2 knob
// bends, two flanking neighbor ribbons (possibly segmented), and small branch
// surfaces. Labels: main 1 (and 2 when an interruption splits it), posterior
// neighbor 3/4, anterior neighbor 5/6, branches from 7 upward.
SyntheticSubject generate_subject(const GeneratorParams& params,
                                  std::uint64_t seed);

inline constexpr std::uint32_t kMainLabelA = 1;
inline constexpr std::uint32_t kMainLabelB = 2;

// half-open size band [lo, hi)
struct Band {
  int lo = 0;
  int hi = std::numeric_limits<int>::max();
};

std::map<std::uint32_t, int> in_mask_sizes(const SyntheticSubject& s,
                                           const RegionMask& mask);

struct DeletionOutcome {
  LabelGrid skeleton;          // with the chosen SS erased
  std::uint32_t erased_label = 0;
  int erased_in_mask = 0;
  int erased_total = 0;
};

// Erase all voxels of one SS whose in-mask count lies in the band, chosen
// uniformly among candidates. nullopt when the subject has no candidate.
std::optional<DeletionOutcome> delete_ss(const SyntheticSubject& s,
                                         const RegionMask& mask, Band band,
                                         Rng& rng);

struct BenchmarkEntry {
  SyntheticSubject subject;
  std::size_t source_index = 0;
  std::optional<DeletionOutcome> deletion;  // provenance for altered entries
};

struct BenchmarkSet {
  std::string kind;  // "deletion" | "asymmetry"
  Band band;
  std::vector<BenchmarkEntry> controls;
  std::vector<BenchmarkEntry> altered;
};

// Split the band-eligible test subjects into an intact control half and an
// altered half (|controls| and |altered| differ by at most one).
BenchmarkSet build_deletion_benchmark(const std::vector<SyntheticSubject>& test,
                                      const RegionMask& mask, Band band,
                                      Rng& rng, double split_ratio = 0.5);

// n fresh right-side controls vs n left-side subjects mirrored back with
// flip_lr so both groups live in the same frame.
BenchmarkSet build_asymmetry_benchmark(const GeneratorParams& right_params,
                                       const GeneratorParams& left_params,
                                       int n, std::uint64_t seed);

}  // namespace fold
