#pragma once

#include <cstdint>
#include <vector>

#include "fold/grid.hpp"
#include "fold/rng.hpp"

namespace fold {

// chamfer distance to the skeleton, mm
struct DistanceMap {
  ScalarGrid grid;
};

// distance squashed to [0,1]; 1 on the skeleton, ~0 beyond ~4.5mm
struct NormalizedMap {
  ScalarGrid grid;
};

// region-of-interest support learned from labeled subjects, native frame
struct RegionMask {
  BinaryGrid mask;
  BoundingBox bbox;
  Vec3d center;       // continuous centroid of the support, voxel coords
  int margin = 8;     // crop margin at training resolution
  double dilation_mm = 5.0;
};

// the same support expressed in the final padded crop frame
struct CropMask {
  BinaryGrid mask;
  Vec3d center;
};

DistanceMap chamfer_dt(const LabelGrid& skeleton);

// x_norm = 2 / (1 + e^x): exactly 1 on the skeleton, decays towards 0
NormalizedMap normalize_map(const DistanceMap& dt);

// Pool target-label voxels over subjects (a voxel belongs to the support as
// soon as one subject marks it), then dilate by dilation_mm. An empty
// target list means every nonzero label.
RegionMask learn_mask(const std::vector<const LabelGrid*>& subjects,
                      const std::vector<std::uint32_t>& target_labels,
                      double dilation_mm, int margin);

// chamfer -> downsample -> crop to mask bbox + margin -> normalize -> pad
NormalizedMap preprocess_subject(const LabelGrid& skeleton,
                                 const RegionMask& mask, int factor,
                                 Dims3 pad_dims);

// mask transported through the same downsample/crop/pad geometry
CropMask mask_in_crop_frame(const RegionMask& mask, int factor, Dims3 pad_dims);

// a native-frame voxel box transported through the same geometry, clipped to
// the crop window; empty result when the box lies fully outside it
BoundingBox box_in_crop_frame(const BoundingBox& native_box,
                              const RegionMask& mask, int factor,
                              Dims3 native_dims, Dims3 pad_dims);

// zero everything outside the support
NormalizedMap apply_mask(const NormalizedMap& x, const CropMask& mask);

// Random rotation about the mask center, all three angles i.i.d. uniform in
// [-angle_range_deg, +angle_range_deg], followed by apply_mask.
NormalizedMap augment(const NormalizedMap& x, const CropMask& mask,
                      double angle_range_deg, Rng& rng);

}  // namespace fold
