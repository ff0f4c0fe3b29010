#include "fold/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "fold/error.hpp"

namespace fold {

DistanceMap chamfer_dt(const LabelGrid& skeleton) {
  BinaryGrid object(skeleton.dims, skeleton.voxel_mm);
  for (std::size_t i = 0; i < skeleton.data.size(); ++i)
    object.data[i] = skeleton.data[i] != 0 ? 1 : 0;
  return DistanceMap{chamfer_field(object)};
}

NormalizedMap normalize_map(const DistanceMap& dt) {
  NormalizedMap out{ScalarGrid(dt.grid.dims, dt.grid.voxel_mm)};
  for (std::size_t i = 0; i < dt.grid.data.size(); ++i) {
    const double x = dt.grid.data[i];
    const double e = std::exp(-x);
    out.grid.data[i] = static_cast<float>(2.0 * e / (1.0 + e));
  }
  return out;
}

RegionMask learn_mask(const std::vector<const LabelGrid*>& subjects,
                      const std::vector<std::uint32_t>& target_labels,
                      double dilation_mm, int margin) {
  if (subjects.empty()) throw RangeError("learn_mask: no subjects");
  const Dims3 dims = subjects.front()->dims;
  const Vec3f voxel = subjects.front()->voxel_mm;
  BinaryGrid support(dims, voxel);
  for (const LabelGrid* s : subjects) {
    if (!(s->dims == dims))
      throw RangeError("learn_mask: subjects disagree on dims");
    for (std::size_t i = 0; i < s->data.size(); ++i) {
      const std::uint32_t v = s->data[i];
      if (v == 0) continue;
      if (target_labels.empty() ||
          std::find(target_labels.begin(), target_labels.end(), v) !=
              target_labels.end())
        support.data[i] = 1;
    }
  }
  BoundingBox raw = tight_bbox(support);
  if (raw.empty()) throw RangeError("learn_mask: no target-label voxels");
  RegionMask m;
  m.mask = dilation_mm > 0.0 ? dilate(support, dilation_mm) : support;
  m.bbox = tight_bbox(m.mask);
  m.dilation_mm = dilation_mm;
  m.margin = margin;
  double sx = 0.0, sy = 0.0, sz = 0.0, n = 0.0;
  for (int z = 0; z < dims.nz; ++z)
    for (int y = 0; y < dims.ny; ++y)
      for (int x = 0; x < dims.nx; ++x)
        if (m.mask.at(x, y, z)) {
          sx += x;
          sy += y;
          sz += z;
          n += 1.0;
        }
  m.center = {sx / n, sy / n, sz / n};
  return m;
}

namespace {

BoundingBox crop_box(const RegionMask& mask, int factor, Dims3 ds_dims) {
  return clip(expand(scale_box_down(mask.bbox, factor), mask.margin), ds_dims);
}

// voxel-center-preserving coordinate map into the downsampled frame
double to_ds_coord(double c, int factor) {
  return (c + 0.5) / factor - 0.5;
}

}  // namespace

NormalizedMap preprocess_subject(const LabelGrid& skeleton,
                                 const RegionMask& mask, int factor,
                                 Dims3 pad_dims) {
  if (!(skeleton.dims == mask.mask.dims))
    throw RangeError("preprocess_subject: skeleton/mask dims differ");
  const DistanceMap dt = chamfer_dt(skeleton);
  const ScalarGrid ds = downsample(dt.grid, factor);
  const BoundingBox box = crop_box(mask, factor, ds.dims);
  const ScalarGrid cropped = crop(ds, box);
  const NormalizedMap norm = normalize_map(DistanceMap{cropped});
  return NormalizedMap{pad_to(norm.grid, pad_dims, 0.0f)};
}

CropMask mask_in_crop_frame(const RegionMask& mask, int factor,
                            Dims3 pad_dims) {
  const BinaryGrid ds = downsample_any(mask.mask, factor);
  const BoundingBox box = crop_box(mask, factor, ds.dims);
  const BinaryGrid cropped = crop(ds, box);
  const Vec3d off = pad_offset(cropped.dims, pad_dims);
  CropMask out;
  out.mask = pad_to(cropped, pad_dims, std::uint8_t{0});
  out.center = {to_ds_coord(mask.center.x, factor) - box.x0 + off.x,
                to_ds_coord(mask.center.y, factor) - box.y0 + off.y,
                to_ds_coord(mask.center.z, factor) - box.z0 + off.z};
  return out;
}

BoundingBox box_in_crop_frame(const BoundingBox& native_box,
                              const RegionMask& mask, int factor,
                              Dims3 native_dims, Dims3 pad_dims) {
  if (native_box.empty()) return {};
  const Dims3 ds_dims{(native_dims.nx + factor - 1) / factor,
                      (native_dims.ny + factor - 1) / factor,
                      (native_dims.nz + factor - 1) / factor};
  const BoundingBox window = crop_box(mask, factor, ds_dims);
  const BoundingBox b = scale_box_down(native_box, factor);
  const BoundingBox cut{std::max(b.x0, window.x0), std::max(b.y0, window.y0),
                        std::max(b.z0, window.z0), std::min(b.x1, window.x1),
                        std::min(b.y1, window.y1), std::min(b.z1, window.z1)};
  if (cut.empty()) return {};
  const Vec3d off = pad_offset(window.size(), pad_dims);
  const int ox = int(off.x), oy = int(off.y), oz = int(off.z);
  return {cut.x0 - window.x0 + ox, cut.y0 - window.y0 + oy,
          cut.z0 - window.z0 + oz, cut.x1 - window.x0 + ox,
          cut.y1 - window.y0 + oy, cut.z1 - window.z0 + oz};
}

NormalizedMap apply_mask(const NormalizedMap& x, const CropMask& mask) {
  if (!(x.grid.dims == mask.mask.dims))
    throw RangeError("apply_mask: dims differ");
  NormalizedMap out = x;
  for (std::size_t i = 0; i < out.grid.data.size(); ++i)
    if (!mask.mask.data[i]) out.grid.data[i] = 0.0f;
  return out;
}

NormalizedMap augment(const NormalizedMap& x, const CropMask& mask,
                      double angle_range_deg, Rng& rng) {
  const double ax = rng.uniform(-angle_range_deg, angle_range_deg);
  const double ay = rng.uniform(-angle_range_deg, angle_range_deg);
  const double az = rng.uniform(-angle_range_deg, angle_range_deg);
  ScalarGrid rot = rotate_about(x.grid, mask.center, {ax, ay, az}, 0.0f);
  for (float& v : rot.data) v = std::clamp(v, 0.0f, 1.0f);
  return apply_mask(NormalizedMap{std::move(rot)}, mask);
}

}  // namespace fold
