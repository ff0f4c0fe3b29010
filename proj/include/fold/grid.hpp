#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fold/error.hpp"

namespace fold {

struct Dims3 {
  int nx = 0, ny = 0, nz = 0;
  bool operator==(const Dims3&) const = default;
  std::size_t count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
           static_cast<std::size_t>(nz);
  }
};

inline std::string to_string(const Dims3& d) {
  return std::to_string(d.nx) + "x" + std::to_string(d.ny) + "x" +
         std::to_string(d.nz);
}

struct Vec3f {
  float x = 1.0f, y = 1.0f, z = 1.0f;
  bool operator==(const Vec3f&) const = default;
};

struct Vec3d {
  double x = 0.0, y = 0.0, z = 0.0;
};

// inclusive on both ends
struct BoundingBox {
  int x0 = 0, y0 = 0, z0 = 0;
  int x1 = -1, y1 = -1, z1 = -1;
  bool operator==(const BoundingBox&) const = default;
  bool empty() const { return x1 < x0 || y1 < y0 || z1 < z0; }
  Dims3 size() const { return {x1 - x0 + 1, y1 - y0 + 1, z1 - z0 + 1}; }
  bool contains(int x, int y, int z) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1 && z >= z0 && z <= z1;
  }
};

enum class GridKind : std::uint32_t { label = 0, scalar = 1, binary = 2 };

// Dense voxel volume. data is laid out x-fastest, then y, then z.
template <class T>
struct Grid {
  Dims3 dims;
  Vec3f voxel_mm{1.0f, 1.0f, 1.0f};
  std::vector<T> data;

  Grid() = default;
  Grid(Dims3 d, Vec3f v = {1.0f, 1.0f, 1.0f}, T fill = T{})
      : dims(d), voxel_mm(v), data(d.count(), fill) {}

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * dims.ny + y) * dims.nx + x;
  }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && x < dims.nx && y >= 0 && y < dims.ny && z >= 0 && z < dims.nz;
  }
  T& at(int x, int y, int z) { return data[index(x, y, z)]; }
  const T& at(int x, int y, int z) const { return data[index(x, y, z)]; }
};

using LabelGrid = Grid<std::uint32_t>;
using ScalarGrid = Grid<float>;
using BinaryGrid = Grid<std::uint8_t>;

template <class T>
constexpr GridKind kind_of() {
  if constexpr (std::is_same_v<T, std::uint32_t>) return GridKind::label;
  if constexpr (std::is_same_v<T, float>) return GridKind::scalar;
  return GridKind::binary;
}

// mirror along x: x -> nx-1-x
template <class T>
Grid<T> flip_lr(const Grid<T>& g) {
  Grid<T> out(g.dims, g.voxel_mm);
  for (int z = 0; z < g.dims.nz; ++z)
    for (int y = 0; y < g.dims.ny; ++y) {
      const T* src = &g.data[g.index(0, y, z)];
      T* dst = &out.data[out.index(0, y, z)];
      for (int x = 0; x < g.dims.nx; ++x) dst[x] = src[g.dims.nx - 1 - x];
    }
  return out;
}

template <class T>
Grid<T> crop(const Grid<T>& g, const BoundingBox& box) {
  if (box.empty()) throw RangeError("crop: empty box");
  if (box.x0 < 0 || box.y0 < 0 || box.z0 < 0 || box.x1 >= g.dims.nx ||
      box.y1 >= g.dims.ny || box.z1 >= g.dims.nz)
    throw RangeError("crop: box exceeds grid bounds");
  Grid<T> out(box.size(), g.voxel_mm);
  for (int z = box.z0; z <= box.z1; ++z)
    for (int y = box.y0; y <= box.y1; ++y) {
      const T* src = &g.data[g.index(box.x0, y, z)];
      T* dst = &out.data[out.index(0, y - box.y0, z - box.z0)];
      std::copy(src, src + out.dims.nx, dst);
    }
  return out;
}

// centered padding; when the excess is odd the lower side gets the smaller half
template <class T>
Grid<T> pad_to(const Grid<T>& g, Dims3 target, T fill = T{}) {
  if (target.nx < g.dims.nx || target.ny < g.dims.ny || target.nz < g.dims.nz)
    throw RangeError("pad_to: target smaller than grid");
  Grid<T> out(target, g.voxel_mm, fill);
  const int ox = (target.nx - g.dims.nx) / 2;
  const int oy = (target.ny - g.dims.ny) / 2;
  const int oz = (target.nz - g.dims.nz) / 2;
  for (int z = 0; z < g.dims.nz; ++z)
    for (int y = 0; y < g.dims.ny; ++y) {
      const T* src = &g.data[g.index(0, y, z)];
      T* dst = &out.data[out.index(ox, y + oy, z + oz)];
      std::copy(src, src + g.dims.nx, dst);
    }
  return out;
}

// offset pad_to places content at, per axis
inline Vec3d pad_offset(Dims3 from, Dims3 target) {
  return {static_cast<double>((target.nx - from.nx) / 2),
          static_cast<double>((target.ny - from.ny) / 2),
          static_cast<double>((target.nz - from.nz) / 2)};
}

// Trilinear resample of inverse-rotated coordinates. Angles are degrees and
// compose in fixed order x, then y, then z about the continuous voxel-space
// center. Reads outside the grid take `fill`.
ScalarGrid rotate_about(const ScalarGrid& g, Vec3d center, Vec3d angles_deg,
                        float fill);

// block-mean pooling; partial edge blocks average over the voxels they have
ScalarGrid downsample(const ScalarGrid& g, int factor);

// block-any pooling for binary support grids
BinaryGrid downsample_any(const BinaryGrid& g, int factor);

// Chamfer distance (mm) to the nonzero voxels of `object`, two-pass raster
// scan over the 3x3x3 neighborhood with weights (3,4,5)/3 scaled by physical
// step length. Exact for the chamfer metric.
ScalarGrid chamfer_field(const BinaryGrid& object);

// all voxels within radius_mm of the support, measured in the chamfer metric
BinaryGrid dilate(const BinaryGrid& g, double radius_mm);

// tight bounding box of nonzero voxels; empty box when there are none
BoundingBox tight_bbox(const BinaryGrid& g);

inline BoundingBox expand(const BoundingBox& b, int margin) {
  return {b.x0 - margin, b.y0 - margin, b.z0 - margin,
          b.x1 + margin, b.y1 + margin, b.z1 + margin};
}

inline BoundingBox clip(const BoundingBox& b, Dims3 dims) {
  return {std::max(b.x0, 0),           std::max(b.y0, 0),
          std::max(b.z0, 0),           std::min(b.x1, dims.nx - 1),
          std::min(b.y1, dims.ny - 1), std::min(b.z1, dims.nz - 1)};
}

// map a full-resolution box to the grid downsampled by `factor` (outer cover)
inline BoundingBox scale_box_down(const BoundingBox& b, int factor) {
  return {b.x0 / factor, b.y0 / factor, b.z0 / factor,
          b.x1 / factor, b.y1 / factor, b.z1 / factor};
}

}  // namespace fold
