#include "fold/grid.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace fold {

namespace {

constexpr double kPi = 3.14159265358979323846;

float trilinear(const ScalarGrid& g, double x, double y, double z, float fill) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int z0 = static_cast<int>(std::floor(z));
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  double acc = 0.0;
  for (int cz = 0; cz < 2; ++cz)
    for (int cy = 0; cy < 2; ++cy)
      for (int cx = 0; cx < 2; ++cx) {
        const double w = (cx ? fx : 1.0 - fx) * (cy ? fy : 1.0 - fy) *
                         (cz ? fz : 1.0 - fz);
        if (w == 0.0) continue;
        const int xi = x0 + cx, yi = y0 + cy, zi = z0 + cz;
        const double v = g.in_bounds(xi, yi, zi) ? g.at(xi, yi, zi) : fill;
        acc += w * v;
      }
  return static_cast<float>(acc);
}

}  // namespace

ScalarGrid rotate_about(const ScalarGrid& g, Vec3d center, Vec3d angles_deg,
                        float fill) {
  const double ax = angles_deg.x * kPi / 180.0;
  const double ay = angles_deg.y * kPi / 180.0;
  const double az = angles_deg.z * kPi / 180.0;
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  // R = Rz * Ry * Rx, applied x first
  const double m[3][3] = {
      {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
      {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
      {-sy, cy * sx, cy * cx},
  };
  ScalarGrid out(g.dims, g.voxel_mm);
  for (int z = 0; z < g.dims.nz; ++z)
    for (int y = 0; y < g.dims.ny; ++y)
      for (int x = 0; x < g.dims.nx; ++x) {
        const double px = x - center.x, py = y - center.y, pz = z - center.z;
        // sample at R^-1 p = R^T p
        const double qx = m[0][0] * px + m[1][0] * py + m[2][0] * pz + center.x;
        const double qy = m[0][1] * px + m[1][1] * py + m[2][1] * pz + center.y;
        const double qz = m[0][2] * px + m[1][2] * py + m[2][2] * pz + center.z;
        out.at(x, y, z) = trilinear(g, qx, qy, qz, fill);
      }
  return out;
}

ScalarGrid downsample(const ScalarGrid& g, int factor) {
  if (factor < 1) throw RangeError("downsample: factor must be >= 1");
  const Dims3 od{(g.dims.nx + factor - 1) / factor,
                 (g.dims.ny + factor - 1) / factor,
                 (g.dims.nz + factor - 1) / factor};
  ScalarGrid out(od, {g.voxel_mm.x * factor, g.voxel_mm.y * factor,
                      g.voxel_mm.z * factor});
  for (int z = 0; z < od.nz; ++z)
    for (int y = 0; y < od.ny; ++y)
      for (int x = 0; x < od.nx; ++x) {
        const int x1 = std::min((x + 1) * factor, g.dims.nx);
        const int y1 = std::min((y + 1) * factor, g.dims.ny);
        const int z1 = std::min((z + 1) * factor, g.dims.nz);
        double sum = 0.0;
        int n = 0;
        for (int zz = z * factor; zz < z1; ++zz)
          for (int yy = y * factor; yy < y1; ++yy)
            for (int xx = x * factor; xx < x1; ++xx) {
              sum += g.at(xx, yy, zz);
              ++n;
            }
        out.at(x, y, z) = static_cast<float>(sum / n);
      }
  return out;
}

BinaryGrid downsample_any(const BinaryGrid& g, int factor) {
  if (factor < 1) throw RangeError("downsample_any: factor must be >= 1");
  const Dims3 od{(g.dims.nx + factor - 1) / factor,
                 (g.dims.ny + factor - 1) / factor,
                 (g.dims.nz + factor - 1) / factor};
  BinaryGrid out(od, {g.voxel_mm.x * factor, g.voxel_mm.y * factor,
                      g.voxel_mm.z * factor});
  for (int z = 0; z < g.dims.nz; ++z)
    for (int y = 0; y < g.dims.ny; ++y)
      for (int x = 0; x < g.dims.nx; ++x)
        if (g.at(x, y, z))
          out.at(x / factor, y / factor, z / factor) = 1;
  return out;
}

ScalarGrid chamfer_field(const BinaryGrid& object) {
  const Dims3 d = object.dims;
  const Vec3f s = object.voxel_mm;
  ScalarGrid dist(d, s, std::numeric_limits<float>::infinity());
  for (std::size_t i = 0; i < dist.data.size(); ++i)
    if (object.data[i]) dist.data[i] = 0.0f;

  struct Step {
    int dx, dy, dz;
    float w;
  };
  // (3,4,5)/3 relative to the isotropic Euclidean step, times physical length
  std::vector<Step> fwd;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const bool causal =
            dz < 0 || (dz == 0 && (dy < 0 || (dy == 0 && dx < 0)));
        if (!causal) continue;
        const int cls = std::abs(dx) + std::abs(dy) + std::abs(dz);
        const double coef = cls == 1   ? 1.0
                            : cls == 2 ? (4.0 / 3.0) / std::sqrt(2.0)
                                       : (5.0 / 3.0) / std::sqrt(3.0);
        const double ex = dx * s.x, ey = dy * s.y, ez = dz * s.z;
        const double len = std::sqrt(ex * ex + ey * ey + ez * ez);
        fwd.push_back({dx, dy, dz, static_cast<float>(coef * len)});
      }

  auto relax = [&](int x, int y, int z, int sign) {
    float best = dist.at(x, y, z);
    for (const Step& st : fwd) {
      const int nx = x + sign * st.dx, ny = y + sign * st.dy,
                nz = z + sign * st.dz;
      if (!dist.in_bounds(nx, ny, nz)) continue;
      const float cand = dist.at(nx, ny, nz) + st.w;
      if (cand < best) best = cand;
    }
    dist.at(x, y, z) = best;
  };

  for (int z = 0; z < d.nz; ++z)
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) relax(x, y, z, +1);
  for (int z = d.nz - 1; z >= 0; --z)
    for (int y = d.ny - 1; y >= 0; --y)
      for (int x = d.nx - 1; x >= 0; --x) relax(x, y, z, -1);
  return dist;
}

BinaryGrid dilate(const BinaryGrid& g, double radius_mm) {
  const ScalarGrid dist = chamfer_field(g);
  BinaryGrid out(g.dims, g.voxel_mm);
  // absorb float ulps so exact-radius neighbors stay included
  const float r = static_cast<float>(radius_mm * (1.0 + 1e-5));
  for (std::size_t i = 0; i < dist.data.size(); ++i)
    out.data[i] = dist.data[i] <= r ? 1 : 0;
  return out;
}

BoundingBox tight_bbox(const BinaryGrid& g) {
  BoundingBox b{g.dims.nx, g.dims.ny, g.dims.nz, -1, -1, -1};
  for (int z = 0; z < g.dims.nz; ++z)
    for (int y = 0; y < g.dims.ny; ++y)
      for (int x = 0; x < g.dims.nx; ++x)
        if (g.at(x, y, z)) {
          b.x0 = std::min(b.x0, x);
          b.y0 = std::min(b.y0, y);
          b.z0 = std::min(b.z0, z);
          b.x1 = std::max(b.x1, x);
          b.y1 = std::max(b.y1, y);
          b.z1 = std::max(b.z1, z);
        }
  if (b.x1 < 0) return BoundingBox{};
  return b;
}

}  // namespace fold
