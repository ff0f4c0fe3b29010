#include <algorithm>
#include <cstdio>
#include <fstream>

#include "fold/error.hpp"
#include "fold/explore.hpp"

namespace fold {

std::vector<std::uint8_t> slice_bytes(const ScalarGrid& g, int depth) {
  if (g.data.empty()) throw RangeError("slice_bytes: empty volume");
  if (depth < 0 || depth >= g.dims.nz)
    throw RangeError("slice_bytes: depth " + std::to_string(depth) +
                     " out of range [0," + std::to_string(g.dims.nz) + ")");
  const auto [lo_it, hi_it] = std::minmax_element(g.data.begin(), g.data.end());
  const float lo = *lo_it, hi = *hi_it;
  const float span = hi - lo;
  std::vector<std::uint8_t> bytes(std::size_t(g.dims.nx) * g.dims.ny, 0);
  if (span <= 0.0f) return bytes;  // constant volume renders as 0
  std::size_t k = 0;
  for (int y = 0; y < g.dims.ny; ++y)
    for (int x = 0; x < g.dims.nx; ++x) {
      const float v = (g.at(x, y, depth) - lo) / span;
      bytes[k++] = std::uint8_t(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
    }
  return bytes;
}

void render_slices(const ScalarGrid& g, const std::vector<int>& depths,
                   const std::filesystem::path& dir,
                   const std::string& prefix) {
  std::filesystem::create_directories(dir);
  for (int depth : depths) {
    const auto bytes = slice_bytes(g, depth);
    char name[64];
    std::snprintf(name, sizeof name, "%s_z%03d.pgm", prefix.c_str(), depth);
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << g.dims.nx << " " << g.dims.ny << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()),
              std::streamsize(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
  }
}

}  // namespace fold
