#include "fold/io.hpp"

#include <cstring>
#include <fstream>

#include "fold/error.hpp"

namespace fold {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(const char* p) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24;
}

float get_f32(const char* p) {
  const std::uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

template <class T>
void save_impl(const std::filesystem::path& path, const Grid<T>& g) {
  std::string buf;
  buf.reserve(36 + g.data.size() * sizeof(T));
  buf.append(kFvolMagic, 8);
  put_u32(buf, static_cast<std::uint32_t>(kind_of<T>()));
  put_u32(buf, static_cast<std::uint32_t>(g.dims.nx));
  put_u32(buf, static_cast<std::uint32_t>(g.dims.ny));
  put_u32(buf, static_cast<std::uint32_t>(g.dims.nz));
  put_f32(buf, g.voxel_mm.x);
  put_f32(buf, g.voxel_mm.y);
  put_f32(buf, g.voxel_mm.z);
  for (const T& v : g.data) {
    if constexpr (sizeof(T) == 1) {
      buf.push_back(static_cast<char>(v));
    } else if constexpr (std::is_same_v<T, float>) {
      put_f32(buf, v);
    } else {
      put_u32(buf, v);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path.string());
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

template <class T>
Grid<T> parse_payload(const std::string& buf, Dims3 dims, Vec3f voxel) {
  const std::size_t need = 36 + dims.count() * sizeof(T);
  if (buf.size() != need)
    throw FormatError("payload length mismatch (have " +
                      std::to_string(buf.size()) + " bytes, need " +
                      std::to_string(need) + ")");
  Grid<T> g(dims, voxel);
  const char* p = buf.data() + 36;
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    if constexpr (sizeof(T) == 1) {
      g.data[i] = static_cast<T>(static_cast<unsigned char>(p[i]));
    } else if constexpr (std::is_same_v<T, float>) {
      g.data[i] = get_f32(p + 4 * i);
    } else {
      g.data[i] = get_u32(p + 4 * i);
    }
  }
  return g;
}

}  // namespace

void save_fvol(const std::filesystem::path& path, const LabelGrid& g) {
  save_impl(path, g);
}
void save_fvol(const std::filesystem::path& path, const ScalarGrid& g) {
  save_impl(path, g);
}
void save_fvol(const std::filesystem::path& path, const BinaryGrid& g) {
  save_impl(path, g);
}

AnyGrid load_fvol(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 36) throw FormatError("file too short for header");
  if (std::memcmp(buf.data(), kFvolMagic, 8) != 0)
    throw FormatError("unknown magic");
  const std::uint32_t kind = get_u32(buf.data() + 8);
  const std::uint32_t nx = get_u32(buf.data() + 12);
  const std::uint32_t ny = get_u32(buf.data() + 16);
  const std::uint32_t nz = get_u32(buf.data() + 20);
  const Vec3f voxel{get_f32(buf.data() + 24), get_f32(buf.data() + 28),
                    get_f32(buf.data() + 32)};
  constexpr std::uint32_t kDimCap = 1u << 14;
  if (nx == 0 || ny == 0 || nz == 0 || nx > kDimCap || ny > kDimCap ||
      nz > kDimCap)
    throw FormatError("implausible dims");
  const Dims3 dims{static_cast<int>(nx), static_cast<int>(ny),
                   static_cast<int>(nz)};
  switch (kind) {
    case 0:
      return parse_payload<std::uint32_t>(buf, dims, voxel);
    case 1:
      return parse_payload<float>(buf, dims, voxel);
    case 2:
      return parse_payload<std::uint8_t>(buf, dims, voxel);
    default:
      throw FormatError("unknown grid kind " + std::to_string(kind));
  }
}

LabelGrid load_label_fvol(const std::filesystem::path& path) {
  AnyGrid g = load_fvol(path);
  if (auto* p = std::get_if<LabelGrid>(&g)) return std::move(*p);
  throw FormatError("expected label grid: " + path.string());
}

ScalarGrid load_scalar_fvol(const std::filesystem::path& path) {
  AnyGrid g = load_fvol(path);
  if (auto* p = std::get_if<ScalarGrid>(&g)) return std::move(*p);
  throw FormatError("expected scalar grid: " + path.string());
}

BinaryGrid load_binary_fvol(const std::filesystem::path& path) {
  AnyGrid g = load_fvol(path);
  if (auto* p = std::get_if<BinaryGrid>(&g)) return std::move(*p);
  throw FormatError("expected binary grid: " + path.string());
}

std::filesystem::path meta_path(const std::filesystem::path& volume_path) {
  std::filesystem::path p = volume_path;
  p.replace_extension(".meta.json");
  return p;
}

}  // namespace fold
