#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "fold/grid.hpp"

namespace fold {

// Volume container, magic "FVOL0001". Header: little-endian u32 kind,
// u32 nx, ny, nz, f32 voxel sizes. Payload is the grid data x-fastest
// (label u32, scalar f32, binary u8).
inline constexpr char kFvolMagic[8] = {'F', 'V', 'O', 'L', '0', '0', '0', '1'};

using AnyGrid = std::variant<LabelGrid, ScalarGrid, BinaryGrid>;

void save_fvol(const std::filesystem::path& path, const LabelGrid& g);
void save_fvol(const std::filesystem::path& path, const ScalarGrid& g);
void save_fvol(const std::filesystem::path& path, const BinaryGrid& g);

AnyGrid load_fvol(const std::filesystem::path& path);

// typed loaders, FormatError when the stored kind differs
LabelGrid load_label_fvol(const std::filesystem::path& path);
ScalarGrid load_scalar_fvol(const std::filesystem::path& path);
BinaryGrid load_binary_fvol(const std::filesystem::path& path);

// sidecar path for optional provenance: foo.fvol -> foo.meta.json
std::filesystem::path meta_path(const std::filesystem::path& volume_path);

}  // namespace fold
