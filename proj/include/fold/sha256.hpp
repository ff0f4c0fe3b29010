#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

namespace fold {

// FIPS 180-4 SHA-256, lowercase hex digest
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::filesystem::path& path);  // IoError

}  // namespace fold
