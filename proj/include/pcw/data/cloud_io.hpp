#pragma once

#include <filesystem>

#include "pcw/common.hpp"

namespace pcw {

/// Binary, little-endian: magic "PCW1", u32 version = 1, u32 point count,
/// N x 3 f32 payload, u32 CRC32 of the payload.
void write_cloud(const std::filesystem::path& path, const Points3f& cloud);
Points3f read_cloud(const std::filesystem::path& path);

}  // namespace pcw
