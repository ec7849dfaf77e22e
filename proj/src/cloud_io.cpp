#include "pcw/data/cloud_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

static_assert(std::endian::native == std::endian::little, "file formats assume little-endian");

namespace pcw {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'W', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint32_t payload_crc(const float* data, std::size_t count) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(count * sizeof(float))));
}

}  // namespace

void write_cloud(const std::filesystem::path& path, const Points3f& cloud) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_cloud: cannot open " + path.string());
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(cloud.rows()));
  os.write(reinterpret_cast<const char*>(cloud.data()),
           static_cast<std::streamsize>(sizeof(float) * 3 * static_cast<std::size_t>(cloud.rows())));
  write_u32(os, payload_crc(cloud.data(), 3 * static_cast<std::size_t>(cloud.rows())));
  if (!os) throw IoError("write_cloud: write failed for " + path.string());
}

Points3f read_cloud(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_cloud: cannot open " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatVersionMismatch("read_cloud: bad magic in " + path.string());
  const std::uint32_t version = read_u32(is);
  if (!is || version != kVersion)
    throw FormatVersionMismatch("read_cloud: unsupported version in " + path.string());
  const std::uint32_t n = read_u32(is);
  Points3f cloud(static_cast<Eigen::Index>(n), 3);
  is.read(reinterpret_cast<char*>(cloud.data()),
          static_cast<std::streamsize>(sizeof(float) * 3 * n));
  const std::uint32_t stored = read_u32(is);
  if (!is) throw IoError("read_cloud: truncated file " + path.string());
  if (stored != payload_crc(cloud.data(), 3 * static_cast<std::size_t>(n)))
    throw ChecksumMismatch("read_cloud: checksum mismatch in " + path.string());
  return cloud;
}

}  // namespace pcw
