#include "pcw/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

static_assert(std::endian::native == std::endian::little, "file formats assume little-endian");

namespace pcw {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'W', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

using Blockf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void write_block(std::ostream& os, const std::string& name, const Blockf& data) {
  write_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(os, static_cast<std::uint32_t>(data.rows()));
  write_u32(os, static_cast<std::uint32_t>(data.cols()));
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(data.size())));
}

std::pair<std::string, Blockf> read_block(std::istream& is, const std::string& path) {
  const std::uint32_t name_len = read_u32(is);
  if (!is || name_len > 4096) throw IoError("load_checkpoint: bad block name in " + path);
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  const std::uint32_t rows = read_u32(is);
  const std::uint32_t cols = read_u32(is);
  if (!is) throw IoError("load_checkpoint: truncated block header in " + path);
  Blockf data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(data.size())));
  if (!is) throw IoError("load_checkpoint: truncated block data in " + path);
  return {std::move(name), std::move(data)};
}

}  // namespace

template <class S>
void save_checkpoint(const std::filesystem::path& path, const NetworkParams<S>& params,
                     const Adam<S>& adam) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_checkpoint: cannot open " + path.string());

  std::vector<std::pair<std::string, Blockf>> blocks;
  params.for_each_block([&](const std::string& name, const MatX<S>& m) {
    blocks.emplace_back(name, m.template cast<float>());
  });
  const std::size_t n_params = blocks.size();
  if (adam.moment1().size() != n_params || adam.moment2().size() != n_params)
    throw BadSizeParams("save_checkpoint: optimizer state does not match network");
  for (std::size_t i = 0; i < n_params; ++i) {
    blocks.emplace_back("adam." + blocks[i].first + ".m", adam.moment1()[i].template cast<float>());
    blocks.emplace_back("adam." + blocks[i].first + ".v", adam.moment2()[i].template cast<float>());
  }
  blocks.emplace_back("train.win_counts", params.win_counts.template cast<float>());

  os.write(kMagic, sizeof kMagic);
  write_u32(os, kVersion);
  write_u64(os, adam.step_count());
  write_u32(os, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, data] : blocks) write_block(os, name, data);
  if (!os) throw IoError("save_checkpoint: write failed for " + path.string());
}

template <class S>
std::uint64_t load_checkpoint(const std::filesystem::path& path, NetworkParams<S>& params,
                              Adam<S>* adam) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("load_checkpoint: cannot open " + path.string());
  char magic[8] = {};
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw FormatVersionMismatch("load_checkpoint: bad magic in " + path.string());
  const std::uint32_t version = read_u32(is);
  if (!is || version != kVersion)
    throw FormatVersionMismatch("load_checkpoint: unsupported version in " + path.string());
  const std::uint64_t step = read_u64(is);
  const std::uint32_t count = read_u32(is);
  if (!is) throw IoError("load_checkpoint: truncated header in " + path.string());

  std::map<std::string, Blockf> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, data] = read_block(is, path.string());
    if (!stored.emplace(std::move(name), std::move(data)).second)
      throw IoError("load_checkpoint: duplicate block in " + path.string());
  }

  auto take = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) -> Blockf {
    auto it = stored.find(name);
    if (it == stored.end())
      throw IoError("load_checkpoint: missing block " + name + " in " + path.string());
    if (it->second.rows() != rows || it->second.cols() != cols)
      throw IoError("load_checkpoint: shape mismatch for " + name + " in " + path.string());
    Blockf out = std::move(it->second);
    stored.erase(it);
    return out;
  };

  std::size_t index = 0;
  params.for_each_block([&](const std::string& name, MatX<S>& m) {
    m = take(name, m.rows(), m.cols()).template cast<S>();
    const Blockf m1 = take("adam." + name + ".m", m.rows(), m.cols());
    const Blockf m2 = take("adam." + name + ".v", m.rows(), m.cols());
    if (adam) {
      adam->moment1()[index] = m1.template cast<S>();
      adam->moment2()[index] = m2.template cast<S>();
    }
    ++index;
  });
  params.win_counts = take("train.win_counts", 1, params.config.branches).template cast<S>();
  if (!stored.empty())
    throw IoError("load_checkpoint: unknown block " + stored.begin()->first + " in " + path.string());
  if (adam) adam->set_step_count(step);
  return step;
}

template void save_checkpoint<float>(const std::filesystem::path&, const NetworkParams<float>&,
                                     const Adam<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const NetworkParams<double>&,
                                      const Adam<double>&);
template std::uint64_t load_checkpoint<float>(const std::filesystem::path&, NetworkParams<float>&,
                                              Adam<float>*);
template std::uint64_t load_checkpoint<double>(const std::filesystem::path&,
                                               NetworkParams<double>&, Adam<double>*);

}  // namespace pcw
