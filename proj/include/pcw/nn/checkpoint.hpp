#pragma once

#include <filesystem>

#include "pcw/nn/adam.hpp"
#include "pcw/nn/network.hpp"

namespace pcw {

/// Binary, little-endian: magic "PCWCKPT1", u32 format version, u64 completed
/// step count, u32 block count, then named f32 blocks (u32 name length, name
/// bytes, u32 rows, u32 cols, row-major data). Blocks are every parameter
/// block, its Adam moments ("adam.<name>.m" / ".v") and "train.win_counts".
template <class S>
void save_checkpoint(const std::filesystem::path& path, const NetworkParams<S>& params,
                     const Adam<S>& adam);

/// Fills an already-constructed network (and optimizer, when given) from a
/// checkpoint; every expected block must be present with the exact shape, and
/// unknown blocks are rejected. Returns the stored step count.
template <class S>
std::uint64_t load_checkpoint(const std::filesystem::path& path, NetworkParams<S>& params,
                              Adam<S>* adam = nullptr);

}  // namespace pcw
