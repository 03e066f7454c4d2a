#pragma once

#include "ifnet/config.hpp"
#include "ifnet/params.hpp"

#include <filesystem>

namespace ifnet {

// Layout, all integers little-endian:
//   "IFNETCKP"                      8-byte magic
//   u32 version                     currently 1
//   u64 length, bytes               config JSON (UTF-8)
//   u32 array count
//   per array:
//     u32 length, bytes             name, e.g. "block0.edge1.weight"
//     u32 rows, u32 cols
//     f64 x rows*cols               row-major, IEEE-754 little-endian
struct Checkpoint {
  Config config;
  NetworkParameters params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws ParseError on a bad magic, version, name or shape mismatch against the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ifnet
