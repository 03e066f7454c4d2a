#pragma once

#include "ifnet/config.hpp"
#include "ifnet/geom.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ifnet::data {

using geom::PointCloud;
using geom::RigidTransform;

/// Asymmetric composite of 2-4 randomly posed primitives (ellipsoid, box, cylinder, torus),
/// surface-sampled with `num_points` points. Same seed gives the same shape at any count.
PointCloud sample_shape(std::uint64_t seed, int num_points);

struct Pair {
  PointCloud source;
  PointCloud target;
  RigidTransform gt;  // target ~ gt(source)
};

/// Builds one registration pair from a sample seed: normalise, sample transform, crop, noise.
Pair make_pair(std::uint64_t sample_seed, const DataConfig& cfg);

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);

struct ManifestEntry {
  std::string id;
  Split split = Split::kTrain;
  std::string source_path;  // relative to the manifest directory
  std::string target_path;
  std::optional<Eigen::Vector4d> gt_rotation;  // unit quaternion (w, x, y, z)
  std::optional<Eigen::Vector3d> gt_translation;
  double noise_sigma = 0.0;
  int crop_keep = 0;
  std::uint64_t seed = 0;

  bool has_gt() const { return gt_rotation.has_value() && gt_translation.has_value(); }
  RigidTransform gt() const;
};

struct Manifest {
  std::filesystem::path root;
  DataConfig data;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(Split s) const;
};

/// Writes cloud files and manifest.json under `out_dir`. Byte-identical for equal inputs.
Manifest generate_dataset(const Config& cfg, const std::filesystem::path& out_dir);

Manifest load_manifest(const std::filesystem::path& path_or_dir);
std::string manifest_json(const Manifest& m);

struct LoadedPair {
  const ManifestEntry* entry;
  PointCloud source;
  PointCloud target;
};
LoadedPair load_pair(const Manifest& m, const ManifestEntry& e);

}  // namespace ifnet::data
