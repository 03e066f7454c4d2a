#pragma once

#include "ifnet/params.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ifnet {

enum class CropMode { kNone, kJoint, kIndependent };

struct DataConfig {
  int num_shapes = 200;
  /// Points sampled on each shape surface.
  int num_points = 256;
  /// Points kept by partial cropping; ignored when crop_mode is none.
  int crop_keep = 192;
  CropMode crop_mode = CropMode::kJoint;
  double max_angle_deg = 45.0;
  double max_translation = 0.5;
  /// 0 disables noise.
  double noise_sigma = 0.0;
  double noise_clip = 1.0;
  double train_fraction = 0.7;
  double val_fraction = 0.15;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 50;
  int batch_size = 1;
  /// Global gradient-norm clip; 0 disables.
  double gradient_clip = 0.0;
  /// Wall-clock budget; no epoch starts unless one as slow as the slowest so far still fits. 0 disables.
  double time_limit_seconds = 0.0;
  /// Validation pairs scored per epoch; 0 means the whole split.
  int val_pairs = 0;
};

struct EvalConfig {
  std::vector<int> sweep_points{300, 400, 500, 600, 700};
  std::vector<double> sweep_noise{0.6, 0.8, 1.0};
  /// Test shapes resampled per sweep setting.
  int sweep_pairs = 10;
  int icp_max_iterations = 50;
};

struct Config {
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;

  /// Throws ParameterError on any out-of-range field.
  void validate() const;
};

std::string to_json(const Config& cfg);
/// Missing keys keep their defaults; unknown keys and wrong types raise ParseError.
Config config_from_json(const std::string& text);
Config load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const Config& cfg);

}  // namespace ifnet
