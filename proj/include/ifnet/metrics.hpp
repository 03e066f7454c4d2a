#pragma once

#include "ifnet/geom.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ifnet::metrics {

/// Per-axis (z, y, x) Euler residuals in degrees, wrapped to (-180, 180].
/// Empty when either rotation sits within 1e-6 degrees of gimbal lock.
std::optional<Eigen::Vector3d> rotation_errors(const Eigen::Matrix3d& r_pred, const Eigen::Matrix3d& r_gt);

struct PairRecord {
  std::string id;
  bool has_gt = false;
  /// No rotation residual: gimbal-adjacent decomposition.
  bool gimbal = false;
  Eigen::Vector3d rotation_residual = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation_residual = Eigen::Vector3d::Zero();
  double gt_angle_deg = 0.0;
  double geodesic_error_deg = 0.0;
};

PairRecord score_pair(const std::string& id, const geom::RigidTransform& pred, const geom::RigidTransform& gt);

struct Summary {
  double rmse_r = 0.0;
  double mae_r = 0.0;
  double rmse_t = 0.0;
  double mae_t = 0.0;
  int pairs = 0;
  int gimbal_excluded = 0;
};

/// RMSE and MAE over every axis of every scored pair. Gimbal records contribute
/// translation only and are counted in gimbal_excluded. Pairs without gt are skipped.
Summary aggregate(std::span<const PairRecord> records);

}  // namespace ifnet::metrics
