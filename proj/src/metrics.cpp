#include "ifnet/metrics.hpp"

#include <cmath>

namespace ifnet::metrics {

namespace {

constexpr double kGimbalTol = 1e-6;

double wrap_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a <= -180.0) a += 360.0;
  if (a > 180.0) a -= 360.0;
  return a;
}

bool near_gimbal(const Eigen::Vector3d& zyx) { return std::abs(std::abs(zyx[1]) - 90.0) < kGimbalTol; }

}  // namespace

std::optional<Eigen::Vector3d> rotation_errors(const Eigen::Matrix3d& r_pred, const Eigen::Matrix3d& r_gt) {
  const Eigen::Vector3d pred = geom::euler_zyx_from_rotation(r_pred);
  const Eigen::Vector3d gt = geom::euler_zyx_from_rotation(r_gt);
  if (near_gimbal(pred) || near_gimbal(gt)) return std::nullopt;
  Eigen::Vector3d out;
  for (int a = 0; a < 3; ++a) out[a] = wrap_deg(pred[a] - gt[a]);
  return out;
}

PairRecord score_pair(const std::string& id, const geom::RigidTransform& pred, const geom::RigidTransform& gt) {
  PairRecord rec;
  rec.id = id;
  rec.has_gt = true;
  const auto res = rotation_errors(pred.rotation, gt.rotation);
  rec.gimbal = !res.has_value();
  if (res) rec.rotation_residual = *res;
  rec.translation_residual = pred.translation - gt.translation;
  rec.gt_angle_deg = geom::rotation_angle_deg(gt.rotation);
  rec.geodesic_error_deg = geom::rotation_angle_deg(pred.rotation.transpose() * gt.rotation);
  return rec;
}

Summary aggregate(std::span<const PairRecord> records) {
  Summary s;
  double r_abs = 0.0, r_sq = 0.0, t_abs = 0.0, t_sq = 0.0;
  int r_count = 0, t_count = 0;
  for (const PairRecord& rec : records) {
    if (!rec.has_gt) continue;
    ++s.pairs;
    if (rec.gimbal) {
      ++s.gimbal_excluded;
    } else {
      r_abs += rec.rotation_residual.cwiseAbs().sum();
      r_sq += rec.rotation_residual.squaredNorm();
      r_count += 3;
    }
    t_abs += rec.translation_residual.cwiseAbs().sum();
    t_sq += rec.translation_residual.squaredNorm();
    t_count += 3;
  }
  if (r_count > 0) {
    s.mae_r = r_abs / r_count;
    s.rmse_r = std::sqrt(r_sq / r_count);
  }
  if (t_count > 0) {
    s.mae_t = t_abs / t_count;
    s.rmse_t = std::sqrt(t_sq / t_count);
  }
  return s;
}

}  // namespace ifnet::metrics
