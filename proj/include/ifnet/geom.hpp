#pragma once

#include "ifnet/autodiff.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ifnet::geom {

using Index = Eigen::Index;

/// Ordered set of N 3D points stored as an N x 3 matrix. Coordinates are always finite.
class PointCloud {
 public:
  PointCloud() : points_(0, 3) {}
  explicit PointCloud(Eigen::MatrixXd points);

  Index size() const { return points_.rows(); }
  bool empty() const { return points_.rows() == 0; }
  const Eigen::MatrixXd& points() const { return points_; }
  Eigen::Vector3d point(Index i) const { return points_.row(i).transpose(); }

  Eigen::Vector3d centroid() const;
  /// Largest distance from the centroid.
  double radius() const;

  bool operator==(const PointCloud& other) const { return points_ == other.points_; }

 private:
  Eigen::MatrixXd points_;
};

/// Rotation in SO(3) plus translation; maps p to rotation * p + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  RigidTransform inverse() const;
  /// Orthonormality and det(R) = +1 within `tol`.
  bool is_valid(double tol = 1e-6) const;

  Eigen::Quaterniond quaternion() const;
  static RigidTransform from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& t);
};

/// N x k neighbour table, row-major.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  NeighborIndex(Index rows, Index k) : rows_(rows), k_(k), data_(static_cast<std::size_t>(rows * k)) {}

  Index rows() const { return rows_; }
  Index k() const { return k_; }
  Index operator()(Index i, Index j) const { return data_[static_cast<std::size_t>(i * k_ + j)]; }
  Index& operator()(Index i, Index j) { return data_[static_cast<std::size_t>(i * k_ + j)]; }
  /// Row-major flattening, length rows * k; suitable for ad::gather_rows.
  const std::vector<Index>& flat() const { return data_; }
  /// Each row index repeated k times, aligned with flat().
  std::vector<Index> repeated_rows() const;

 private:
  Index rows_ = 0;
  Index k_ = 0;
  std::vector<Index> data_;
};

/// k nearest rows of `reference` for every row of `query` (any width), nearest first,
/// ties broken by smaller index. With `exclude_self`, row i of the query never selects
/// reference row i (query and reference must then be the same set).
NeighborIndex knn_rows(const Eigen::MatrixXd& query, const Eigen::MatrixXd& reference, Index k,
                       bool exclude_self);

NeighborIndex knn_indices(const PointCloud& query, const PointCloud& reference, Index k);
/// Self-neighbourhood: the query point itself is excluded.
NeighborIndex knn_self(const PointCloud& cloud, Index k);

inline constexpr Index kDescriptorWidth = 14;

/// Per-point [p, edge1, edge2, |edge1|, |edge2|, edge1 x edge2] over the two nearest
/// neighbours (nearest first). Returns N x 14.
Eigen::MatrixXd geometry_descriptor(const PointCloud& cloud);
/// Differentiable form: `points` is N x 3, `nearest_two` is knn_self(points, 2).
ad::Var geometry_descriptor(ad::Var points, const NeighborIndex& nearest_two);

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
/// Result applies `inner` first, then `outer`.
RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner);

/// Intrinsic Z-Y-X Euler angles in degrees: R = Rz(z) * Ry(y) * Rx(x).
Eigen::Matrix3d rotation_from_euler_zyx(double z_deg, double y_deg, double x_deg);
/// Returns (z, y, x) in degrees with y in [-90, 90].
Eigen::Vector3d euler_zyx_from_rotation(const Eigen::Matrix3d& r);
/// Geodesic rotation angle of R, degrees.
double rotation_angle_deg(const Eigen::Matrix3d& r);

/// Three Euler angles uniform in [0, max_angle_deg], translation components uniform in
/// [-max_translation, max_translation]. Deterministic in `seed`.
RigidTransform sample_rigid_transform(std::uint64_t seed, double max_angle_deg = 45.0,
                                      double max_translation = 0.5);

/// Keeps the `keep` points closest to a far point placed along a random unit direction
/// at twice the cloud radius from the centroid. Retained points keep their input order.
PointCloud crop_partial(const PointCloud& cloud, Index keep, std::uint64_t seed);
Eigen::Vector3d crop_far_point(const PointCloud& cloud, std::uint64_t seed);
PointCloud crop_toward(const PointCloud& cloud, Index keep, const Eigen::Vector3d& far_point);

/// Adds per-coordinate Gaussian noise N(0, sigma^2) clipped to [-clip, clip].
PointCloud add_noise(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed);

/// Centres at the centroid and scales to unit maximum radius.
PointCloud normalize(const PointCloud& cloud);

/// Plain text: one point per line, "x y z", shortest round-trip decimal notation, LF.
PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud);
std::string format_cloud(const PointCloud& cloud);
PointCloud parse_cloud(const std::string& text);

/// Deterministic sub-seed for stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace ifnet::geom
