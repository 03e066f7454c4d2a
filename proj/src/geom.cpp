#include "ifnet/geom.hpp"

#include "ifnet/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace ifnet::geom {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Matrix3d reorthonormalize(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    out = u * svd.matrixV().transpose();
  }
  return out;
}

}  // namespace

PointCloud::PointCloud(Eigen::MatrixXd points) : points_(std::move(points)) {
  if (points_.cols() != 3) throw ParameterError("PointCloud: expected N x 3 coordinates");
  if (!points_.allFinite()) throw ParameterError("PointCloud: non-finite coordinate");
}

Eigen::Vector3d PointCloud::centroid() const {
  if (empty()) throw ParameterError("PointCloud::centroid of an empty cloud");
  return points_.colwise().mean().transpose();
}

double PointCloud::radius() const {
  const Eigen::RowVector3d c = centroid().transpose();
  return (points_.rowwise() - c).rowwise().norm().maxCoeff();
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Eigen::Quaterniond RigidTransform::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  // Canonical hemisphere so that serialisation is unique.
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

RigidTransform RigidTransform::from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) {
  RigidTransform out;
  out.rotation = q.normalized().toRotationMatrix();
  out.translation = t;
  return out;
}

std::vector<Index> NeighborIndex::repeated_rows() const {
  std::vector<Index> out(data_.size());
  for (Index i = 0; i < rows_; ++i) {
    for (Index j = 0; j < k_; ++j) out[static_cast<std::size_t>(i * k_ + j)] = i;
  }
  return out;
}

NeighborIndex knn_rows(const Eigen::MatrixXd& query, const Eigen::MatrixXd& reference, Index k,
                       bool exclude_self) {
  if (query.cols() != reference.cols()) throw ParameterError("knn: query and reference widths differ");
  if (exclude_self && query.rows() != reference.rows()) {
    throw ParameterError("knn: self-neighbourhood requires query == reference");
  }
  const Index available = reference.rows() - (exclude_self ? 1 : 0);
  if (k <= 0 || k > available) {
    throw ParameterError("knn: k=" + std::to_string(k) + " out of range for " +
                         std::to_string(reference.rows()) + " reference rows");
  }
  NeighborIndex out(query.rows(), k);
  // Row-major copies keep the inner distance loop contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> q = query;
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ref = reference;
  std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(ref.rows()));
  for (Index i = 0; i < q.rows(); ++i) {
    std::size_t n = 0;
    for (Index j = 0; j < ref.rows(); ++j) {
      if (exclude_self && j == i) continue;
      cand[n++] = {(q.row(i) - ref.row(j)).squaredNorm(), j};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.begin() + static_cast<std::ptrdiff_t>(n));
    for (Index j = 0; j < k; ++j) out(i, j) = cand[static_cast<std::size_t>(j)].second;
  }
  return out;
}

NeighborIndex knn_indices(const PointCloud& query, const PointCloud& reference, Index k) {
  return knn_rows(query.points(), reference.points(), k, &query == &reference);
}

NeighborIndex knn_self(const PointCloud& cloud, Index k) { return knn_rows(cloud.points(), cloud.points(), k, true); }

Eigen::MatrixXd geometry_descriptor(const PointCloud& cloud) {
  if (cloud.size() < 3) throw ParameterError("geometry_descriptor: need at least 3 points");
  ad::Tape tape(false);
  return geometry_descriptor(tape.constant(cloud.points()), knn_self(cloud, 2)).value();
}

ad::Var geometry_descriptor(ad::Var points, const NeighborIndex& nearest_two) {
  if (points.rows() < 3 || points.cols() != 3) throw ParameterError("geometry_descriptor: need N >= 3 points");
  if (nearest_two.k() != 2 || nearest_two.rows() != points.rows()) {
    throw ParameterError("geometry_descriptor: expected an N x 2 neighbour table");
  }
  std::vector<Index> first(static_cast<std::size_t>(points.rows()));
  std::vector<Index> second(first.size());
  for (Index i = 0; i < points.rows(); ++i) {
    first[static_cast<std::size_t>(i)] = nearest_two(i, 0);
    second[static_cast<std::size_t>(i)] = nearest_two(i, 1);
  }
  ad::Var e1 = ad::sub(ad::gather_rows(points, first), points);
  ad::Var e2 = ad::sub(ad::gather_rows(points, second), points);
  ad::Var l1 = ad::row_norm(e1);
  ad::Var l2 = ad::row_norm(e2);
  ad::Var normal = ad::cross_rows(e1, e2);
  return ad::concat_cols({points, e1, e2, l1, l2, normal});
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  Eigen::MatrixXd out = cloud.points() * t.rotation.transpose();
  out.rowwise() += t.translation.transpose();
  return PointCloud(std::move(out));
}

RigidTransform compose(const RigidTransform& outer, const RigidTransform& inner) {
  RigidTransform out;
  out.rotation = outer.rotation * inner.rotation;
  out.translation = outer.rotation * inner.translation + outer.translation;
  const Eigen::Matrix3d drift = out.rotation.transpose() * out.rotation - Eigen::Matrix3d::Identity();
  if (drift.cwiseAbs().maxCoeff() > 1e-9) out.rotation = reorthonormalize(out.rotation);
  return out;
}

Eigen::Matrix3d rotation_from_euler_zyx(double z_deg, double y_deg, double x_deg) {
  return (Eigen::AngleAxisd(z_deg * kDeg, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(y_deg * kDeg, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(x_deg * kDeg, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Eigen::Vector3d euler_zyx_from_rotation(const Eigen::Matrix3d& r) {
  const double sy = std::clamp(-r(2, 0), -1.0, 1.0);
  const double y = std::asin(sy);
  double z = 0.0;
  double x = 0.0;
  if (std::abs(sy) < 1.0 - 1e-12) {
    z = std::atan2(r(1, 0), r(0, 0));
    x = std::atan2(r(2, 1), r(2, 2));
  } else {
    // Gimbal lock: only z - x (or z + x) is observable; put everything into z.
    z = std::atan2(-r(0, 1), r(1, 1));
  }
  return Eigen::Vector3d(z, y, x) / kDeg;
}

double rotation_angle_deg(const Eigen::Matrix3d& r) {
  // atan2 of sine and cosine stays accurate near 0 where acos of the trace loses half the digits.
  const double sine = 0.5 * Eigen::Vector3d(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)).norm();
  const double cosine = 0.5 * (r.trace() - 1.0);
  return std::atan2(sine, cosine) / kDeg;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RigidTransform sample_rigid_transform(std::uint64_t seed, double max_angle_deg, double max_translation) {
  if (!(max_angle_deg >= 0.0 && max_angle_deg <= 180.0)) {
    throw ParameterError("sample_rigid_transform: max_angle must lie in [0, 180] degrees");
  }
  if (!(max_translation >= 0.0)) throw ParameterError("sample_rigid_transform: max_translation must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double z = unit(rng) * max_angle_deg;
  const double y = unit(rng) * max_angle_deg;
  const double x = unit(rng) * max_angle_deg;
  RigidTransform out;
  out.rotation = rotation_from_euler_zyx(z, y, x);
  for (int c = 0; c < 3; ++c) out.translation[c] = (2.0 * unit(rng) - 1.0) * max_translation;
  return out;
}

Eigen::Vector3d crop_far_point(const PointCloud& cloud, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector3d dir;
  do {
    dir = Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
  } while (dir.norm() < 1e-12);
  dir.normalize();
  return cloud.centroid() + 2.0 * cloud.radius() * dir;
}

PointCloud crop_toward(const PointCloud& cloud, Index keep, const Eigen::Vector3d& far_point) {
  if (keep <= 0 || keep > cloud.size()) {
    throw ParameterError("crop: keep=" + std::to_string(keep) + " out of range for " +
                         std::to_string(cloud.size()) + " points");
  }
  std::vector<std::pair<double, Index>> order(static_cast<std::size_t>(cloud.size()));
  for (Index i = 0; i < cloud.size(); ++i) {
    order[static_cast<std::size_t>(i)] = {(cloud.point(i) - far_point).squaredNorm(), i};
  }
  std::partial_sort(order.begin(), order.begin() + keep, order.end());
  std::vector<Index> kept(static_cast<std::size_t>(keep));
  for (Index i = 0; i < keep; ++i) kept[static_cast<std::size_t>(i)] = order[static_cast<std::size_t>(i)].second;
  std::sort(kept.begin(), kept.end());
  Eigen::MatrixXd out(keep, 3);
  for (Index i = 0; i < keep; ++i) out.row(i) = cloud.points().row(kept[static_cast<std::size_t>(i)]);
  return PointCloud(std::move(out));
}

PointCloud crop_partial(const PointCloud& cloud, Index keep, std::uint64_t seed) {
  if (keep <= 0 || keep > cloud.size()) {
    throw ParameterError("crop_partial: keep must lie in [1, N]");
  }
  return crop_toward(cloud, keep, crop_far_point(cloud, seed));
}

PointCloud add_noise(const PointCloud& cloud, double sigma, double clip, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ParameterError("add_noise: sigma must be >= 0");
  if (!(clip > 0.0)) throw ParameterError("add_noise: clip must be > 0");
  if (sigma == 0.0) return cloud;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::MatrixXd out = cloud.points();
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index c = 0; c < 3; ++c) out(i, c) += std::clamp(gauss(rng), -clip, clip);
  }
  return PointCloud(std::move(out));
}

PointCloud normalize(const PointCloud& cloud) {
  const Eigen::RowVector3d c = cloud.centroid().transpose();
  Eigen::MatrixXd centred = cloud.points().rowwise() - c;
  const double r = centred.rowwise().norm().maxCoeff();
  if (r > 0.0) centred /= r;
  return PointCloud(std::move(centred));
}

std::string format_cloud(const PointCloud& cloud) {
  std::string out;
  out.reserve(static_cast<std::size_t>(cloud.size()) * 64);
  char buf[64];
  for (Index i = 0; i < cloud.size(); ++i) {
    for (Index c = 0; c < 3; ++c) {
      double v = cloud.points()(i, c);
      if (v == 0.0) v = 0.0;  // fold -0
      auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
      out.append(buf, res.ptr);
      out.push_back(c < 2 ? ' ' : '\n');
    }
  }
  return out;
}

PointCloud parse_cloud(const std::string& text) {
  std::vector<double> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const char* p = line.data();
    const char* last = line.data() + line.size();
    for (int c = 0; c < 3; ++c) {
      double v = 0.0;
      auto res = std::from_chars(p, last, v);
      if (res.ec != std::errc() || !std::isfinite(v)) throw ParseError("cloud: malformed coordinate", line_no);
      p = res.ptr;
      if (c < 2) {
        if (p == last || *p != ' ') throw ParseError("cloud: expected single-space separator", line_no);
        ++p;
      }
      values.push_back(v);
    }
    if (p != last) throw ParseError("cloud: trailing characters", line_no);
  }
  Eigen::MatrixXd pts(static_cast<Index>(values.size() / 3), 3);
  for (Index i = 0; i < pts.rows(); ++i) {
    for (Index c = 0; c < 3; ++c) pts(i, c) = values[static_cast<std::size_t>(3 * i + c)];
  }
  return PointCloud(std::move(pts));
}

PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open cloud file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_cloud(ss.str());
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write cloud file " + path.string());
  out << format_cloud(cloud);
  if (!out) throw std::runtime_error("failed writing cloud file " + path.string());
}

}  // namespace ifnet::geom
