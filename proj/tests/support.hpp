#pragma once
// Shared fixtures for the unit and acceptance tests: random instances and a
// central-difference gradient checker.

#include "ifnet/autodiff.hpp"
#include "ifnet/geom.hpp"
#include "ifnet/params.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace support {

using Mat = Eigen::MatrixXd;

inline Mat random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  }
  return m;
}

inline ifnet::geom::PointCloud random_cloud(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return ifnet::geom::PointCloud(random_matrix(rng, n, 3, -scale, scale));
}

/// Random rotation with geodesic angle up to max_deg about a uniformly random axis.
inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_deg = 180.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, max_deg * M_PI / 180.0);
  const Eigen::Vector3d axis = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
  return Eigen::AngleAxisd(u(rng), axis).toRotationMatrix();
}

inline ifnet::geom::RigidTransform random_transform(std::mt19937_64& rng, double max_deg = 180.0,
                                                    double max_t = 1.0) {
  ifnet::geom::RigidTransform t;
  t.rotation = random_rotation(rng, max_deg);
  t.translation = random_matrix(rng, 3, 1, -max_t, max_t);
  return t;
}

/// Smallest config whose every neighbourhood fits inside N = 6 points.
inline ifnet::PipelineConfig tiny_config() {
  ifnet::PipelineConfig cfg;
  cfg.k_geo = 3;
  cfg.k_feat = 3;
  cfg.k_match = 2;
  cfg.k_overlap = 2;
  cfg.feature_dim = 4;
  cfg.edge_widths = {4, 4};
  cfg.reliability_dim = 3;
  cfg.loss.k_consistency = 2;
  return cfg;
}

/// Per-leaf comparison of analytic and central-difference gradients.
struct GradientCheck {
  std::vector<double> relative_error;  // ||analytic - numeric|| / max(||analytic||, ||numeric||, floor)
  std::vector<bool> stable;            // numeric derivative agrees between h and h/2
  std::vector<double> analytic_norm, numeric_norm;
  double worst() const {
    double w = 0.0;
    for (double e : relative_error) w = std::max(w, e);
    return w;
  }
  bool all_stable() const {
    return std::all_of(stable.begin(), stable.end(), [](bool b) { return b; });
  }
};

using ScalarFn = std::function<ifnet::ad::Var(ifnet::ad::Tape&, const std::vector<ifnet::ad::Var>&)>;

inline double evaluate(const ScalarFn& fn, const std::vector<Mat>& values) {
  ifnet::ad::Tape tape(false);
  std::vector<ifnet::ad::Var> leaves;
  for (const Mat& v : values) leaves.push_back(tape.constant(v));
  return fn(tape, leaves).scalar();
}

/// Compares tape gradients of fn at `values` with central differences of step h. An entry is
/// flagged unstable when the h and h/2 estimates disagree, which happens when a perturbation
/// crosses an argmin, argmax, kNN or |.| switching point.
inline GradientCheck check_gradients(const ScalarFn& fn, const std::vector<Mat>& values, double h = 1e-6,
                                     double floor = 1e-7) {
  ifnet::ad::Tape tape;
  std::vector<ifnet::ad::Var> leaves;
  for (const Mat& v : values) leaves.push_back(tape.leaf(v));
  tape.backward(fn(tape, leaves));

  GradientCheck out;
  std::vector<Mat> probe = values;
  for (std::size_t l = 0; l < values.size(); ++l) {
    const Mat analytic = tape.grad(leaves[l]);
    Mat numeric(values[l].rows(), values[l].cols());
    bool stable = true;
    for (Eigen::Index i = 0; i < values[l].size(); ++i) {
      auto diff = [&](double step) {
        probe[l](i) = values[l](i) + step;
        const double fp = evaluate(fn, probe);
        probe[l](i) = values[l](i) - step;
        const double fm = evaluate(fn, probe);
        probe[l](i) = values[l](i);
        return (fp - fm) / (2.0 * step);
      };
      const double d1 = diff(h);
      const double d2 = diff(h / 2.0);
      if (std::abs(d1 - d2) > 1e-3 * std::max(1.0, std::abs(d1))) stable = false;
      numeric(i) = d1;
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), floor});
    out.relative_error.push_back((analytic - numeric).norm() / scale);
    out.stable.push_back(stable);
    out.analytic_norm.push_back(analytic.norm());
    out.numeric_norm.push_back(numeric.norm());
  }
  return out;
}

}  // namespace support
