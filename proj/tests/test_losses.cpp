#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ifnet/errors.hpp"
#include "ifnet/losses.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ifnet;
using namespace ifnet::losses;
using support::Mat;

namespace {

double gr(const Mat& x, const Mat& y, double delta) {
  ad::Tape t(false);
  return global_registration_loss(t.constant(x), t.constant(y), delta).scalar();
}

double nc(const Mat& x, const Mat& yp, const std::vector<geom::Index>& rows, const Eigen::Matrix3d& r,
          const Eigen::Vector3d& tr, int k) {
  ad::Tape t(false);
  return neighborhood_consistency_loss(t.constant(x), t.constant(yp), rows, t.constant(r), t.constant(tr.transpose()),
                                       k)
      .scalar();
}

double pc(const Mat& m, const std::vector<geom::Index>& rows) {
  ad::Tape t(false);
  return pseudo_consistency_loss(t.constant(m), rows).scalar();
}

Mat transformed(const Mat& x, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  return (x * r.transpose()).rowwise() + t.transpose();
}

}  // namespace

TEST_CASE("global registration loss examples") {
  std::mt19937_64 rng(3);
  const Mat y = support::random_matrix(rng, 7, 3);
  Mat shuffled = y;
  shuffled.row(0).swap(shuffled.row(4));
  CHECK(gr(shuffled, y, 0.1) == 0.0);

  Mat a = Mat::Zero(1, 3), b = Mat::Zero(1, 3);
  b(0, 0) = 0.1;
  CHECK(gr(a, b, 10.0) == doctest::Approx(0.0001).epsilon(1e-12));

  const Mat x = support::random_matrix(rng, 5, 3);
  CHECK(gr(x, y, 0.1) == doctest::Approx(gr(y, x, 0.1)).epsilon(1e-15));
  CHECK_THROWS_AS(gr(Mat::Zero(0, 3), y, 0.1), ParameterError);
}

TEST_CASE("global registration loss is invariant under a joint rigid motion") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat x = support::random_matrix(rng, 6, 3), y = support::random_matrix(rng, 5, 3);
    const auto t = support::random_transform(rng);
    CHECK(gr(transformed(x, t.rotation, t.translation), transformed(y, t.rotation, t.translation), 0.1) ==
          doctest::Approx(gr(x, y, 0.1)).epsilon(1e-10));
    CHECK(gr(x, y, 0.1) >= 0.0);
  }
}

TEST_CASE("neighbourhood consistency examples") {
  std::mt19937_64 rng(7);
  const Mat x = support::random_matrix(rng, 6, 3);
  const auto t = support::random_transform(rng);
  const Mat yp = transformed(x, t.rotation, t.translation);
  CHECK(nc(x, yp, {0, 2, 5}, t.rotation, t.translation, 3) < 1e-12);

  // Two points: each point's only other neighbour is the partner.
  Mat two(2, 3), two_y(2, 3);
  two << 0, 0, 0, 1, 0, 0;
  two_y << 0, 0, 0, 1, 0.4, 0;
  CHECK(nc(two, two_y, {0}, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), 1) == doctest::Approx(0.4));

  CHECK_THROWS_AS(nc(x, yp, {0}, t.rotation, t.translation, 6), ParameterError);
  CHECK_THROWS_AS(nc(x, yp, {}, t.rotation, t.translation, 2), ParameterError);
}

TEST_CASE("neighbourhood consistency with true-target neighbourhoods") {
  std::mt19937_64 rng(9);
  const Mat x = support::random_matrix(rng, 6, 3), yp = support::random_matrix(rng, 6, 3);
  const Mat y = support::random_matrix(rng, 8, 3);
  const Eigen::Matrix3d r = support::random_rotation(rng);
  const Eigen::Vector3d tr = support::random_matrix(rng, 3, 1);
  ad::Tape t(false);
  const ad::Var yv = t.constant(y);
  const double got = neighborhood_consistency_loss(t.constant(x), t.constant(yp), {1, 3}, t.constant(r),
                                                   t.constant(tr.transpose()), 2, &yv)
                         .scalar();
  const oracle::Neighbours nx = oracle::knn(x, x, 2, true);
  const oracle::Neighbours ny = oracle::knn(yp, y, 2, false);
  double expected = 0.0;
  for (int i : {1, 3}) {
    for (int j = 0; j < 2; ++j) {
      const Eigen::Vector3d p = x.row(nx[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]).transpose();
      const Eigen::Vector3d q = y.row(ny[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]).transpose();
      expected += (r * p + tr - q).norm();
    }
  }
  CHECK(got == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("pseudo consistency examples") {
  Mat onehot = Mat::Zero(3, 4);
  onehot(0, 2) = onehot(1, 0) = onehot(2, 3) = 1.0;
  CHECK(pc(onehot, {0, 1, 2}) == 0.0);
  CHECK(pc(Mat::Constant(2, 5, 0.2), {0, 1}) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  Mat two(2, 4);
  two << 0.5, 0.3, 0.1, 0.1, 0.25, 0.25, 0.25, 0.25;
  CHECK(pc(two, {0, 1}) == doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0).epsilon(1e-15));
  CHECK(pc(two, {0, 1}) == doctest::Approx(1.0397).epsilon(1e-4));
  CHECK_THROWS_AS(pc(two, {}), ParameterError);
}

TEST_CASE("pseudo consistency decreases when mass moves onto the argmax") {
  Mat m(2, 3);
  m << 0.5, 0.3, 0.2, 0.1, 0.6, 0.3;
  const double before = pc(m, {0, 1});
  Mat moved = m;
  moved(0, 0) += 0.1;
  moved(0, 1) -= 0.1;
  CHECK(pc(moved, {0, 1}) < before);
}

TEST_CASE("total loss examples") {
  CHECK(total_loss(std::vector<LossValues>{}) == 0.0);
  const LossValues one{0.25, 0.5, 0.125, 0.875};
  CHECK(total_loss(std::vector<LossValues>{one}) == one.total);
  CHECK(total_loss(std::vector<LossValues>{LossValues{}}) == 0.0);
  CHECK(total_loss(std::vector<LossValues>(9, LossValues{0.5, 0.25, 0.25, 1.0})) == 9.0);
}

TEST_CASE("losses equal their brute-force references and stay non-negative") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + trial % 4;
    const Mat x = support::random_matrix(rng, n, 3), y = support::random_matrix(rng, n + 1, 3);
    const Mat yp = support::random_matrix(rng, n, 3);
    const double delta = std::uniform_real_distribution<double>(0.05, 2.0)(rng);
    CHECK(std::abs(gr(x, y, delta) - oracle::global_loss(x, y, delta)) < 1e-9);

    const Eigen::Matrix3d r = support::random_rotation(rng);
    const Eigen::Vector3d tr = support::random_matrix(rng, 3, 1);
    const int k = 1 + trial % (n - 1);
    const Eigen::VectorXd w = support::random_matrix(rng, n, 1, 0.0, 1.0);
    const std::vector<int> top = oracle::top_k(w, (n + 1) / 2);
    const std::vector<geom::Index> rows(top.begin(), top.end());
    const double got_nc = nc(x, yp, rows, r, tr, k);
    CHECK(std::abs(got_nc - oracle::consistency_loss(x, yp, top, r, tr, k)) < 1e-9);

    Mat m = support::random_matrix(rng, n, n + 1, 0.01, 1.0);
    m = m.array().colwise() / m.rowwise().sum().array();
    CHECK(std::abs(pc(m, rows) - oracle::pseudo_loss(m, top)) < 1e-9);
    CHECK(got_nc >= 0.0);
    CHECK(pc(m, rows) >= 0.0);
  }
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(13);
  const Mat x = support::random_matrix(rng, 6, 3), y = support::random_matrix(rng, 5, 3);
  const auto gr_check = support::check_gradients(
      [](ad::Tape&, const std::vector<ad::Var>& in) { return global_registration_loss(in[0], in[1], 0.3); }, {x, y});
  CHECK(gr_check.all_stable());
  CHECK(gr_check.worst() < 1e-5);

  const Mat yp = support::random_matrix(rng, 6, 3);
  const Mat r = support::random_rotation(rng);
  const Mat tr = support::random_matrix(rng, 1, 3);
  const auto nc_check = support::check_gradients(
      [](ad::Tape&, const std::vector<ad::Var>& in) {
        return neighborhood_consistency_loss(in[0], in[1], {0, 2, 4}, in[2], in[3], 2);
      },
      {x, yp, r, tr});
  CHECK(nc_check.all_stable());
  CHECK(nc_check.worst() < 1e-5);

  Mat m = support::random_matrix(rng, 6, 5, 0.05, 1.0);
  m = m.array().colwise() / m.rowwise().sum().array();
  const auto pc_check = support::check_gradients(
      [](ad::Tape&, const std::vector<ad::Var>& in) { return pseudo_consistency_loss(in[0], {0, 1, 5}); }, {m});
  CHECK(pc_check.all_stable());
  CHECK(pc_check.worst() < 1e-5);
}
