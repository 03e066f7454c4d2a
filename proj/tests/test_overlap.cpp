#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ifnet/errors.hpp"
#include "ifnet/overlap.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ifnet;
using namespace ifnet::overlap;
using support::Mat;

namespace {

oracle::Neighbours to_lists(const geom::NeighborIndex& nn) {
  oracle::Neighbours out(static_cast<std::size_t>(nn.rows()));
  for (geom::Index i = 0; i < nn.rows(); ++i) {
    for (geom::Index j = 0; j < nn.k(); ++j) out[static_cast<std::size_t>(i)].push_back(static_cast<int>(nn(i, j)));
  }
  return out;
}

struct Heads {
  Mat wv, bv, wu, bu, wf, bf;
};

Heads random_heads(std::mt19937_64& rng, int r) {
  return {support::random_matrix(rng, 3, r), support::random_matrix(rng, 1, r), support::random_matrix(rng, r, 1),
          support::random_matrix(rng, 1, 1), support::random_matrix(rng, r, 1), support::random_matrix(rng, 1, 1)};
}

struct Chain {
  Mat reliability, tau, weights;
};

Chain run(const Mat& x, const Mat& yp, const geom::NeighborIndex& nn, const Heads& h) {
  ad::Tape t(false);
  const ad::Var dr = reliability_difference(t.constant(x), t.constant(yp), nn, {t.constant(h.wv), t.constant(h.bv)});
  const ad::Var tau = attention_coeffs(dr, {t.constant(h.wu), t.constant(h.bu)}, nn.k());
  const ad::Var w = overlap_weights(dr, tau, {t.constant(h.wf), t.constant(h.bf)}, nn.k());
  return {dr.value(), tau.value(), w.value()};
}

}  // namespace

TEST_CASE("reliability difference vanishes for identical or translated pseudo targets") {
  std::mt19937_64 rng(3);
  const Mat x = support::random_matrix(rng, 8, 3);
  const auto nn = geom::knn_self(geom::PointCloud(x), 3);
  const Heads h = random_heads(rng, 4);
  CHECK(run(x, x, nn, h).reliability.cwiseAbs().maxCoeff() == 0.0);
  const Mat shifted = x.rowwise() + Eigen::RowVector3d(0.3, -1.2, 2.0);
  const Chain c = run(x, shifted, nn, h);
  CHECK(c.reliability.cwiseAbs().maxCoeff() < 1e-12);
  // A zero reliability sum maps every weight to the same value, 1 - tanh|f(0)|.
  CHECK((c.weights.array() - (1.0 - std::tanh(std::abs(h.bf(0, 0))))).abs().maxCoeff() < 1e-12);
}

TEST_CASE("attention is uniform on zero reliability and always normalised") {
  std::mt19937_64 rng(5);
  const Mat x = support::random_matrix(rng, 6, 3);
  const auto nn = geom::knn_self(geom::PointCloud(x), 2);
  const Heads h = random_heads(rng, 3);
  const Chain zero = run(x, x, nn, h);
  CHECK((zero.tau.array() - 0.5).abs().maxCoeff() < 1e-15);
  const Chain c = run(x, support::random_matrix(rng, 6, 3), nn, h);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(c.tau(2 * i, 0) + c.tau(2 * i + 1, 0) - 1.0) < 1e-6);
}

TEST_CASE("overlap weights examples") {
  std::mt19937_64 rng(7);
  const Mat x = support::random_matrix(rng, 6, 3);
  const auto nn = geom::knn_self(geom::PointCloud(x), 2);
  Heads h = random_heads(rng, 3);
  h.bf.setZero();
  CHECK(run(x, x, nn, h).weights == Mat::Ones(6, 1));

  ad::Tape t(false);
  const ad::Var w = overlap_weights(t.constant(Mat::Constant(1, 1, 0.5)), t.constant(Mat::Ones(1, 1)),
                                    {t.constant(Mat::Ones(1, 1)), t.constant(Mat::Zero(1, 1))}, 1);
  CHECK(w.scalar() == doctest::Approx(1.0 - std::tanh(0.5)).epsilon(1e-15));
  CHECK(w.scalar() == doctest::Approx(0.5379).epsilon(1e-4));

  for (int trial = 0; trial < 50; ++trial) {
    const Heads big{support::random_matrix(rng, 3, 3, -20, 20), support::random_matrix(rng, 1, 3),
                    support::random_matrix(rng, 3, 1, -20, 20), support::random_matrix(rng, 1, 1),
                    support::random_matrix(rng, 3, 1, -50, 50), support::random_matrix(rng, 1, 1)};
    const Mat ws = run(x, support::random_matrix(rng, 6, 3, -5, 5), nn, big).weights;
    CHECK(ws.minCoeff() > 0.0);
    CHECK(ws.maxCoeff() <= 1.0);
  }
}

TEST_CASE("overlap chain equals the per-edge oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3 + trial % 4, k = 1 + trial % 2;
    const Mat x = support::random_matrix(rng, n, 3), yp = support::random_matrix(rng, n, 3);
    const auto nn = geom::knn_self(geom::PointCloud(x), k);
    const Heads h = random_heads(rng, 3);
    const Chain c = run(x, yp, nn, h);
    const oracle::OverlapOut ref = oracle::overlap(x, yp, to_lists(nn), h.wv, h.bv, h.wu, h.bu, h.wf, h.bf);
    CHECK((c.reliability - ref.reliability).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < n; ++i) {
      for (int kk = 0; kk < k; ++kk) CHECK(std::abs(c.tau(i * k + kk, 0) - ref.tau(i, kk)) < 1e-12);
    }
    CHECK((c.weights.col(0) - ref.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("reliability difference rejects mismatched rows") {
  ad::Tape t(false);
  std::mt19937_64 rng(13);
  const Mat x = support::random_matrix(rng, 5, 3);
  const auto nn = geom::knn_self(geom::PointCloud(x), 2);
  CHECK_THROWS_AS(reliability_difference(t.constant(x), t.constant(Mat::Zero(4, 3)), nn,
                                         {t.constant(Mat::Zero(3, 2)), t.constant(Mat::Zero(1, 2))}),
                  ParameterError);
}

TEST_CASE("top-k overlap selection") {
  Eigen::VectorXd w(5);
  w << 0.2, 0.9, 0.2, 0.5, 0.9;
  CHECK(top_k_overlap(w, 5) == std::vector<geom::Index>{1, 4, 3, 0, 2});
  Eigen::VectorXd hot = Eigen::VectorXd::Zero(6);
  hot(3) = 1.0;
  CHECK(top_k_overlap(hot, 1) == std::vector<geom::Index>{3});
  CHECK_THROWS_AS(top_k_overlap(w, 6), ParameterError);
  CHECK_THROWS_AS(top_k_overlap(w, 0), ParameterError);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd r = support::random_matrix(rng, 10, 1, 0.0, 1.0);
    const std::vector<geom::Index> got = top_k_overlap(r, 4);
    const std::vector<int> ref = oracle::top_k(r, 4);
    CHECK(std::equal(got.begin(), got.end(), ref.begin(), ref.end()));
  }
}

TEST_CASE("gradients of v, u and f match central differences") {
  std::mt19937_64 rng(19);
  const Mat x = support::random_matrix(rng, 5, 3), yp = support::random_matrix(rng, 5, 3);
  const auto nn = geom::knn_self(geom::PointCloud(x), 2);
  const Heads h = random_heads(rng, 3);
  const Mat probe = support::random_matrix(rng, 5, 1);
  const auto check = support::check_gradients(
      [&](ad::Tape& t, const std::vector<ad::Var>& in) {
        const ad::Var dr = reliability_difference(in[0], in[1], nn, {in[2], in[3]});
        const ad::Var tau = attention_coeffs(dr, {in[4], in[5]}, 2);
        return ad::sum(ad::mul(overlap_weights(dr, tau, {in[6], in[7]}, 2), t.constant(probe)));
      },
      {x, yp, h.wv, h.bv, h.wu, h.bu, h.wf, h.bf});
  CHECK(check.all_stable());
  for (std::size_t i = 0; i < check.relative_error.size(); ++i) {
    INFO("leaf " << i);
    CHECK(check.relative_error[i] < 1e-4);
  }
}

TEST_CASE("the |f| kink yields a finite zero subgradient") {
  std::mt19937_64 rng(23);
  const Mat x = support::random_matrix(rng, 5, 3);
  const auto nn = geom::knn_self(geom::PointCloud(x), 2);
  Heads h = random_heads(rng, 3);
  h.bf.setZero();
  ad::Tape t;
  const ad::Var wf = t.leaf(h.wf), bf = t.leaf(h.bf);
  const ad::Var dr = reliability_difference(t.constant(x), t.constant(x), nn, {t.constant(h.wv), t.constant(h.bv)});
  const ad::Var tau = attention_coeffs(dr, {t.constant(h.wu), t.constant(h.bu)}, 2);
  t.backward(ad::sum(overlap_weights(dr, tau, {wf, bf}, 2)));
  CHECK(t.grad(wf).allFinite());
  CHECK(t.grad(bf)(0, 0) == 0.0);
}
