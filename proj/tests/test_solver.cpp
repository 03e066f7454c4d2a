#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ifnet/errors.hpp"
#include "ifnet/solver.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ifnet;
using namespace ifnet::solver;
using support::Mat;

namespace {

double rotation_error_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return geom::rotation_angle_deg(a.transpose() * b);
}

}  // namespace

TEST_CASE("procrustes recovers identity and random transforms") {
  std::mt19937_64 rng(3);
  const PointCloud x = support::random_cloud(rng, 10);
  const Eigen::VectorXd uniform = Eigen::VectorXd::Ones(10);
  const RigidTransform id = weighted_procrustes(x, x, uniform);
  CHECK((id.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(id.translation.norm() < 1e-9);

  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud src = support::random_cloud(rng, 10);
    const RigidTransform t = support::random_transform(rng);
    const RigidTransform got = weighted_procrustes(src, geom::apply_transform(src, t), uniform);
    CHECK(rotation_error_deg(got.rotation, t.rotation) < 1e-6);
    CHECK((got.translation - t.translation).norm() < 1e-9);
    CHECK(got.is_valid());
  }
}

TEST_CASE("procrustes degeneracy errors report the rank") {
  std::mt19937_64 rng(5);
  const PointCloud x = support::random_cloud(rng, 6);
  Eigen::VectorXd one = Eigen::VectorXd::Zero(6);
  one(2) = 1.0;
  try {
    weighted_procrustes(x, x, one);
    FAIL("expected a degeneracy error");
  } catch (const DegeneracyError& e) {
    CHECK(e.rank() == 0);
  }
  Eigen::MatrixXd line(5, 3);
  for (int i = 0; i < 5; ++i) line.row(i) << i, 2.0 * i, -i;
  try {
    weighted_procrustes(PointCloud(line), PointCloud(line), Eigen::VectorXd::Ones(5));
    FAIL("expected a degeneracy error");
  } catch (const DegeneracyError& e) {
    CHECK(e.rank() == 1);
  }
  CHECK_THROWS_AS(weighted_procrustes(x, x, Eigen::VectorXd::Zero(6)), DegeneracyError);
  CHECK_THROWS_AS(weighted_procrustes(x, x, -Eigen::VectorXd::Ones(6)), ParameterError);
}

TEST_CASE("weighted procrustes agrees with the quaternion oracle and is scale invariant in the weights") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat x = support::random_matrix(rng, 12, 3);
    const Mat y = support::random_matrix(rng, 12, 3);
    const Eigen::VectorXd w = support::random_matrix(rng, 12, 1, 0.05, 1.0);
    const RigidTransform got = weighted_procrustes(PointCloud(x), PointCloud(y), w);
    const auto [r, t] = oracle::horn(x, y, w);
    CHECK((got.rotation - r).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((got.translation - t).cwiseAbs().maxCoeff() < 1e-9);

    const RigidTransform scaled = weighted_procrustes(PointCloud(x), PointCloud(y), 7.5 * w);
    CHECK((scaled.rotation - got.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((scaled.translation - got.translation).cwiseAbs().maxCoeff() < 1e-12);

    const RigidTransform equal = weighted_procrustes(PointCloud(x), PointCloud(y), Eigen::VectorXd::Constant(12, 0.3));
    const auto [ru, tu] = oracle::horn(x, y, Eigen::VectorXd::Ones(12));
    CHECK((equal.rotation - ru).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((equal.translation - tu).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("procrustes gradients match central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat x = support::random_matrix(rng, 6, 3);
    const RigidTransform t = support::random_transform(rng, 60.0);
    const Mat y = geom::apply_transform(PointCloud(x), t).points() + 0.2 * support::random_matrix(rng, 6, 3);
    const Mat w = support::random_matrix(rng, 6, 1, 0.2, 1.0);
    const Mat pr = support::random_matrix(rng, 3, 3), pt = support::random_matrix(rng, 1, 3);
    const auto check = support::check_gradients(
        [&](ad::Tape& tp, const std::vector<ad::Var>& in) {
          const TransformVars tv = weighted_procrustes(in[0], in[1], in[2]);
          return ad::add(ad::sum(ad::mul(tv.rotation, tp.constant(pr))), ad::sum(ad::mul(tv.translation, tp.constant(pt))));
        },
        {x, y, w});
    CHECK(check.all_stable());
    CHECK(check.worst() < 1e-6);
  }
}

TEST_CASE("a degenerate spectrum stops the rotation gradient and is counted") {
  ad::Tape t;
  Mat a = Mat::Identity(3, 3);
  a(2, 2) = -1.0;
  const ad::Var cov = t.leaf(a);
  const ad::Var r = procrustes_rotation(cov, 1e-6);
  CHECK(t.gradient_stops() == 1);
  t.backward(ad::sum(r));
  CHECK(t.grad(cov).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::Matrix3d(r.value()).determinant() == doctest::Approx(1.0));
}

TEST_CASE("frb_forward contracts") {
  std::mt19937_64 rng(13);
  PipelineConfig cfg = support::tiny_config();
  cfg.alpha = 30.0;
  const NetworkParameters params = init_parameters(cfg, 9);
  const Mat y = support::random_matrix(rng, 12, 3);
  ad::Tape t(false);
  const NetworkVars net = bind(t, params, false);
  features::FeedbackState state(cfg.iterations);
  const FrbOutput out = frb_forward(t.constant(y), t.constant(y), 0, state, net, cfg);
  const Mat m = out.matching.value();
  CHECK((m.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-6);
  CHECK(m.minCoeff() >= 0.0);
  CHECK(state.current_entries() == 2);
  state.advance();
  CHECK(state.previous(0, features::Side::kTarget).value() == out.target_features.value());
  // With X = Y the preliminary diagonal is zero; a large alpha makes every row peak there.
  for (int i = 0; i < 12; ++i) CHECK(m(i, i) > 0.99);
  CHECK(rotation_error_deg(to_rigid(out.increment).rotation, Eigen::Matrix3d::Identity()) < 5.0);
  const Mat w = out.weights.value();
  CHECK(w.minCoeff() > 0.0);
  CHECK(w.maxCoeff() <= 1.0);
}

TEST_CASE("registration result structure") {
  std::mt19937_64 rng(17);
  PipelineConfig cfg = support::tiny_config();
  const PointCloud x = support::random_cloud(rng, 16);
  const PointCloud y = geom::apply_transform(x, support::random_transform(rng, 30.0, 0.3));

  SUBCASE("single pass") {
    cfg.iterations = 1;
    cfg.time_steps = 1;
    const RegistrationResult r = ifnet_register(x, y, init_parameters(cfg, 1), cfg);
    REQUIRE(r.per_step.size() == 1);
    CHECK(r.final.rotation == r.per_step[0].increment.rotation);
    CHECK(r.final.translation == r.per_step[0].increment.translation);
  }
  SUBCASE("default unroll") {
    const NetworkParameters params = init_parameters(cfg, 2);
    const RegistrationResult r = ifnet_register(x, y, params, cfg);
    REQUIRE(r.per_step.size() == static_cast<std::size_t>(cfg.time_steps * cfg.iterations));
    CHECK(r.final.is_valid());
    RigidTransform acc;
    PointCloud moved = x;
    for (std::size_t i = 0; i < r.per_step.size(); ++i) {
      const StepRecord& s = r.per_step[i];
      CHECK(s.time_step == static_cast<int>(i) / cfg.iterations);
      CHECK(s.iteration == static_cast<int>(i) % cfg.iterations);
      CHECK(s.increment.is_valid());
      CHECK(std::abs(s.losses.total - (s.losses.gr + s.losses.nc + s.losses.pc)) < 1e-9);
      acc = geom::compose(s.increment, acc);
      moved = geom::apply_transform(moved, s.increment);
    }
    CHECK((acc.rotation - r.final.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((acc.translation - r.final.translation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((moved.points() - geom::apply_transform(x, r.final).points()).cwiseAbs().maxCoeff() < 1e-9);
    const RigidTransform last = r.through_time_step(cfg.time_steps - 1);
    CHECK((last.rotation - r.final.rotation).cwiseAbs().maxCoeff() < 1e-12);

    const RegistrationResult again = ifnet_register(x, y, params, cfg);
    CHECK(again.final.rotation == r.final.rotation);
    CHECK(again.final.translation == r.final.translation);
    for (std::size_t i = 0; i < r.per_step.size(); ++i) CHECK(again.per_step[i].matching == r.per_step[i].matching);
  }
  SUBCASE("restart mode composes within a time step only") {
    cfg.accumulate_across_steps = false;
    const RegistrationResult r = ifnet_register(x, y, init_parameters(cfg, 3), cfg);
    CHECK_FALSE(r.accumulated);
    RigidTransform step2;
    for (const StepRecord& s : r.per_step) {
      if (s.time_step == 2) step2 = geom::compose(s.increment, step2);
    }
    CHECK((r.final.rotation - step2.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.through_time_step(2).rotation - step2.rotation).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("with one time step the feedback parameters are inert") {
  std::mt19937_64 rng(19);
  PipelineConfig cfg = support::tiny_config();
  cfg.time_steps = 1;
  const PointCloud x = support::random_cloud(rng, 14);
  const PointCloud y = geom::apply_transform(x, support::random_transform(rng, 30.0, 0.3));
  const NetworkParameters params = init_parameters(cfg, 4);
  NetworkParameters perturbed = params;
  for (std::size_t b = 0; b < perturbed.blocks.size(); ++b) {
    perturbed.blocks[b].visit_feedback("", [&](const std::string&, ad::Matrix& m) {
      m = support::random_matrix(rng, m.rows(), m.cols(), -5.0, 5.0);
    });
  }
  const RegistrationResult a = ifnet_register(x, y, params, cfg);
  const RegistrationResult b = ifnet_register(x, y, perturbed, cfg);
  CHECK(a.final.rotation == b.final.rotation);
  CHECK(a.final.translation == b.final.translation);
}

TEST_CASE("unroll validates its inputs") {
  PipelineConfig cfg = support::tiny_config();
  const NetworkParameters params = init_parameters(cfg, 1);
  PipelineConfig other = cfg;
  other.iterations = 2;
  std::mt19937_64 rng(23);
  const PointCloud x = support::random_cloud(rng, 10);
  CHECK_THROWS_AS(ifnet_register(x, x, params, other), ParameterError);
  other = cfg;
  other.k_geo = 0;
  CHECK_THROWS_AS(ifnet_register(x, x, params, other), ParameterError);
}

TEST_CASE("ICP baseline behaviour") {
  std::mt19937_64 rng(29);
  const PointCloud x = support::random_cloud(rng, 60);
  const IcpResult same = icp_baseline(x, x);
  CHECK(same.iterations == 1);
  CHECK((same.transform.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);

  RigidTransform small;
  small.rotation = Eigen::AngleAxisd(5.0 * M_PI / 180.0, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  const IcpResult rec = icp_baseline(x, geom::apply_transform(x, small), 100);
  CHECK(rotation_error_deg(rec.transform.rotation, small.rotation) < 1e-4);

  // A box lattice is symmetric under a half turn about z, so ICP settles at the identity.
  Mat box(27, 3);
  int i = 0;
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      for (int c = -1; c <= 1; ++c) box.row(i++) << 2.0 * a, 1.0 * b, 0.5 * c;
    }
  }
  RigidTransform flip;
  flip.rotation = Eigen::AngleAxisd(M_PI, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const IcpResult wrong = icp_baseline(PointCloud(box), geom::apply_transform(PointCloud(box), flip));
  CHECK(wrong.mean_residual < 1e-9);
  CHECK(rotation_error_deg(wrong.transform.rotation, flip.rotation) > 170.0);
}
