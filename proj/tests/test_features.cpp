#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ifnet/errors.hpp"
#include "ifnet/features.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace ifnet;
using namespace ifnet::features;
using support::Mat;

namespace {

oracle::Neighbours to_lists(const geom::NeighborIndex& nn) {
  oracle::Neighbours out(static_cast<std::size_t>(nn.rows()));
  for (Index i = 0; i < nn.rows(); ++i) {
    for (Index j = 0; j < nn.k(); ++j) out[static_cast<std::size_t>(i)].push_back(static_cast<int>(nn(i, j)));
  }
  return out;
}

oracle::Mlp score_mlp(const BlockParameters& b) {
  return {b.score_hidden.weight, b.score_hidden.bias, b.score_out.weight, b.score_out.bias};
}

}  // namespace

TEST_CASE("single EdgeConv layer with identity weights equals a hand-rolled max over edges") {
  Mat pts(4, 3);
  pts << 0, 0, 0, 1, 0.2, 0, 0.1, 1.3, 0.4, 0.7, 0.5, 2.0;
  const geom::NeighborIndex graph = geom::knn_self(geom::PointCloud(pts), 2);
  ad::Tape t(false);
  LinearVar layer{t.constant(Mat::Identity(6, 6)), t.constant(Mat::Zero(1, 6))};
  const Mat out = edgeconv_layer(t.constant(pts), graph, layer).value();
  for (Index i = 0; i < 4; ++i) {
    for (int c = 0; c < 6; ++c) {
      double best = -1e300;
      for (Index j = 0; j < 2; ++j) {
        const double e = c < 3 ? pts(i, c) : pts(graph(i, j), c - 3) - pts(i, c - 3);
        best = std::max(best, oracle::silu(e));
      }
      CHECK(out(i, c) == doctest::Approx(best).epsilon(1e-15));
    }
  }
}

TEST_CASE("EdgeConv stack matches the concatenated-edge oracle") {
  std::mt19937_64 rng(7);
  const PipelineConfig cfg = support::tiny_config();
  const NetworkParameters params = init_parameters(cfg, 3);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat pts = support::random_matrix(rng, 9, 3);
    const geom::NeighborIndex graph = geom::knn_self(geom::PointCloud(pts), cfg.k_geo);
    ad::Tape t(false);
    const NetworkVars net = bind(t, params, false);
    const Mat got = edgeconv_features(t.constant(pts), graph, net.blocks[0].edge).value();
    Mat expected = pts;
    for (const auto& layer : params.blocks[0].edge) {
      expected = oracle::edgeconv_layer(expected, to_lists(graph), layer.weight, layer.bias);
    }
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("EdgeConv is permutation equivariant and deterministic") {
  std::mt19937_64 rng(9);
  PipelineConfig cfg = support::tiny_config();
  const NetworkParameters params = init_parameters(cfg, 5);
  const Mat pts = support::random_matrix(rng, 12, 3);
  std::vector<Index> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Mat permuted(12, 3);
  for (Index i = 0; i < 12; ++i) permuted.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);

  auto run = [&](const Mat& p) {
    ad::Tape t(false);
    const NetworkVars net = bind(t, params, false);
    return Mat(edgeconv_features(t.constant(p), geom::knn_self(geom::PointCloud(p), cfg.k_geo), net.blocks[0].edge)
                   .value());
  };
  const Mat a = run(pts);
  const Mat b = run(permuted);
  for (Index i = 0; i < 12; ++i) CHECK((b.row(i) - a.row(perm[static_cast<std::size_t>(i)])).norm() == 0.0);
  CHECK(run(pts) == a);
  CHECK(a.allFinite());
  CHECK(a.rows() == 12);
}

TEST_CASE("positional embedding examples") {
  std::mt19937_64 rng(13);
  const Mat gx = support::random_matrix(rng, 3, 14);
  const Mat proj = support::random_matrix(rng, 14, 4);
  ad::Tape t(false);

  const features::PositionalEmbedding same = positional_embedding(t.constant(gx), t.constant(gx), 1, t.constant(proj));
  CHECK(same.differences.value().cwiseAbs().maxCoeff() == 0.0);

  const Mat gy = support::random_matrix(rng, 3, 14);
  const features::PositionalEmbedding zero = positional_embedding(t.constant(gx), t.constant(gy), 2, t.constant(Mat::Zero(14, 4)));
  CHECK(zero.embedding.value().cwiseAbs().maxCoeff() == 0.0);

  const features::PositionalEmbedding pe = positional_embedding(t.constant(gx), t.constant(gy), 2, t.constant(proj));
  const oracle::Neighbours ref = oracle::knn(gx, oracle::stack(gx, gy), 2, false);
  CHECK(to_lists(pe.neighbors) == ref);
  CHECK((pe.embedding.value() - oracle::positional(gx, gy, 2, proj)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(positional_embedding(t.constant(gx), t.constant(gy), 7, t.constant(proj)), ParameterError);
}

TEST_CASE("feedback transformer matches the attention oracle") {
  std::mt19937_64 rng(17);
  PipelineConfig cfg = support::tiny_config();
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkParameters params = init_parameters(cfg, static_cast<std::uint64_t>(trial));
    const Mat low = support::random_matrix(rng, 5, 4);
    const Mat high = support::random_matrix(rng, 5, 4);
    const Mat pos = support::random_matrix(rng, 10, 4);
    ad::Tape t(false);
    const NetworkVars net = bind(t, params, false);
    const FeedbackOutput out = feedback_transformer(t.constant(low), t.constant(high), t.constant(pos), net.blocks[0], 2);
    CHECK((out.features.value() - oracle::feedback(low, high, pos, score_mlp(params.blocks[0]), 2))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    const Mat a = out.attention.value();
    for (Index i = 0; i < 5; ++i) {
      for (Index c = 0; c < 4; ++c) CHECK(std::abs(a(2 * i, c) + a(2 * i + 1, c) - 1.0) < 1e-6);
    }
    CHECK(out.features.value().allFinite());
  }
}

TEST_CASE("feedback transformer with k=1 on identical features keeps the low features") {
  std::mt19937_64 rng(19);
  const NetworkParameters params = init_parameters(support::tiny_config(), 1);
  const Mat low = support::random_matrix(rng, 5, 4);
  const Mat pos = support::random_matrix(rng, 5, 4);
  ad::Tape t(false);
  const NetworkVars net = bind(t, params, false);
  const FeedbackOutput out = feedback_transformer(t.constant(low), t.constant(low), t.constant(pos), net.blocks[0], 1);
  for (Index i = 0; i < 5; ++i) CHECK(out.fused(i, 0) == i);
  // Softmax over one neighbour is 1, so the output is the fused row plus its positional term.
  CHECK((out.features.value() - (low + pos)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("feedback transformer rejects mismatched widths") {
  const NetworkParameters params = init_parameters(support::tiny_config(), 1);
  ad::Tape t(false);
  const NetworkVars net = bind(t, params, false);
  CHECK_THROWS_AS(feedback_transformer(t.constant(Mat::Zero(5, 4)), t.constant(Mat::Zero(5, 3)),
                                       t.constant(Mat::Zero(10, 4)), net.blocks[0], 2),
                  ParameterError);
}

TEST_CASE("feature gradients match central differences for every parameter group") {
  std::mt19937_64 rng(23);
  const PipelineConfig cfg = support::tiny_config();
  const NetworkParameters params = init_parameters(cfg, 2);
  const BlockParameters& b = params.blocks[0];
  const Mat pts = support::random_matrix(rng, 6, 3);
  const Mat high = support::random_matrix(rng, 6, 4);
  const Mat gy = support::random_matrix(rng, 6, 14);
  const Mat probe = support::random_matrix(rng, 6, 4);
  const geom::NeighborIndex graph = geom::knn_self(geom::PointCloud(pts), cfg.k_geo);
  const geom::NeighborIndex two = geom::knn_self(geom::PointCloud(pts), 2);

  const auto check = support::check_gradients(
      [&](ad::Tape& t, const std::vector<ad::Var>& in) {
        BlockVars blk;
        blk.edge = {{in[0], in[1]}, {in[2], in[3]}, {in[4], in[5]}};
        blk.score_hidden = {in[6], in[7]};
        blk.score_out = {in[8], in[9]};
        blk.position = in[10];
        const ad::Var low = edgeconv_features(in[11], graph, blk.edge);
        const ad::Var gx = geom::geometry_descriptor(in[11], two);
        const ad::Var pos = positional_embedding(gx, t.constant(gy), 3, blk.position).embedding;
        return ad::sum(ad::mul(feedback_transformer(low, in[12], pos, blk, 3).features, t.constant(probe)));
      },
      {b.edge[0].weight, b.edge[0].bias, b.edge[1].weight, b.edge[1].bias, b.edge[2].weight, b.edge[2].bias,
       b.score_hidden.weight, b.score_hidden.bias, b.score_out.weight, b.score_out.bias, b.position, pts, high});
  CHECK(check.all_stable());
  for (std::size_t i = 0; i < check.relative_error.size(); ++i) {
    INFO("leaf " << i);
    CHECK(check.relative_error[i] < 1e-4);
  }
}

TEST_CASE("feedback state lifecycle") {
  ad::Tape t(false);
  FeedbackState s(2);
  CHECK(s.time_step() == 0);
  CHECK(s.previous_entries() == 0);
  CHECK_THROWS_AS(s.previous(0, Side::kTarget), InternalStateError);
  for (int b = 0; b < 2; ++b) {
    s.write(b, Side::kSource, t.constant(Mat::Zero(1, 1)));
    s.write(b, Side::kTarget, t.constant(Mat::Constant(1, 1, b)));
  }
  s.advance();
  CHECK(s.previous_entries() == 4);
  CHECK(s.current_entries() == 0);
  CHECK(s.previous(1, Side::kTarget).value()(0, 0) == 1.0);
  CHECK(feedback_source_block(0, 2) == 1);
  CHECK(feedback_source_block(1, 2) == 1);
  CHECK_THROWS_AS(s.write(2, Side::kSource, t.constant(Mat::Zero(1, 1))), ParameterError);
}

TEST_CASE("block features: raw at step 0, feedback on the source only afterwards") {
  std::mt19937_64 rng(29);
  PipelineConfig cfg = support::tiny_config();
  cfg.iterations = 2;
  const NetworkParameters params = init_parameters(cfg, 4);
  const Mat src = support::random_matrix(rng, 8, 3);
  const Mat tgt = support::random_matrix(rng, 7, 3);
  ad::Tape t(false);
  const NetworkVars net = bind(t, params, false);
  const ad::Var xs = t.constant(src), ys = t.constant(tgt);
  const ad::Var raw_x = edgeconv_features(xs, geom::knn_self(geom::PointCloud(src), cfg.k_geo), net.blocks[0].edge);
  const ad::Var raw_y = edgeconv_features(ys, geom::knn_self(geom::PointCloud(tgt), cfg.k_geo), net.blocks[0].edge);

  FeedbackState state(2);
  const BlockFeatures s0 = block_features(xs, ys, state, 0, net, cfg);
  CHECK(s0.source.value() == raw_x.value());
  CHECK(s0.target.value() == raw_y.value());

  // A step 1 without a stored entry is an internal-state error.
  FeedbackState empty(2);
  empty.advance();
  CHECK_THROWS_AS(block_features(xs, ys, empty, 0, net, cfg), InternalStateError);

  const Mat stored = support::random_matrix(rng, 7, 4);
  state.write(0, Side::kTarget, t.constant(support::random_matrix(rng, 7, 4)));
  state.write(1, Side::kTarget, t.constant(stored));
  state.advance();
  const BlockFeatures s1 = block_features(xs, ys, state, 0, net, cfg);
  CHECK(s1.target.value() == raw_y.value());

  const ad::Var gx = geom::geometry_descriptor(xs, geom::knn_self(geom::PointCloud(src), 2));
  const ad::Var gy = geom::geometry_descriptor(ys, geom::knn_self(geom::PointCloud(tgt), 2));
  const ad::Var pos = positional_embedding(gx, gy, cfg.k_feat, net.blocks[0].position).embedding;
  const Mat expected =
      feedback_transformer(raw_x, t.constant(stored), pos, net.blocks[0], cfg.k_feat).features.value();
  CHECK(s1.source.value() == expected);
}
