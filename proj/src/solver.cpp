#include "ifnet/solver.hpp"

#include "ifnet/errors.hpp"
#include "ifnet/matching.hpp"
#include "ifnet/overlap.hpp"

#include <cmath>
#include <limits>

namespace ifnet::solver {

using ad::Matrix;
using geom::Index;

namespace {

struct KabschSolve {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d singular_values;
};

KabschSolve kabsch_rotation(const Eigen::Matrix3d& a) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return {svd.matrixU() * d * svd.matrixV().transpose(), svd.singularValues()};
}

int numerical_rank(const Eigen::Vector3d& s) {
  const double top = s.maxCoeff();
  if (!(top > 0.0)) return 0;
  int rank = 0;
  for (int i = 0; i < 3; ++i) rank += s[i] > 1e-9 * top ? 1 : 0;
  return rank;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace

ad::Var procrustes_rotation(ad::Var cross_covariance, double gradient_gap) {
  if (cross_covariance.rows() != 3 || cross_covariance.cols() != 3) {
    throw ParameterError("procrustes_rotation: expected a 3x3 cross-covariance");
  }
  const Eigen::Matrix3d a = cross_covariance.value();
  const KabschSolve solve = kabsch_rotation(a);
  const int rank = numerical_rank(solve.singular_values);
  if (rank < 2) {
    throw DegeneracyError("weighted Procrustes: cross-covariance has rank " + std::to_string(rank), rank);
  }
  // P = R^T A is symmetric at the optimum; K = tr(P) I - P governs the rotation's sensitivity.
  const Eigen::Matrix3d p = solve.rotation.transpose() * a;
  const Eigen::Matrix3d k = p.trace() * Eigen::Matrix3d::Identity() - 0.5 * (p + p.transpose());
  const double smallest = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(k, Eigen::EigenvaluesOnly).eigenvalues()[0];
  const bool stop = smallest < gradient_gap * solve.singular_values.maxCoeff();
  ad::Tape& tape = *cross_covariance.tape();
  if (stop) tape.note_gradient_stop();
  Matrix r = solve.rotation;
  if (stop) return tape.constant(std::move(r));
  return tape.record(std::move(r), {cross_covariance},
                     [cross_covariance, k](ad::Tape& tp, const Matrix& g, const Matrix& out) {
                       const Eigen::Matrix3d rot = out;
                       const Eigen::Matrix3d c = rot.transpose() * Eigen::Matrix3d(g);
                       const Eigen::Vector3d cv(c(2, 1) - c(1, 2), c(0, 2) - c(2, 0), c(1, 0) - c(0, 1));
                       const Eigen::Vector3d w = k.ldlt().solve(cv);
                       tp.accumulate(cross_covariance, rot * skew(w));
                     });
}

TransformVars weighted_procrustes(ad::Var source, ad::Var target, ad::Var weights, double gradient_gap) {
  if (source.rows() != target.rows() || source.cols() != 3 || target.cols() != 3) {
    throw ParameterError("weighted_procrustes: expected matching N x 3 point sets");
  }
  if (source.rows() < 3) throw ParameterError("weighted_procrustes: need at least 3 correspondences");
  if (weights.rows() != source.rows() || weights.cols() != 1) throw ParameterError("weighted_procrustes: weights must be N x 1");
  if ((weights.value().array() < 0.0).any()) throw ParameterError("weighted_procrustes: negative weight");
  ad::Var total = ad::sum(weights);
  if (!(total.scalar() > 0.0)) throw DegeneracyError("weighted Procrustes: weights sum to zero", 0);
  ad::Var wt = ad::transpose(weights);
  ad::Var cx = ad::div_scalar(ad::matmul(wt, source), total);
  ad::Var cy = ad::div_scalar(ad::matmul(wt, target), total);
  ad::Var xc = ad::sub_row(source, cx);
  ad::Var yc = ad::sub_row(target, cy);
  ad::Var cov = ad::matmul(ad::transpose(ad::mul_col(yc, weights)), xc);
  ad::Var rot = procrustes_rotation(cov, gradient_gap);
  ad::Var trans = ad::sub(cy, ad::matmul(cx, ad::transpose(rot)));
  return {rot, trans};
}

RigidTransform weighted_procrustes(const PointCloud& source, const PointCloud& target, const Eigen::VectorXd& weights) {
  ad::Tape tape(false);
  TransformVars t = weighted_procrustes(tape.constant(source.points()), tape.constant(target.points()),
                                        tape.constant(weights), 1e-6);
  return to_rigid(t);
}

ad::Var apply(const TransformVars& t, ad::Var points) {
  return ad::add_row(ad::matmul(points, ad::transpose(t.rotation)), t.translation);
}

TransformVars compose(const TransformVars& outer, const TransformVars& inner) {
  return {ad::matmul(outer.rotation, inner.rotation), apply(outer, inner.translation)};
}

RigidTransform to_rigid(const TransformVars& t) {
  RigidTransform out;
  out.rotation = t.rotation.value();
  out.translation = t.translation.value().transpose();
  return out;
}

TransformVars identity_on(ad::Tape& tape) {
  return {tape.constant(Matrix::Identity(3, 3)), tape.constant(Matrix::Zero(1, 3))};
}

FrbOutput frb_forward(ad::Var current, ad::Var target, int block, features::FeedbackState& state,
                      const NetworkVars& net, const PipelineConfig& cfg) {
  const features::BlockFeatures feats = features::block_features(current, target, state, block, net, cfg);
  state.write(block, features::Side::kSource, feats.source);
  state.write(block, features::Side::kTarget, feats.target);

  const geom::PointCloud src(current.value());
  const geom::PointCloud tgt(target.value());
  ad::Var preliminary = matching::preliminary_matrix(feats.source, feats.target);
  ad::Var score = matching::neighbor_score(preliminary, geom::knn_self(src, cfg.k_match), geom::knn_self(tgt, cfg.k_match));
  ad::Var m = matching::matching_matrix(matching::scaled_score(score, preliminary, cfg.alpha));
  ad::Var pseudo = matching::pseudo_target(m, target);

  const BlockVars& weights = net.blocks[static_cast<std::size_t>(block)];
  const geom::NeighborIndex nbr = geom::knn_self(src, cfg.k_overlap);
  ad::Var reliability = overlap::reliability_difference(current, pseudo, nbr, weights.reliability);
  ad::Var tau = overlap::attention_coeffs(reliability, weights.attention, cfg.k_overlap);
  ad::Var w = overlap::overlap_weights(reliability, tau, weights.overlap, cfg.k_overlap);

  FrbOutput out;
  out.increment = weighted_procrustes(current, pseudo, w, cfg.rotation_gradient_gap);
  out.source_features = feats.source;
  out.target_features = feats.target;
  out.matching = m;
  out.pseudo = pseudo;
  out.weights = w;
  return out;
}

Unrolled unroll(ad::Var source, ad::Var target, const NetworkVars& net, const PipelineConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(net.blocks.size()) != cfg.iterations) {
    throw ParameterError("unroll: parameter blocks (" + std::to_string(net.blocks.size()) +
                         ") do not match iterations (" + std::to_string(cfg.iterations) + ")");
  }
  if (source.rows() < 3 || target.rows() < 3) throw ParameterError("unroll: need at least 3 points per cloud");
  ad::Tape& tape = *source.tape();
  features::FeedbackState state(cfg.iterations);
  Unrolled out;
  TransformVars composed = identity_on(tape);
  const Index n = source.rows();
  const Index top_k = cfg.loss.top_k > 0 ? std::min<Index>(cfg.loss.top_k, n) : (n + 1) / 2;
  ad::Var zero = tape.constant(Matrix::Zero(1, 1));
  ad::Var loss = zero;

  for (int s = 0; s < cfg.time_steps; ++s) {
    if (!cfg.accumulate_across_steps) composed = identity_on(tape);
    for (int it = 0; it < cfg.iterations; ++it) {
      ad::Var current = apply(composed, source);
      PassVars pass;
      pass.time_step = s;
      pass.iteration = it;
      pass.frb = frb_forward(current, target, it, state, net, cfg);
      composed = compose(pass.frb.increment, composed);
      pass.composed = composed;

      pass.gr = cfg.loss.use_global
                    ? losses::global_registration_loss(apply(composed, source), target, cfg.loss.huber_delta)
                    : zero;
      const std::vector<Index> rows = overlap::top_k_overlap(pass.frb.weights.value().col(0), top_k);
      pass.nc = cfg.loss.use_neighborhood
                    ? losses::neighborhood_consistency_loss(
                          current, pass.frb.pseudo, rows, pass.frb.increment.rotation, pass.frb.increment.translation,
                          cfg.loss.k_consistency,
                          cfg.loss.consistency_target == ConsistencyTarget::kTrueTarget ? &target : nullptr)
                    : zero;
      pass.pc = cfg.loss.use_pseudo ? losses::pseudo_consistency_loss(pass.frb.matching, rows) : zero;
      pass.total = ad::add(ad::add(pass.gr, pass.nc), pass.pc);
      loss = ad::add(loss, pass.total);
      out.passes.push_back(std::move(pass));
    }
    state.advance();
  }
  out.final = composed;
  out.loss = loss;
  return out;
}

RigidTransform RegistrationResult::through_time_step(int time_step) const {
  RigidTransform t;
  for (const StepRecord& rec : per_step) {
    if (rec.time_step > time_step) break;
    if (!accumulated && rec.iteration == 0) t = RigidTransform::identity();
    t = geom::compose(rec.increment, t);
  }
  return t;
}

RegistrationResult summarize(const Unrolled& unrolled, const ad::Tape& tape) {
  RegistrationResult out;
  out.final = to_rigid(unrolled.final);
  for (const PassVars& p : unrolled.passes) {
    StepRecord rec;
    rec.time_step = p.time_step;
    rec.iteration = p.iteration;
    rec.increment = to_rigid(p.frb.increment);
    rec.matching = p.frb.matching.value();
    rec.weights = p.frb.weights.value().col(0);
    rec.losses.gr = p.gr.scalar();
    rec.losses.nc = p.nc.scalar();
    rec.losses.pc = p.pc.scalar();
    rec.losses.total = rec.losses.gr + rec.losses.nc + rec.losses.pc;
    out.per_step.push_back(std::move(rec));
  }
  out.gradient_stops = tape.gradient_stops();
  return out;
}

RegistrationResult ifnet_register(const PointCloud& source, const PointCloud& target, const NetworkParameters& params,
                                  const PipelineConfig& cfg) {
  ad::Tape tape(false);
  const NetworkVars net = bind(tape, params, false);
  const Unrolled u = unroll(tape.constant(source.points()), tape.constant(target.points()), net, cfg);
  RegistrationResult out = summarize(u, tape);
  out.accumulated = cfg.accumulate_across_steps;
  return out;
}

IcpResult icp_baseline(const PointCloud& source, const PointCloud& target, int max_iters, double tol) {
  if (max_iters < 1) throw ParameterError("icp: max_iters must be >= 1");
  if (source.size() < 3 || target.empty()) throw ParameterError("icp: need at least 3 source points");
  IcpResult out;
  double previous = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd uniform = Eigen::VectorXd::Ones(source.size());
  for (int it = 1; it <= max_iters; ++it) {
    const PointCloud moved = geom::apply_transform(source, out.transform);
    const geom::NeighborIndex nn = geom::knn_rows(moved.points(), target.points(), 1, false);
    Eigen::MatrixXd matched(source.size(), 3);
    for (Index i = 0; i < source.size(); ++i) matched.row(i) = target.points().row(nn(i, 0));
    const RigidTransform step = weighted_procrustes(moved, PointCloud(matched), uniform);
    out.transform = geom::compose(step, out.transform);
    out.iterations = it;
    const PointCloud after = geom::apply_transform(source, out.transform);
    out.mean_residual = (after.points() - matched).rowwise().norm().mean();
    if (out.mean_residual < tol || std::abs(previous - out.mean_residual) < tol) break;
    previous = out.mean_residual;
  }
  return out;
}

}  // namespace ifnet::solver
