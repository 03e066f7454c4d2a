#pragma once

#include "ifnet/autodiff.hpp"
#include "ifnet/features.hpp"
#include "ifnet/geom.hpp"
#include "ifnet/losses.hpp"
#include "ifnet/params.hpp"

#include <vector>

namespace ifnet::solver {

using geom::PointCloud;
using geom::RigidTransform;

/// Rigid transform on the tape in row-vector form: p' = p * R^T + t.
struct TransformVars {
  ad::Var rotation;     // 3 x 3
  ad::Var translation;  // 1 x 3
};

/// Rotation maximising tr(R^T A) over SO(3). Backward uses the implicit-function gradient
/// of the polar factor; it is stopped (and counted on the tape) when the relative spectral
/// gap of tr(P) I - P, P = R^T A, falls below `gradient_gap`.
ad::Var procrustes_rotation(ad::Var cross_covariance, double gradient_gap);

/// Weighted Kabsch: minimises sum_i w_i ||R x_i + t - y_i||^2. Throws DegeneracyError
/// when the weighted cross-covariance has rank < 2.
TransformVars weighted_procrustes(ad::Var source, ad::Var target, ad::Var weights, double gradient_gap = 1e-6);
RigidTransform weighted_procrustes(const PointCloud& source, const PointCloud& target, const Eigen::VectorXd& weights);

/// Applies a tape transform to an N x 3 point matrix.
ad::Var apply(const TransformVars& t, ad::Var points);
/// outer after inner.
TransformVars compose(const TransformVars& outer, const TransformVars& inner);
RigidTransform to_rigid(const TransformVars& t);
TransformVars identity_on(ad::Tape& tape);

/// Everything one feedback registration block produces.
struct FrbOutput {
  TransformVars increment;
  ad::Var source_features;
  ad::Var target_features;
  ad::Var matching;  // N x M
  ad::Var pseudo;    // N x 3
  ad::Var weights;   // N x 1
};

/// One block: features -> matching -> pseudo target -> overlap -> weighted Procrustes.
/// `current` already carries every earlier increment. Writes this block's features into `state`.
FrbOutput frb_forward(ad::Var current, ad::Var target, int block, features::FeedbackState& state,
                      const NetworkVars& net, const PipelineConfig& cfg);

struct PassVars {
  int time_step = 0;
  int iteration = 0;
  FrbOutput frb;
  TransformVars composed;  // source -> target estimate after this pass
  ad::Var gr, nc, pc, total;
};

/// Differentiable unrolled pipeline over time steps x iterations.
struct Unrolled {
  std::vector<PassVars> passes;
  TransformVars final;
  ad::Var loss;  // sum over passes
};

Unrolled unroll(ad::Var source, ad::Var target, const NetworkVars& net, const PipelineConfig& cfg);

struct StepRecord {
  int time_step = 0;
  int iteration = 0;
  RigidTransform increment;
  Eigen::MatrixXd matching;
  Eigen::VectorXd weights;
  losses::LossValues losses;
};

struct RegistrationResult {
  RigidTransform final;
  std::vector<StepRecord> per_step;
  int gradient_stops = 0;
  /// Whether increments were composed across time steps or restarted per step.
  bool accumulated = true;

  /// Pose estimate after the last iteration of `time_step`.
  RigidTransform through_time_step(int time_step) const;
};

RegistrationResult summarize(const Unrolled& unrolled, const ad::Tape& tape);

RegistrationResult ifnet_register(const PointCloud& source, const PointCloud& target,
                                  const NetworkParameters& params, const PipelineConfig& cfg);

struct IcpResult {
  RigidTransform transform;
  int iterations = 0;
  double mean_residual = 0.0;
};

/// Point-to-point ICP from the identity: nearest neighbours, unweighted Procrustes, until the
/// mean residual falls below `tol`, changes by less than `tol`, or `max_iters` is reached.
IcpResult icp_baseline(const PointCloud& source, const PointCloud& target, int max_iters = 50, double tol = 1e-10);

}  // namespace ifnet::solver
