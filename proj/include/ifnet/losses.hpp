#pragma once

#include "ifnet/autodiff.hpp"
#include "ifnet/geom.hpp"

#include <span>
#include <vector>

namespace ifnet::losses {

struct LossValues {
  double gr = 0.0;
  double nc = 0.0;
  double pc = 0.0;
  double total = 0.0;
};

/// sum_x huber(min_y ||x - y||^2) + sum_y huber(min_x ||y - x||^2).
ad::Var global_registration_loss(ad::Var transformed_source, ad::Var target, double huber_delta);

/// sum over overlap rows i, sum_j ||R p_j + t - q_j|| where p_j is the j-th nearest
/// neighbour of x_i in `source` (self excluded). The q_j are the j-th nearest neighbours
/// of the pseudo-target row y_i: inside `pseudo` with y_i excluded when `true_target` is
/// not given, otherwise inside `*true_target`. `rotation` is 3x3, `translation` 1x3.
ad::Var neighborhood_consistency_loss(ad::Var source, ad::Var pseudo, const std::vector<geom::Index>& overlap_rows,
                                      ad::Var rotation, ad::Var translation, geom::Index k,
                                      const ad::Var* true_target = nullptr);

/// -(1/|rows|) sum_i log M(i, argmax_j M(i, j)); the argmax is held constant.
ad::Var pseudo_consistency_loss(ad::Var matching, const std::vector<geom::Index>& overlap_rows);

/// Unweighted sum of gr + nc + pc over every pass.
double total_loss(std::span<const LossValues> passes);

}  // namespace ifnet::losses
