#pragma once

#include "ifnet/autodiff.hpp"
#include "ifnet/geom.hpp"

namespace ifnet::matching {

/// M_P(i, j) = ||F_X[i] - F_Y[j]||_2 (distance-like: larger is a worse match).
ad::Var preliminary_matrix(ad::Var fx, ad::Var fy);

/// M_S(i, j) = (1/K) sum_k M_P(nbr_x(i, k), nbr_y(j, k)); the k-th neighbour of i
/// pairs with the k-th neighbour of j.
ad::Var neighbor_score(ad::Var preliminary, const geom::NeighborIndex& nbr_x, const geom::NeighborIndex& nbr_y);

/// M_S'(i, j) = exp(alpha - M_S(i, j)) * D(i, j).
ad::Var scaled_score(ad::Var score, ad::Var distance, double alpha);

/// Row-wise softmax of -M_S'. Every row sums to one.
ad::Var matching_matrix(ad::Var scaled);

/// Y_P = M * Y; row i is the soft correspondence of source point i.
ad::Var pseudo_target(ad::Var matching, ad::Var target);

}  // namespace ifnet::matching
