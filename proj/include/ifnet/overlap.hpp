#pragma once

#include "ifnet/autodiff.hpp"
#include "ifnet/geom.hpp"
#include "ifnet/params.hpp"

#include <vector>

namespace ifnet::overlap {

/// D_r(i, k) = v(x_{nbr(i,k)} - x_i) - v(yp_{nbr(i,k)} - yp_i), with v(e) = silu(e W + b).
/// Both edge sets use the source neighbour table. Result is (N*K) x D_r.
ad::Var reliability_difference(ad::Var source, ad::Var pseudo, const geom::NeighborIndex& nbr, const LinearVar& v);

/// tau = softmax over each point's K neighbours of u(D_r(i, k)); returned as (N*K) x 1.
ad::Var attention_coeffs(ad::Var reliability, const LinearVar& u, geom::Index k);

/// weights_i = 1 - tanh(|f(sum_k tau(i,k) D_r(i,k))|), f linear to a scalar. N x 1, in (0, 1].
ad::Var overlap_weights(ad::Var reliability, ad::Var tau, const LinearVar& f, geom::Index k);

/// Rows of the k largest weights, largest first, ties to the smaller index.
std::vector<geom::Index> top_k_overlap(const Eigen::VectorXd& weights, geom::Index k);

}  // namespace ifnet::overlap
