#include "ifnet/overlap.hpp"

#include "ifnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ifnet::overlap {

namespace {

ad::Var edge_encoding(ad::Var points, const geom::NeighborIndex& nbr, const LinearVar& v) {
  ad::Var edges = ad::sub(ad::gather_rows(points, nbr.flat()), ad::gather_rows(points, nbr.repeated_rows()));
  return ad::silu(ad::add_row(ad::matmul(edges, v.weight), v.bias));
}

// 1 - tanh(|s|) evaluated as 2 e^{-2|s|} / (1 + e^{-2|s|}) and floored at the smallest
// normal double so that weights stay strictly positive.
ad::Var complement_tanh_abs(ad::Var s) {
  ad::Matrix out = s.value().unaryExpr([](double x) {
    const double e = std::exp(-2.0 * std::abs(x));
    return std::max(2.0 * e / (1.0 + e), std::numeric_limits<double>::min());
  });
  return s.tape()->record(std::move(out), {s}, [s](ad::Tape& tp, const ad::Matrix& g, const ad::Matrix& w) {
    tp.accumulate_with(s, [&](ad::Matrix& gs) {
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double x = s.value()(i);
        const double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        // d/dx (1 - tanh|x|) = -sign(x) (1 - tanh^2|x|) = -sign(x) w (2 - w)
        gs(i) -= g(i) * sign * w(i) * (2.0 - w(i));
      }
    });
  });
}

}  // namespace

ad::Var reliability_difference(ad::Var source, ad::Var pseudo, const geom::NeighborIndex& nbr, const LinearVar& v) {
  if (source.rows() != pseudo.rows()) throw ParameterError("reliability_difference: row counts differ");
  if (nbr.rows() != source.rows()) throw ParameterError("reliability_difference: neighbour table mismatch");
  return ad::sub(edge_encoding(source, nbr, v), edge_encoding(pseudo, nbr, v));
}

ad::Var attention_coeffs(ad::Var reliability, const LinearVar& u, geom::Index k) {
  ad::Var score = ad::add_row(ad::matmul(reliability, u.weight), u.bias);
  return ad::group_softmax(score, k);
}

ad::Var overlap_weights(ad::Var reliability, ad::Var tau, const LinearVar& f, geom::Index k) {
  if (tau.rows() != reliability.rows() || tau.cols() != 1) throw ParameterError("overlap_weights: tau shape mismatch");
  ad::Var pooled = ad::group_sum(ad::mul_col(reliability, tau), k);
  ad::Var scalar = ad::add_row(ad::matmul(pooled, f.weight), f.bias);
  return complement_tanh_abs(scalar);
}

std::vector<geom::Index> top_k_overlap(const Eigen::VectorXd& weights, geom::Index k) {
  if (k < 1 || k > weights.size()) throw ParameterError("top_k_overlap: k out of range");
  std::vector<geom::Index> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), geom::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](geom::Index a, geom::Index b) { return weights[a] > weights[b]; });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

}  // namespace ifnet::overlap
