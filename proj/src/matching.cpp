#include "ifnet/matching.hpp"

#include "ifnet/errors.hpp"

namespace ifnet::matching {

using ad::Index;
using ad::Matrix;

ad::Var preliminary_matrix(ad::Var fx, ad::Var fy) {
  if (fx.cols() != fy.cols()) throw ParameterError("preliminary_matrix: feature widths differ");
  return ad::pairwise_distance(fx, fy);
}

ad::Var neighbor_score(ad::Var preliminary, const geom::NeighborIndex& nbr_x, const geom::NeighborIndex& nbr_y) {
  if (nbr_x.k() != nbr_y.k()) throw ParameterError("neighbor_score: neighbourhood sizes differ");
  const Matrix& mp = preliminary.value();
  if (nbr_x.rows() != mp.rows() || nbr_y.rows() != mp.cols()) {
    throw ParameterError("neighbor_score: neighbour tables do not match the preliminary matrix");
  }
  const Index k = nbr_x.k();
  const double inv_k = 1.0 / static_cast<double>(k);
  Matrix out = Matrix::Zero(mp.rows(), mp.cols());
  // Column-major loops: j outer so the inner walk down a column of `out` is contiguous.
  for (Index kk = 0; kk < k; ++kk) {
    for (Index j = 0; j < mp.cols(); ++j) {
      const Index col = nbr_y(j, kk);
      for (Index i = 0; i < mp.rows(); ++i) out(i, j) += mp(nbr_x(i, kk), col);
    }
  }
  out *= inv_k;
  return preliminary.tape()->record(
      std::move(out), {preliminary}, [preliminary, nbr_x, nbr_y, inv_k](ad::Tape& tp, const Matrix& g, const Matrix&) {
        tp.accumulate_with(preliminary, [&](Matrix& gp) {
          for (Index kk = 0; kk < nbr_x.k(); ++kk) {
            for (Index j = 0; j < g.cols(); ++j) {
              const Index col = nbr_y(j, kk);
              for (Index i = 0; i < g.rows(); ++i) gp(nbr_x(i, kk), col) += inv_k * g(i, j);
            }
          }
        });
      });
}

ad::Var scaled_score(ad::Var score, ad::Var distance, double alpha) {
  if (score.rows() != distance.rows() || score.cols() != distance.cols()) {
    throw ParameterError("scaled_score: shape mismatch");
  }
  return ad::mul(ad::exp(ad::add_scalar(ad::scale(score, -1.0), alpha)), distance);
}

ad::Var matching_matrix(ad::Var scaled) { return ad::row_softmax(ad::scale(scaled, -1.0)); }

ad::Var pseudo_target(ad::Var matching, ad::Var target) {
  if (matching.cols() != target.rows()) throw ParameterError("pseudo_target: matching columns != target points");
  return ad::matmul(matching, target);
}

}  // namespace ifnet::matching
