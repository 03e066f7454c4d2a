#include "ifnet/losses.hpp"

#include "ifnet/errors.hpp"

namespace ifnet::losses {

using geom::Index;

ad::Var global_registration_loss(ad::Var transformed_source, ad::Var target, double huber_delta) {
  if (transformed_source.rows() == 0 || target.rows() == 0) {
    throw ParameterError("global_registration_loss: empty cloud");
  }
  ad::Var d2 = ad::pairwise_sq_distance(transformed_source, target);
  ad::Var forward = ad::sum(ad::huber(ad::row_min(d2), huber_delta));
  ad::Var backward = ad::sum(ad::huber(ad::row_min(ad::transpose(d2)), huber_delta));
  return ad::add(forward, backward);
}

ad::Var neighborhood_consistency_loss(ad::Var source, ad::Var pseudo, const std::vector<Index>& overlap_rows,
                                      ad::Var rotation, ad::Var translation, Index k, const ad::Var* true_target) {
  if (overlap_rows.empty()) throw ParameterError("neighborhood_consistency_loss: no overlap rows");
  if (source.rows() != pseudo.rows()) throw ParameterError("neighborhood_consistency_loss: row mismatch");
  const Index target_rows = true_target ? true_target->rows() : pseudo.rows() - 1;
  if (k < 1 || k > source.rows() - 1 || k > target_rows) {
    throw ParameterError("neighborhood_consistency_loss: k exceeds cloud size");
  }
  const geom::NeighborIndex nx = geom::knn_rows(source.value(), source.value(), k, true);
  geom::NeighborIndex ny;
  if (true_target) {
    ny = geom::knn_rows(pseudo.value(), true_target->value(), k, false);
  } else {
    ny = geom::knn_rows(pseudo.value(), pseudo.value(), k, true);
  }
  ad::IndexList p_rows;
  ad::IndexList q_rows;
  for (Index row : overlap_rows) {
    if (row < 0 || row >= source.rows()) throw ParameterError("neighborhood_consistency_loss: row out of range");
    for (Index j = 0; j < k; ++j) {
      p_rows.push_back(nx(row, j));
      q_rows.push_back(ny(row, j));
    }
  }
  ad::Var p = ad::gather_rows(source, p_rows);
  ad::Var q = ad::gather_rows(true_target ? *true_target : pseudo, q_rows);
  ad::Var moved = ad::add_row(ad::matmul(p, ad::transpose(rotation)), translation);
  return ad::sum(ad::row_norm(ad::sub(moved, q)));
}

ad::Var pseudo_consistency_loss(ad::Var matching, const std::vector<Index>& overlap_rows) {
  if (overlap_rows.empty()) throw ParameterError("pseudo_consistency_loss: empty overlap set");
  const ad::Matrix& m = matching.value();
  ad::IndexList cols;
  for (Index row : overlap_rows) {
    if (row < 0 || row >= m.rows()) throw ParameterError("pseudo_consistency_loss: row out of range");
    Index best = 0;
    m.row(row).maxCoeff(&best);
    cols.push_back(best);
  }
  ad::Var picked = ad::gather_entries(matching, overlap_rows, cols);
  return ad::scale(ad::sum(ad::log(picked)), -1.0 / static_cast<double>(overlap_rows.size()));
}

double total_loss(std::span<const LossValues> passes) {
  double total = 0.0;
  for (const LossValues& p : passes) total += p.gr + p.nc + p.pc;
  return total;
}

}  // namespace ifnet::losses
