#include "ifnet/autodiff.hpp"

#include "ifnet/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ifnet::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ParameterError("Var::scalar on a non-scalar value");
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, record_});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) {
      if (in.tape_ != this) throw InternalStateError("autodiff: mixing vars from different tapes");
      needs = needs || nodes_[in.id_].requires_grad;
    }
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_storage(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(const Var& v, const Matrix& contribution) {
  if (!needs_grad(v)) return;
  grad_storage(v.id_) += contribution;
}

void Tape::backward(const Var& root) {
  if (root.tape_ != this) throw InternalStateError("autodiff: backward on a foreign var");
  const Matrix& rv = nodes_[root.id_].value;
  if (rv.rows() != 1 || rv.cols() != 1) throw ParameterError("autodiff: backward root must be 1x1");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[root.id_].requires_grad) return;
  grad_storage(root.id_).setOnes();
  for (int id = root.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.size() == 0) continue;
    // The closure may grow grad storage of earlier nodes only; n stays valid.
    n.backward(*this, n.grad, n.value);
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw InternalStateError("autodiff: use of an unbound var");
  return *a.tape();
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ParameterError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

void require_groups(const Var& a, Index k, const char* op) {
  if (k <= 0 || a.rows() % k != 0) {
    throw ParameterError(std::string(op) + ": row count not divisible by group size");
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape& t = tape_of(a);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tape& t = tape_of(a);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g);
    tp.accumulate_with(b, [&](Matrix& gb) { gb -= g; });
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseProduct(b.value()), {a, b},
                  [a, b](Tape& tp, const Matrix& g, const Matrix&) {
                    tp.accumulate_with(a, [&](Matrix& ga) { ga += g.cwiseProduct(b.value()); });
                    tp.accumulate_with(b, [&](Matrix& gb) { gb += g.cwiseProduct(a.value()); });
                  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [a, s](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga += s * g; });
  });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value().array() + s, {a},
                  [a](Tape& tp, const Matrix& g, const Matrix&) { tp.accumulate(a, g); });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ParameterError("add_row: row shape mismatch");
  Tape& t = tape_of(a);
  Matrix out = a.value().rowwise() + row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g);
    tp.accumulate_with(row, [&](Matrix& gr) { gr += g.colwise().sum(); });
  });
}

Var sub_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ParameterError("sub_row: row shape mismatch");
  Tape& t = tape_of(a);
  Matrix out = a.value().rowwise() - row.value().row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate(a, g);
    tp.accumulate_with(row, [&](Matrix& gr) { gr -= g.colwise().sum(); });
  });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ParameterError("mul_col: column shape mismatch");
  Tape& t = tape_of(a);
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return t.record(std::move(out), {a, col}, [a, col](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga.array() += g.array().colwise() * col.value().col(0).array(); });
    tp.accumulate_with(col, [&](Matrix& gc) { gc += g.cwiseProduct(a.value()).rowwise().sum(); });
  });
}

Var div_scalar(Var a, Var s) {
  if (s.rows() != 1 || s.cols() != 1) throw ParameterError("div_scalar: divisor must be 1x1");
  Tape& t = tape_of(a);
  const double d = s.value()(0, 0);
  return t.record(a.value() / d, {a, s}, [a, s, d](Tape& tp, const Matrix& g, const Matrix& out) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga += g / d; });
    tp.accumulate_with(s, [&](Matrix& gs) { gs(0, 0) -= g.cwiseProduct(out).sum() / d; });
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ParameterError("matmul: inner dimension mismatch");
  Tape& t = tape_of(a);
  Matrix out = a.value() * b.value();
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga.noalias() += g * b.value().transpose(); });
    tp.accumulate_with(b, [&](Matrix& gb) { gb.noalias() += a.value().transpose() * g; });
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().transpose(), {a}, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga += g.transpose(); });
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga.array() += g(0, 0); });
  });
}

Var col_sum(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().colwise().sum(), {a}, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga.rowwise() += g.row(0); });
  });
}

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().rowwise().sum(), {a}, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga.colwise() += g.col(0); });
  });
}

Var gather_rows(Var a, const IndexList& rows) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(rows.size()), av.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= av.rows()) throw ParameterError("gather_rows: index out of range");
    out.row(static_cast<Index>(r)) = av.row(rows[r]);
  }
  return t.record(std::move(out), {a}, [a, rows](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      for (std::size_t r = 0; r < rows.size(); ++r) ga.row(rows[r]) += g.row(static_cast<Index>(r));
    });
  });
}

Var concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw ParameterError("concat_rows: column mismatch");
  Tape& t = tape_of(a);
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  const Index ra = a.rows();
  return t.record(std::move(out), {a, b}, [a, b, ra](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga += g.topRows(ra); });
    tp.accumulate_with(b, [&](Matrix& gb) { gb += g.bottomRows(g.rows() - ra); });
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ParameterError("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ParameterError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return t.record(std::move(out), parts, [parts](Tape& tp, const Matrix& g, const Matrix&) {
    Index off = 0;
    for (const Var& p : parts) {
      tp.accumulate_with(p, [&](Matrix& gp) { gp += g.middleCols(off, p.cols()); });
      off += p.cols();
    }
  });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ParameterError("slice_rows: out of range");
  Tape& t = tape_of(a);
  return t.record(a.value().middleRows(start, count), {a},
                  [a, start, count](Tape& tp, const Matrix& g, const Matrix&) {
                    tp.accumulate_with(a, [&](Matrix& ga) { ga.middleRows(start, count) += g; });
                  });
}

Var gather_entries(Var a, const IndexList& rows, const IndexList& cols) {
  if (rows.size() != cols.size()) throw ParameterError("gather_entries: index list mismatch");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  Matrix out(static_cast<Index>(rows.size()), 1);
  for (std::size_t e = 0; e < rows.size(); ++e) {
    if (rows[e] < 0 || rows[e] >= av.rows() || cols[e] < 0 || cols[e] >= av.cols()) {
      throw ParameterError("gather_entries: index out of range");
    }
    out(static_cast<Index>(e), 0) = av(rows[e], cols[e]);
  }
  return t.record(std::move(out), {a}, [a, rows, cols](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      for (std::size_t e = 0; e < rows.size(); ++e) ga(rows[e], cols[e]) += g(static_cast<Index>(e), 0);
    });
  });
}

Var silu(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([](double x) { return x * sigmoid(x); });
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      ga += g.binaryExpr(a.value(), [](double gv, double x) {
        const double s = sigmoid(x);
        return gv * (s + x * s * (1.0 - s));
      });
    });
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().tanh().matrix();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix& out) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga.array() += g.array() * (1.0 - out.array().square()); });
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().exp().matrix();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix& out) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga += g.cwiseProduct(out); });
  });
}

Var log(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().array().log().matrix();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) { ga.array() += g.array() / a.value().array(); });
  });
}

Var abs(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().cwiseAbs();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      ga += g.binaryExpr(a.value(), [](double gv, double x) {
        return x > 0.0 ? gv : (x < 0.0 ? -gv : 0.0);
      });
    });
  });
}

Var huber(Var a, double delta) {
  if (!(delta > 0.0)) throw ParameterError("huber: delta must be positive");
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([delta](double z) {
    const double m = std::abs(z);
    return m <= delta ? 0.5 * z * z : delta * (m - 0.5 * delta);
  });
  return t.record(std::move(out), {a}, [a, delta](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      ga += g.binaryExpr(a.value(), [delta](double gv, double z) {
        if (std::abs(z) <= delta) return gv * z;
        return gv * (z > 0.0 ? delta : -delta);
      });
    });
  });
}

Var group_max(Var a, Index k) {
  require_groups(a, k, "group_max");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Index groups = av.rows() / k;
  Matrix out(groups, av.cols());
  std::vector<Index> arg(static_cast<std::size_t>(groups * av.cols()));
  for (Index n = 0; n < groups; ++n) {
    for (Index c = 0; c < av.cols(); ++c) {
      Index best = n * k;
      for (Index r = n * k + 1; r < (n + 1) * k; ++r) {
        if (av(r, c) > av(best, c)) best = r;
      }
      out(n, c) = av(best, c);
      arg[static_cast<std::size_t>(n * av.cols() + c)] = best;
    }
  }
  return t.record(std::move(out), {a}, [a, arg = std::move(arg)](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      for (Index n = 0; n < g.rows(); ++n) {
        for (Index c = 0; c < g.cols(); ++c) ga(arg[static_cast<std::size_t>(n * g.cols() + c)], c) += g(n, c);
      }
    });
  });
}

Var group_sum(Var a, Index k) {
  require_groups(a, k, "group_sum");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Index groups = av.rows() / k;
  Matrix out = Matrix::Zero(groups, av.cols());
  for (Index n = 0; n < groups; ++n) out.row(n) = av.middleRows(n * k, k).colwise().sum();
  return t.record(std::move(out), {a}, [a, k](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      for (Index n = 0; n < g.rows(); ++n) ga.middleRows(n * k, k).rowwise() += g.row(n);
    });
  });
}

Var group_softmax(Var a, Index k) {
  require_groups(a, k, "group_softmax");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Index groups = av.rows() / k;
  Matrix out(av.rows(), av.cols());
  for (Index n = 0; n < groups; ++n) {
    auto block = av.middleRows(n * k, k);
    Eigen::RowVectorXd mx = block.colwise().maxCoeff();
    Matrix e = (block.rowwise() - mx).array().exp().matrix();
    Eigen::RowVectorXd denom = e.colwise().sum();
    out.middleRows(n * k, k) = e.array().rowwise() / denom.array();
  }
  return t.record(std::move(out), {a}, [a, k](Tape& tp, const Matrix& g, const Matrix& out) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      const Index groups = g.rows() / k;
      for (Index n = 0; n < groups; ++n) {
        auto gb = g.middleRows(n * k, k);
        auto ob = out.middleRows(n * k, k);
        Eigen::RowVectorXd dot = gb.cwiseProduct(ob).colwise().sum();
        ga.middleRows(n * k, k).array() += ob.array() * (gb.rowwise() - dot).array();
      }
    });
  });
}

Var row_softmax(Var a) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  Eigen::VectorXd mx = av.rowwise().maxCoeff();
  Matrix e = (av.colwise() - mx).array().exp().matrix();
  Eigen::VectorXd denom = e.rowwise().sum();
  Matrix out = e.array().colwise() / denom.array();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix& out) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      Eigen::VectorXd dot = g.cwiseProduct(out).rowwise().sum();
      ga.array() += out.array() * (g.colwise() - dot).array();
    });
  });
}

Var row_min(Var a) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (av.cols() == 0) throw ParameterError("row_min: empty rows");
  Matrix out(av.rows(), 1);
  IndexList arg(static_cast<std::size_t>(av.rows()));
  for (Index r = 0; r < av.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < av.cols(); ++c) {
      if (av(r, c) < av(r, best)) best = c;
    }
    out(r, 0) = av(r, best);
    arg[static_cast<std::size_t>(r)] = best;
  }
  return t.record(std::move(out), {a}, [a, arg = std::move(arg)](Tape& tp, const Matrix& g, const Matrix&) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      for (Index r = 0; r < g.rows(); ++r) ga(r, arg[static_cast<std::size_t>(r)]) += g(r, 0);
    });
  });
}

Var row_norm(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().rowwise().norm();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g, const Matrix& out) {
    tp.accumulate_with(a, [&](Matrix& ga) {
      for (Index r = 0; r < out.rows(); ++r) {
        if (out(r, 0) > 0.0) ga.row(r) += (g(r, 0) / out(r, 0)) * a.value().row(r);
      }
    });
  });
}

Var pairwise_sq_distance(Var a, Var b) {
  if (a.cols() != b.cols()) throw ParameterError("pairwise_sq_distance: width mismatch");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), bv.rows());
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index j = 0; j < bv.rows(); ++j) out(i, j) = (av.row(i) - bv.row(j)).squaredNorm();
  }
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    // d/da_i = 2 sum_j g_ij (a_i - b_j); d/db_j = -2 sum_i g_ij (a_i - b_j)
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    tp.accumulate_with(a, [&](Matrix& ga) {
      Eigen::VectorXd rs = g.rowwise().sum();
      ga += 2.0 * (av.array().colwise() * rs.array()).matrix() - 2.0 * g * bv;
    });
    tp.accumulate_with(b, [&](Matrix& gb) {
      Eigen::RowVectorXd cs = g.colwise().sum();
      gb += 2.0 * (bv.array().colwise() * cs.transpose().array()).matrix() - 2.0 * g.transpose() * av;
    });
  });
}

Var pairwise_distance(Var a, Var b) {
  if (a.cols() != b.cols()) throw ParameterError("pairwise_distance: width mismatch");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), bv.rows());
  for (Index i = 0; i < av.rows(); ++i) {
    for (Index j = 0; j < bv.rows(); ++j) out(i, j) = (av.row(i) - bv.row(j)).norm();
  }
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g, const Matrix& out) {
    // Zero-distance pairs contribute the zero subgradient.
    Matrix h = g.binaryExpr(out, [](double gv, double d) { return d > 0.0 ? gv / d : 0.0; });
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    tp.accumulate_with(a, [&](Matrix& ga) {
      Eigen::VectorXd rs = h.rowwise().sum();
      ga += (av.array().colwise() * rs.array()).matrix() - h * bv;
    });
    tp.accumulate_with(b, [&](Matrix& gb) {
      Eigen::RowVectorXd cs = h.colwise().sum();
      gb += (bv.array().colwise() * cs.transpose().array()).matrix() - h.transpose() * av;
    });
  });
}

Var cross_rows(Var a, Var b) {
  if (a.cols() != 3 || b.cols() != 3 || a.rows() != b.rows()) throw ParameterError("cross_rows: need R x 3 inputs");
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), 3);
  for (Index r = 0; r < av.rows(); ++r) {
    const Eigen::Vector3d c = Eigen::Vector3d(av.row(r)).cross(Eigen::Vector3d(bv.row(r)));
    out.row(r) = c.transpose();
  }
  return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g, const Matrix&) {
    // c = a x b: dL/da = b x g, dL/db = g x a
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    tp.accumulate_with(a, [&](Matrix& ga) {
      for (Index r = 0; r < g.rows(); ++r) {
        ga.row(r) += Eigen::Vector3d(bv.row(r)).cross(Eigen::Vector3d(g.row(r))).transpose();
      }
    });
    tp.accumulate_with(b, [&](Matrix& gb) {
      for (Index r = 0; r < g.rows(); ++r) {
        gb.row(r) += Eigen::Vector3d(g.row(r)).cross(Eigen::Vector3d(av.row(r))).transpose();
      }
    });
  });
}

}  // namespace ifnet::ad
