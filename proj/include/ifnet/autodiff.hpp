#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape owns every intermediate value produced during a forward pass. Ops are
// free functions taking and returning Var handles; each op records a closure
// that maps the output gradient onto its inputs. Tensors of rank three (for
// example N points x k neighbours x D channels) are stored as (N*k) x D
// matrices whose rows are grouped in runs of k.

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace ifnet::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexList = std::vector<Index>;

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// grad_out, value_out -> accumulate into inputs via Tape::accumulate.
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& value_out)>;

  /// A non-recording tape never stores backward closures; leaves act as constants.
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Matrix value);

  /// Records an op result. `backward` is kept only when some input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  void accumulate(const Var& v, const Matrix& contribution);
  template <typename Fn>
  void accumulate_with(const Var& v, Fn&& fn) {
    if (!needs_grad(v)) return;
    Matrix& g = grad_storage(v.id());
    fn(g);
  }

  bool needs_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }
  bool recording() const { return record_; }

  /// Back-propagates from a 1x1 root.
  void backward(const Var& root);

  /// Gradient of the last backward() with respect to v (zeros if untouched).
  Matrix grad(const Var& v) const;

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Counts rotation solves whose gradient was stopped (near-degenerate spectrum).
  int gradient_stops() const { return gradient_stops_; }
  void note_gradient_stop() { ++gradient_stops_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };

  Matrix& grad_storage(int id);

  std::vector<Node> nodes_;
  bool record_;
  int gradient_stops_ = 0;
};

// Elementwise and broadcasting arithmetic.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a + 1 * row, row is 1 x C.
Var add_row(Var a, Var row);
Var sub_row(Var a, Var row);
/// out(i, j) = a(i, j) * col(i), col is R x 1.
Var mul_col(Var a, Var col);
/// a / s where s is 1 x 1.
Var div_scalar(Var a, Var s);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var sum(Var a);
/// Column-wise sum, R x C -> 1 x C.
Var col_sum(Var a);
Var row_sum(Var a);

// Structural.
Var gather_rows(Var a, const IndexList& rows);
Var concat_rows(Var a, Var b);
/// Horizontal concatenation of equally tall matrices.
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, Index start, Index count);
/// Picks a(rows[t], cols[t]) into a T x 1 column.
Var gather_entries(Var a, const IndexList& rows, const IndexList& cols);

// Pointwise nonlinearities.
Var silu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
/// Subgradient 0 at 0.
Var abs(Var a);
/// 0.5 z^2 for |z| <= delta, delta (|z| - 0.5 delta) otherwise.
Var huber(Var a, double delta);

// Reductions over consecutive row groups of size k: (N*k) x C -> N x C.
Var group_max(Var a, Index k);
Var group_sum(Var a, Index k);
/// Softmax over the k rows of each group, independently per column.
Var group_softmax(Var a, Index k);
/// Softmax across the columns of each row.
Var row_softmax(Var a);
/// Row minimum, R x C -> R x 1 (argmin subgradient, smaller column wins ties).
Var row_min(Var a);
/// Euclidean norm of each row, R x C -> R x 1 (subgradient 0 at the origin).
Var row_norm(Var a);

// Geometry-flavoured fused ops.
/// out(i, j) = || a_i - b_j ||_2.
Var pairwise_distance(Var a, Var b);
/// out(i, j) = || a_i - b_j ||_2^2.
Var pairwise_sq_distance(Var a, Var b);
/// Row-wise cross product of two R x 3 matrices.
Var cross_rows(Var a, Var b);

}  // namespace ifnet::ad
