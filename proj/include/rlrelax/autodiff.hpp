#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rlrelax/core.hpp"

namespace rlrelax::ad {

/// Trainable tensor. Backward passes add into `grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Shared, immutable index list (graph senders, receivers, segment ids).
using IndexList = std::shared_ptr<const std::vector<int>>;

inline IndexList make_index(std::vector<int> v) {
  return std::make_shared<const std::vector<int>>(std::move(v));
}

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records operations for one reverse pass. Not thread-safe; use one tape per
/// thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Value with no gradient.
  Var constant(Matrix value);
  /// Differentiable leaf; its gradient is readable through Var::grad().
  Var leaf(Matrix value);
  /// Leaf bound to a Parameter; backward adds into parameter.grad.
  Var parameter(Parameter& p);

  /// Reverse pass from a 1x1 output, seeded with 1. Throws std::logic_error if
  /// the output is not scalar or the tape was already differentiated.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }

  // Used by the primitives below.
  using Backprop = std::function<void(Tape&, int self)>;
  Var push(Matrix value, std::vector<int> parents, Backprop backprop);
  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Adds `g` into the gradient of node `id` if it requires one.
  void accumulate(int id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<int> parents;
    Backprop backprop;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// x + 1 b^T: adds the 1 x F row `bias` to every row of x.
Var add_row(Var x, Var bias);
Var scale(Var x, double c);
/// Column-wise concatenation.
Var concat(const std::vector<Var>& parts);
Var leaky_relu(Var x, double slope = 0.01);
/// out[s] = sum of rows e with segment[e] == s, for s < n_segments.
Var segment_sum(Var x, const IndexList& segment, int n_segments);
/// Like segment_sum divided by the segment size; empty segments give zero rows.
Var segment_mean(Var x, const IndexList& segment, int n_segments);
/// out[e] = x[index[e]].
Var gather(Var x, const IndexList& index);
/// Sum of all entries as a 1x1 node.
Var sum(Var x);
/// sum_k w_k s_k over 1x1 nodes.
Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

/// Joint log-density of actions `a` (N x d) under independent isotropic
/// Gaussians N(mu_i, alpha I), summed over rows.
Var gaussian_log_prob(Var mu, const Matrix& actions, double alpha);

enum class Mode { Train, Eval };

/// Running statistics of a batch-norm layer.
struct BatchNormState {
  Vector ema_mean;
  Vector ema_var;
  double decay = 0.9;
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(int features)
      : ema_mean(Vector::Zero(features)), ema_var(Vector::Ones(features)) {}
};

/// Per-feature normalization over rows. Train mode uses batch statistics and
/// updates the EMA (ema <- decay ema + (1 - decay) batch); eval mode applies
/// the EMA statistics as a fixed affine map.
Var batchnorm(Var x, Var gamma, Var beta, BatchNormState& state, Mode mode);

}  // namespace rlrelax::ad
