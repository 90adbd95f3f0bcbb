#include "rlrelax/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rlrelax::ad {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    require(v.valid(), "autodiff: invalid variable");
    if (t == nullptr) t = v.tape();
    require(t == v.tape(), "autodiff: variables live on different tapes");
  }
  return *t;
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::push(Matrix value, std::vector<int> parents, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), {}, nullptr); }

Var Tape::leaf(Matrix value) {
  Var v = push(std::move(value), {}, nullptr);
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::parameter(Parameter& p) {
  Var v = leaf(p.value);
  nodes_.back().param = &p;
  return v;
}

void Tape::accumulate(int id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(Var output) {
  if (differentiated_) throw std::logic_error("autodiff: backward called twice on one tape");
  if (output.tape() != this) throw std::logic_error("autodiff: output is not on this tape");
  const int out = output.id();
  if (nodes_[out].value.rows() != 1 || nodes_[out].value.cols() != 1) {
    throw std::logic_error("autodiff: backward needs a scalar output");
  }
  differentiated_ = true;
  if (!nodes_[out].requires_grad) return;
  nodes_[out].grad = Matrix::Ones(1, 1);
  // Node ids are a topological order.
  for (int id = out; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backprop) n.backprop(*this, id);
    if (n.param) {
      Matrix& g = n.param->grad;
      if (g.rows() != n.grad.rows() || g.cols() != n.grad.cols()) {
        g = Matrix::Zero(n.grad.rows(), n.grad.cols());
      }
      g += n.grad;
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of({a, b});
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() * b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of({a, b});
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape& t, int self) {
    t.accumulate(ia, t.grad(self));
    t.accumulate(ib, t.grad(self));
  });
}

Var add_row(Var x, Var bias) {
  Tape& t = tape_of({x, bias});
  require(bias.rows() == 1 && bias.cols() == x.cols(), "add_row: bias must be 1 x cols(x)");
  const int ix = x.id(), ib = bias.id();
  Matrix out = x.value();
  out.rowwise() += bias.value().row(0);
  return t.push(std::move(out), {ix, ib}, [ix, ib](Tape& t, int self) {
    t.accumulate(ix, t.grad(self));
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.grad(self).colwise().sum());
  });
}

Var scale(Var x, double c) {
  Tape& t = tape_of({x});
  const int ix = x.id();
  return t.push(c * x.value(), {ix}, [ix, c](Tape& t, int self) {
    t.accumulate_expr(ix, c * t.grad(self));
  });
}

Var concat(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const Var& p : parts) {
    require(p.tape() == &t, "concat: variables live on different tapes");
    require(p.rows() == rows, "concat: row counts differ");
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t.push(std::move(out), ids, [ids, widths](Tape& t, int self) {
    Eigen::Index c = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) t.accumulate_expr(ids[k], t.grad(self).middleCols(c, widths[k]));
      c += widths[k];
    }
  });
}

Var leaky_relu(Var x, double slope) {
  Tape& t = tape_of({x});
  const int ix = x.id();
  Matrix out = x.value().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return t.push(std::move(out), {ix}, [ix, slope](Tape& t, int self) {
    const Matrix& xv = t.value(ix);
    t.accumulate_expr(ix, t.grad(self).cwiseProduct(
                              xv.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; })));
  });
}

Var segment_sum(Var x, const IndexList& segment, int n_segments) {
  Tape& t = tape_of({x});
  require(segment && static_cast<Eigen::Index>(segment->size()) == x.rows(),
          "segment_sum: one segment id per row required");
  const int ix = x.id();
  Matrix out = Matrix::Zero(n_segments, x.cols());
  const Matrix& xv = x.value();
  for (std::size_t e = 0; e < segment->size(); ++e) {
    const int s = (*segment)[e];
    require(s >= 0 && s < n_segments, "segment_sum: segment id out of range");
    out.row(s) += xv.row(static_cast<Eigen::Index>(e));
  }
  return t.push(std::move(out), {ix}, [ix, segment](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const Matrix& g = t.grad(self);
    Matrix dx(static_cast<Eigen::Index>(segment->size()), g.cols());
    for (std::size_t e = 0; e < segment->size(); ++e) dx.row(static_cast<Eigen::Index>(e)) = g.row((*segment)[e]);
    t.accumulate(ix, dx);
  });
}

Var segment_mean(Var x, const IndexList& segment, int n_segments) {
  Tape& t = tape_of({x});
  require(segment && static_cast<Eigen::Index>(segment->size()) == x.rows(),
          "segment_mean: one segment id per row required");
  const int ix = x.id();
  auto inv_count = std::make_shared<Vector>(Vector::Zero(n_segments));
  for (int s : *segment) {
    require(s >= 0 && s < n_segments, "segment_mean: segment id out of range");
    (*inv_count)[s] += 1.0;
  }
  for (int s = 0; s < n_segments; ++s) {
    (*inv_count)[s] = (*inv_count)[s] > 0.0 ? 1.0 / (*inv_count)[s] : 0.0;
  }
  Matrix out = Matrix::Zero(n_segments, x.cols());
  const Matrix& xv = x.value();
  for (std::size_t e = 0; e < segment->size(); ++e) {
    out.row((*segment)[e]) += xv.row(static_cast<Eigen::Index>(e));
  }
  out = inv_count->asDiagonal() * out;
  return t.push(std::move(out), {ix}, [ix, segment, inv_count](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const Matrix& g = t.grad(self);
    Matrix dx(static_cast<Eigen::Index>(segment->size()), g.cols());
    for (std::size_t e = 0; e < segment->size(); ++e) {
      const int s = (*segment)[e];
      dx.row(static_cast<Eigen::Index>(e)) = (*inv_count)[s] * g.row(s);
    }
    t.accumulate(ix, dx);
  });
}

Var gather(Var x, const IndexList& index) {
  Tape& t = tape_of({x});
  require(static_cast<bool>(index), "gather: null index");
  const int ix = x.id();
  const Matrix& xv = x.value();
  Matrix out(static_cast<Eigen::Index>(index->size()), xv.cols());
  for (std::size_t e = 0; e < index->size(); ++e) {
    const int r = (*index)[e];
    require(r >= 0 && r < xv.rows(), "gather: index out of range");
    out.row(static_cast<Eigen::Index>(e)) = xv.row(r);
  }
  return t.push(std::move(out), {ix}, [ix, index](Tape& t, int self) {
    if (!t.requires_grad(ix)) return;
    const Matrix& g = t.grad(self);
    Matrix dx = Matrix::Zero(t.value(ix).rows(), g.cols());
    for (std::size_t e = 0; e < index->size(); ++e) dx.row((*index)[e]) += g.row(static_cast<Eigen::Index>(e));
    t.accumulate(ix, dx);
  });
}

Var sum(Var x) {
  Tape& t = tape_of({x});
  const int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return t.push(std::move(out), {ix}, [ix](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    t.accumulate_expr(ix, Matrix::Constant(t.value(ix).rows(), t.value(ix).cols(), g));
  });
}

Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
  require(!scalars.empty(), "weighted_sum: no inputs");
  require(scalars.size() == weights.size(), "weighted_sum: weights do not match inputs");
  Tape& t = *scalars.front().tape();
  std::vector<int> ids;
  Matrix out = Matrix::Zero(1, 1);
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    require(scalars[k].tape() == &t, "weighted_sum: variables live on different tapes");
    require(scalars[k].rows() == 1 && scalars[k].cols() == 1, "weighted_sum: inputs must be 1x1");
    ids.push_back(scalars[k].id());
    out(0, 0) += weights[k] * scalars[k].scalar();
  }
  return t.push(std::move(out), ids, [ids, weights](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      t.accumulate(ids[k], Matrix::Constant(1, 1, g * weights[k]));
    }
  });
}

Var gaussian_log_prob(Var mu, const Matrix& actions, double alpha) {
  Tape& t = tape_of({mu});
  require(alpha > 0.0, "gaussian_log_prob: alpha must be positive");
  require(actions.rows() == mu.rows() && actions.cols() == mu.cols(),
          "gaussian_log_prob: action shape differs from mu");
  const int im = mu.id();
  const double n = static_cast<double>(mu.rows());
  const double d = static_cast<double>(mu.cols());
  const double diff2 = (actions - mu.value()).squaredNorm();
  Matrix out(1, 1);
  out(0, 0) = -n * 0.5 * d * (std::log(2.0 * std::numbers::pi) + std::log(alpha)) -
              diff2 / (2.0 * alpha);
  auto a = std::make_shared<const Matrix>(actions);
  return t.push(std::move(out), {im}, [im, a, alpha](Tape& t, int self) {
    const double g = t.grad(self)(0, 0);
    t.accumulate_expr(im, (g / alpha) * (*a - t.value(im)));
  });
}

Var batchnorm(Var x, Var gamma, Var beta, BatchNormState& st, Mode mode) {
  Tape& t = tape_of({x, gamma, beta});
  const Eigen::Index F = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == F && beta.rows() == 1 && beta.cols() == F,
          "batchnorm: gamma/beta must be 1 x features");
  require(st.ema_mean.size() == F && st.ema_var.size() == F, "batchnorm: state width mismatch");
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows();

  Eigen::RowVectorXd mean, inv_std;
  if (mode == Mode::Train && n > 0) {
    mean = xv.colwise().mean();
    const Eigen::RowVectorXd var = (xv.rowwise() - mean).array().square().colwise().mean();
    inv_std = (var.array() + st.eps).rsqrt();
    st.ema_mean = st.decay * st.ema_mean + (1.0 - st.decay) * mean.transpose();
    st.ema_var = st.decay * st.ema_var + (1.0 - st.decay) * var.transpose();
  } else {
    mean = st.ema_mean.transpose();
    inv_std = (st.ema_var.array() + st.eps).rsqrt().transpose();
  }
  auto xhat = std::make_shared<Matrix>((xv.rowwise() - mean).array().rowwise() * inv_std.array());
  Matrix out = xhat->array().rowwise() * gamma.value().row(0).array();
  out.rowwise() += beta.value().row(0);

  const bool batch_stats = mode == Mode::Train;
  return t.push(std::move(out), {ix, ig, ib},
                [ix, ig, ib, xhat, inv_std, batch_stats](Tape& t, int self) {
                  const Matrix& g = t.grad(self);
                  if (t.requires_grad(ig)) {
                    t.accumulate_expr(ig, g.cwiseProduct(*xhat).colwise().sum());
                  }
                  if (t.requires_grad(ib)) t.accumulate_expr(ib, g.colwise().sum());
                  if (!t.requires_grad(ix)) return;
                  const Eigen::ArrayXXd dxhat =
                      g.array().rowwise() * t.value(ig).row(0).array();
                  if (!batch_stats) {
                    t.accumulate_expr(ix, (dxhat.rowwise() * inv_std.array()).matrix());
                    return;
                  }
                  const double n = static_cast<double>(g.rows());
                  const Eigen::RowVectorXd s1 = dxhat.colwise().sum();
                  const Eigen::RowVectorXd s2 = (dxhat * xhat->array()).colwise().sum();
                  Eigen::ArrayXXd dx = n * dxhat;
                  dx.rowwise() -= s1.array();
                  dx -= xhat->array().rowwise() * s2.array();
                  dx = dx.rowwise() * (inv_std.array() / n);
                  t.accumulate_expr(ix, dx.matrix());
                });
}

}  // namespace rlrelax::ad
