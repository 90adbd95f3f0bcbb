#include <doctest.h>

#include <cmath>
#include <functional>

#include "helpers.hpp"
#include "rlrelax/autodiff.hpp"

using namespace rlrelax;
using namespace rlrelax::ad;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// Checks d f / d x against central differences for a scalar graph built by `build`.
void check_gradient(const std::function<Var(Tape&, Var)>& build, const Matrix& x, double rel = 1e-5,
                    double abs = 1e-9) {
  Tape tape;
  Var leaf = tape.leaf(x);
  tape.backward(build(tape, leaf));
  const Matrix analytic = leaf.grad();
  auto f = [&](const Matrix& y) {
    Tape t;
    return build(t, t.constant(y)).scalar();
  };
  const Matrix fd = testing::central_difference(f, x, 1e-6);
  CHECK(testing::worst_ratio(analytic, fd, rel, abs) < 1.0);
}

}  // namespace

TEST_CASE("primitive values") {
  Tape t;
  Matrix m(1, 2);
  m << -1.0, 2.0;
  Var x = t.leaf(m);
  Var y = leaky_relu(x, 0.01);
  CHECK(y.value()(0, 0) == doctest::Approx(-0.01));
  CHECK(y.value()(0, 1) == 2.0);
  t.backward(sum(y));
  CHECK(x.grad()(0, 0) == doctest::Approx(0.01));
  CHECK(x.grad()(0, 1) == 1.0);
}

TEST_CASE("segment sum forward and backward") {
  Tape t;
  Matrix v(3, 1);
  v << 1, 2, 3;
  Var x = t.leaf(v);
  Var s = segment_sum(x, make_index({0, 0, 1}), 2);
  CHECK(s.value()(0, 0) == 3.0);
  CHECK(s.value()(1, 0) == 3.0);
  Matrix w(2, 1);
  w << 5.0, 7.0;
  t.backward(sum(matmul(matmul(t.constant(Matrix::Ones(1, 2)), t.constant(w.asDiagonal().toDenseMatrix())), s)));
  CHECK(x.grad()(0, 0) == 5.0);
  CHECK(x.grad()(1, 0) == 5.0);
  CHECK(x.grad()(2, 0) == 7.0);
}

TEST_CASE("segment mean with an empty segment") {
  Tape t;
  Matrix v(3, 2);
  v << 1, 2, 3, 4, 5, 6;
  Var x = t.leaf(v);
  Var s = segment_mean(x, make_index({0, 2, 0}), 3);
  CHECK(s.value()(0, 0) == 3.0);
  CHECK(s.value().row(1).norm() == 0.0);
  CHECK(s.value()(2, 1) == 4.0);
}

TEST_CASE("backward semantics") {
  Tape t;
  Var a = t.leaf(Matrix::Constant(2, 3, 0.5));
  Var b = t.leaf(Matrix::Constant(2, 3, 0.5));
  Var out = sum(a);
  t.backward(out);
  CHECK(a.grad() == Matrix::Ones(2, 3));
  const bool untouched = b.grad().size() == 0 || b.grad().norm() == 0.0;
  CHECK(untouched);
  CHECK_THROWS_AS(t.backward(out), std::logic_error);

  Tape t2;
  Var c = t2.leaf(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(t2.backward(c), std::logic_error);
}

TEST_CASE("gradients of every primitive match finite differences") {
  RngStream rng(1);
  const Matrix w = random_matrix(5, 3, rng);
  const Matrix row = random_matrix(1, 3, rng);
  const Matrix other = random_matrix(4, 3, rng);
  const Matrix weights = random_matrix(4, 3, rng);
  auto contract = [&](Tape& t, Var x) { return sum(matmul(t.constant(Matrix::Ones(1, x.rows())), matmul(x, t.constant(Matrix::Ones(x.cols(), 1))))); };
  auto project = [&](Tape& t, Var x) {
    // a generic linear read-out so every entry gets a distinct weight
    Matrix c = Matrix::Zero(x.cols(), 1);
    for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, 0) = 0.3 + 0.1 * static_cast<double>(i);
    Matrix r(1, x.rows());
    for (Eigen::Index i = 0; i < r.cols(); ++i) r(0, i) = 1.0 - 0.2 * static_cast<double>(i);
    return matmul(matmul(t.constant(r), x), t.constant(c));
  };
  (void)contract;

  SUBCASE("matmul") {
    check_gradient([&](Tape& t, Var x) { return project(t, matmul(x, t.constant(w))); },
                   random_matrix(4, 5, rng), 1e-7);
    check_gradient([&](Tape& t, Var x) { return project(t, matmul(t.constant(w.transpose()), x)); },
                   random_matrix(5, 2, rng), 1e-7);
  }
  SUBCASE("add, add_row, scale") {
    check_gradient([&](Tape& t, Var x) { return project(t, add(x, scale(x, -2.5))); }, random_matrix(4, 3, rng));
    check_gradient([&](Tape& t, Var x) { return project(t, add_row(t.constant(other), x)); }, row);
    check_gradient([&](Tape& t, Var x) { return project(t, add_row(x, t.constant(row))); }, other);
  }
  SUBCASE("concat and leaky relu") {
    check_gradient([&](Tape& t, Var x) { return project(t, concat({x, t.constant(other), x})); },
                   random_matrix(4, 2, rng));
    check_gradient([&](Tape& t, Var x) { return project(t, leaky_relu(x, 0.1)); }, random_matrix(4, 3, rng));
  }
  SUBCASE("segment reductions and gather") {
    auto seg = make_index({2, 0, 2, 1, 0, 2});
    check_gradient([&](Tape& t, Var x) { return project(t, segment_sum(x, seg, 4)); }, random_matrix(6, 3, rng));
    check_gradient([&](Tape& t, Var x) { return project(t, segment_mean(x, seg, 4)); }, random_matrix(6, 3, rng));
    check_gradient([&](Tape& t, Var x) { return project(t, gather(x, seg)); }, random_matrix(3, 2, rng));
  }
  SUBCASE("weighted sum and gaussian log-density") {
    const Matrix actions = random_matrix(4, 3, rng);
    check_gradient([&](Tape&, Var x) { return gaussian_log_prob(x, actions, 0.3); }, random_matrix(4, 3, rng));
    check_gradient(
        [&](Tape& t, Var x) {
          return weighted_sum({project(t, x), sum(leaky_relu(x))}, {0.7, -1.3});
        },
        random_matrix(4, 3, rng));
  }
  SUBCASE("batch norm in both modes") {
    const Matrix gamma = random_matrix(1, 3, rng), beta = random_matrix(1, 3, rng);
    for (Mode mode : {Mode::Train, Mode::Eval}) {
      check_gradient(
          [&](Tape& t, Var x) {
            BatchNormState st(3);
            st.ema_mean << 0.1, -0.2, 0.3;
            st.ema_var << 0.5, 2.0, 1.5;
            return project(t, batchnorm(x, t.constant(gamma), t.constant(beta), st, mode));
          },
          random_matrix(5, 3, rng));
      check_gradient(
          [&](Tape& t, Var g) {
            BatchNormState st(3);
            return project(t, batchnorm(t.constant(weights), g, t.constant(beta), st, mode));
          },
          gamma);
    }
  }
  SUBCASE("composite MLP") {
    const Matrix w1 = random_matrix(3, 8, rng), w2 = random_matrix(8, 1, rng), b1 = random_matrix(1, 8, rng);
    check_gradient(
        [&](Tape& t, Var x) {
          Var h = leaky_relu(add_row(matmul(x, t.constant(w1)), t.constant(b1)));
          return sum(matmul(h, t.constant(w2)));
        },
        random_matrix(6, 3, rng), 1e-6);
  }
}

TEST_CASE("shared parameters accumulate and gradients are linear") {
  RngStream rng(2);
  Parameter p("p", random_matrix(3, 3, rng));
  const Matrix x = random_matrix(4, 3, rng);
  auto f = [&](Tape& t) { return sum(matmul(t.constant(x), t.parameter(p))); };
  auto g = [&](Tape& t) { return sum(leaky_relu(matmul(matmul(t.constant(x), t.parameter(p)), t.parameter(p)))); };

  p.zero_grad();
  { Tape t; t.backward(f(t)); }
  const Matrix gf = p.grad;
  p.zero_grad();
  { Tape t; t.backward(g(t)); }
  const Matrix gg = p.grad;
  p.zero_grad();
  {
    Tape t;
    t.backward(weighted_sum({f(t), g(t)}, {2.0, -3.0}));
  }
  CHECK((p.grad - (2.0 * gf - 3.0 * gg)).cwiseAbs().maxCoeff() < 1e-12);

  // a second backward on a fresh tape adds to the existing gradient
  { Tape t; t.backward(f(t)); }
  CHECK((p.grad - (2.0 * gf - 3.0 * gg + gf)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("batch norm statistics and running averages") {
  Matrix x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 4, 40;
  BatchNormState st(2);
  Tape t;
  Var y = batchnorm(t.constant(x), t.constant(Matrix::Ones(1, 2)), t.constant(Matrix::Zero(1, 2)), st, Mode::Train);
  CHECK(std::abs(y.value().col(0).mean()) < 1e-12);
  CHECK(y.value().col(1).squaredNorm() / 4 == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(st.ema_mean(0) == doctest::Approx(0.1 * 2.5));
  CHECK(st.ema_var(1) == doctest::Approx(0.9 + 0.1 * 125.0));

  // eval mode is the fixed affine map from the running statistics
  Tape t2;
  const BatchNormState frozen = st;
  Var z = batchnorm(t2.constant(x), t2.constant(Matrix::Ones(1, 2)), t2.constant(Matrix::Zero(1, 2)), st, Mode::Eval);
  CHECK(st.ema_mean == frozen.ema_mean);
  CHECK(z.value()(2, 0) == doctest::Approx((3.0 - st.ema_mean(0)) / std::sqrt(st.ema_var(0) + st.eps)));
}
