#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "rlrelax/graph.hpp"
#include "rlrelax/policy.hpp"

using namespace rlrelax;

namespace {

PolicyConfig small_config(int width = 8) {
  PolicyConfig c;
  c.node_features = 5;
  c.width = width;
  c.init_gain = 1.0;
  c.head_init_gain = 1.0;
  return c;
}

Configuration toy4() {
  Matrix x(4, 3);
  x << 1.0, 1.0, 1.0, 2.05, 1.1, 0.95, 1.4, 2.0, 1.2, 1.6, 1.3, 2.1;
  return Configuration(x, {0, 0, 1, 0}, SimulationBox::cubic(6.0));
}

Configuration permuted(const Configuration& c, const std::vector<int>& perm) {
  Configuration p = c;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p.positions.row(static_cast<Eigen::Index>(i)) = c.positions.row(perm[i]);
    p.species[i] = c.species[static_cast<std::size_t>(perm[i])];
  }
  return p;
}

}  // namespace

TEST_CASE("initialization") {
  RngStream a(5), b(5);
  const PolicyParameters p = init_params(small_config(16), a);
  const PolicyParameters q = init_params(small_config(16), b);
  CHECK(p.serialize() == q.serialize());
  for (const auto* t : p.parameters()) {
    if (t->name.ends_with("bias") || t->name == "bn.beta") CHECK(t->value.norm() == 0.0);
  }
  CHECK(p.bn.ema_mean.norm() == 0.0);
  CHECK(p.bn.ema_var == Vector::Ones(5));
  CHECK(p.config.message_passing_steps == 1);

  RngStream r(1);
  PolicyConfig bad = small_config();
  bad.width = 0;
  CHECK_THROWS(init_params(bad, r));
}

TEST_CASE("default architecture") {
  const PolicyConfig c;
  CHECK(c.width == 48);
  CHECK(c.node_embed_layers == 3);
  CHECK(c.edge_embed_layers == 2);
  CHECK(c.head_layers == 4);
  CHECK(c.aggregation == Aggregation::Mean);
  CHECK(c.head_neighbor_mean);
  CHECK(c.batchnorm_decay == 0.9);
  CHECK(c.leaky_slope == 0.01);
}

TEST_CASE("sampling and log density") {
  Matrix mu = Matrix::Zero(1, 3);
  CHECK(log_prob(mu, mu, 1e-5) == doctest::Approx(-1.5 * std::log(2 * M_PI * 1e-5)));
  CHECK(log_prob(mu, mu, 1e-5) == doctest::Approx(14.51257).epsilon(1e-6));
  Matrix two = Matrix::Zero(2, 3);
  CHECK(log_prob(two, two, 1e-5) == doctest::Approx(2 * log_prob(mu, mu, 1e-5)));
  Matrix off = mu;
  off(0, 1) = 0.01;
  CHECK(log_prob(off, mu, 1e-5) < log_prob(mu, mu, 1e-5));

  RngStream r1(3), r2(3);
  Matrix m(2, 3);
  m << 0.1, -0.2, 0.3, 0.0, 1.0, -1.0;
  CHECK(sample_action(m, 1e-5, r1) == sample_action(m, 1e-5, r2));
  RngStream r3(4);
  CHECK((sample_action(m, 1e-300, r3) - m).cwiseAbs().maxCoeff() < 1e-140);

  RngStream r4(5);
  const double alpha = 1e-5;
  const int draws = 100000;
  Matrix acc = Matrix::Zero(2, 3);
  for (int i = 0; i < draws; ++i) acc += sample_action(m, alpha, r4);
  acc /= draws;
  CHECK((acc - m).cwiseAbs().maxCoeff() < 4 * std::sqrt(alpha / draws));
}

TEST_CASE("forward is permutation equivariant") {
  const PotentialModel model = PotentialModel::binary_lj();
  RngStream rng(7);
  PolicyParameters p = init_params(small_config(16), rng);
  p.bn.ema_mean << 0.3, 0.1, -2.0, -10.0, -2.0;
  p.bn.ema_var << 0.2, 0.2, 1.0, 20.0, 1.0;
  const Configuration c = testing::random_config(model, 25, 8);
  std::vector<int> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  const Matrix a = predict(p, make_graph_state(c, model), ad::Mode::Eval);
  const Matrix b = predict(p, make_graph_state(permuted(c, perm), model), ad::Mode::Eval);
  double worst = 0;
  for (int i = 0; i < 25; ++i) worst = std::max(worst, (b.row(i) - a.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-9);
  CHECK(a.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a symmetric dimer gets mirrored displacements") {
  const PotentialModel model = PotentialModel::binary_lj();
  RngStream rng(9);
  PolicyParameters p = init_params(small_config(), rng);
  Matrix x(2, 3);
  x << 3, 3, 3, 4.2, 3, 3;
  const Matrix mu = predict(p, make_graph_state(Configuration(x, {0, 0}, SimulationBox::cubic(10)), model),
                            ad::Mode::Eval);
  Matrix swapped(2, 3);
  swapped << 4.2, 3, 3, 3, 3, 3;
  const Matrix nu = predict(
      p, make_graph_state(Configuration(swapped, {0, 0}, SimulationBox::cubic(10)), model), ad::Mode::Eval);
  CHECK((mu.row(0) - nu.row(1)).norm() < 1e-12);
  CHECK((mu.row(1) - nu.row(0)).norm() < 1e-12);
}

TEST_CASE("one parameter set serves every system size") {
  const PotentialModel model = PotentialModel::binary_lj();
  RngStream rng(10);
  PolicyParameters p = init_params(small_config(16), rng);
  const std::string blob = p.serialize();
  const std::size_t count = p.parameter_count();
  for (int n : {4, 25, 100}) {
    RngStream r(static_cast<std::uint64_t>(n));
    const Configuration c = random_pack(n, SimulationBox::cubic(std::cbrt(n / 1.2)), {{0, 0.8}, {1, 0.2}}, 0.75, r);
    const Matrix mu = predict(p, make_graph_state(c, model), ad::Mode::Eval);
    CHECK(mu.rows() == n);
    CHECK(mu.cols() == 3);
    CHECK(mu.allFinite());
    CHECK(p.serialize() == blob);
    CHECK(p.parameter_count() == count);
  }
}

TEST_CASE("displacement scale multiplies mu") {
  const PotentialModel model = PotentialModel::binary_lj();
  RngStream r1(11), r2(11);
  PolicyConfig c = small_config();
  PolicyParameters p = init_params(c, r1);
  c.displacement_scale *= 3.5;
  PolicyParameters q = init_params(c, r2);
  const GraphState s = make_graph_state(toy4(), model);
  const Matrix a = predict(p, s, ad::Mode::Eval), b = predict(q, s, ad::Mode::Eval);
  CHECK((b - 3.5 * a).cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, b.cwiseAbs().maxCoeff()));
}

TEST_CASE("zeroed head gives zero displacements") {
  const PotentialModel model = PotentialModel::binary_lj();
  PolicyConfig c = small_config();
  c.head_init_gain = 0.0;
  RngStream rng(12);
  PolicyParameters p = init_params(c, rng);
  CHECK(predict(p, make_graph_state(toy4(), model), ad::Mode::Train).norm() == 0.0);
}

TEST_CASE("checkpoint round trip is exact") {
  RngStream rng(13);
  PolicyConfig c = small_config(8);
  c.aggregation = Aggregation::Sum;
  c.message_passing_steps = 2;
  PolicyParameters p = init_params(c, rng);
  p.bn.ema_mean << 0.1, 1.0 / 3.0, -2.0, M_PI, 1e-300;
  const PolicyParameters q = PolicyParameters::deserialize(p.serialize());
  CHECK(q.config == p.config);
  CHECK(q.bn.ema_mean == p.bn.ema_mean);
  const auto a = p.parameters();
  const auto b = q.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
  }
  CHECK(q.serialize() == p.serialize());
  CHECK_THROWS(PolicyParameters::deserialize("rlrelax-policy 1\nbroken"));
  CHECK_THROWS(PolicyParameters::deserialize("something else"));
}

TEST_CASE("width mismatch is rejected") {
  const PotentialModel sw = PotentialModel::sw_silicon();
  RngStream rng(14);
  PolicyParameters p = init_params(small_config(), rng);  // five node features, SW has four
  Matrix x(2, 3);
  x << 1, 1, 1, 3.3, 1, 1;
  CHECK_THROWS(predict(p, make_graph_state(Configuration(x, {0, 0}, SimulationBox::cubic(10)), sw),
                       ad::Mode::Eval));
}

TEST_CASE("log-probability gradient matches finite differences") {
  const PotentialModel model = PotentialModel::binary_lj();
  RngStream rng(15);
  PolicyParameters p = init_params(small_config(8), rng);
  const GraphState s = make_graph_state(toy4(), model);
  const double alpha = 1e-5;
  const Matrix actions = sample_action(predict(p, s, ad::Mode::Train), alpha, rng);

  auto value = [&]() {
    ad::Tape t;
    return ad::gaussian_log_prob(forward(p, s, t, ad::Mode::Train, false), actions, alpha).scalar();
  };
  p.zero_grad();
  {
    ad::Tape t;
    t.backward(ad::gaussian_log_prob(forward(p, s, t, ad::Mode::Train), actions, alpha));
  }
  double worst = 0.0;
  for (ad::Parameter* q : p.parameters()) {
    const Matrix analytic = q->grad;
    auto f = [&](const Matrix& v) {
      const Matrix keep = q->value;
      q->value = v;
      const double out = value();
      q->value = keep;
      return out;
    };
    const Matrix fd = testing::central_difference(f, q->value, 1e-6);
    worst = std::max(worst, testing::worst_ratio(analytic, fd, 1e-4, 1e-6));
  }
  CHECK(worst < 1.0);
}
