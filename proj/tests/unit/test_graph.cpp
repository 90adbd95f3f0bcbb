#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "helpers.hpp"
#include "rlrelax/graph.hpp"

using namespace rlrelax;

namespace {

Configuration line(const std::vector<double>& xs, std::vector<int> species, double side = 20.0) {
  Matrix x = Matrix::Constant(static_cast<Eigen::Index>(xs.size()), 3, 5.0);
  for (std::size_t i = 0; i < xs.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = xs[i];
  return Configuration(x, std::move(species), SimulationBox::cubic(side));
}

}  // namespace

TEST_CASE("cutoff graph edges") {
  CHECK(build_graph(line({1.0, 3.0}, {0, 0}), 2.0).n_edges() == 2);
  CHECK(build_graph(line({1.0, 3.0 + 1e-9}, {0, 0}), 2.0).n_edges() == 0);

  Matrix tri(3, 3);
  tri << 1, 1, 1, 2, 1, 1, 1.5, 1.8, 1;
  const auto g = build_graph(Configuration(tri, {0, 0, 0}, SimulationBox::cubic(10.0)), 1.5);
  CHECK(g.n_edges() == 6);
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    CHECK(g.senders[e] != g.receivers[e]);
    if (e > 0) {
      CHECK(std::pair(g.senders[e - 1], g.receivers[e - 1]) < std::pair(g.senders[e], g.receivers[e]));
    }
  }
  // across the periodic boundary
  CHECK(build_graph(line({0.2, 19.7}, {0, 0}), 1.0).n_edges() == 2);
}

TEST_CASE("node features") {
  const PotentialModel m = PotentialModel::binary_lj();
  const Configuration iso = line({5.0}, {0});
  const GraphState s = make_graph_state(iso, m);
  REQUIRE(s.node_features.cols() == 5);
  CHECK(s.node_features.row(0).isApprox(Eigen::RowVectorXd::Unit(5, 0)));

  const GraphState d = make_graph_state(line({5.0, 6.1}, {0, 0}), m);
  CHECK(d.node_features.row(0) == d.node_features.row(1));
  CHECK(d.node_features(0, 3) == d.node_features(0, 2));
  CHECK(d.node_features(0, 4) == d.node_features(0, 2));

  // explicit per-atom values: atom 0 with neighbors holding -1 and -3
  const Configuration c = line({5.0, 6.0, 4.0}, {0, 1, 0});
  const NeighborGraph g = build_graph(c, 1.5);
  Vector u(3);
  u << -2.0, -1.0, -3.0;
  const Matrix f = node_features(c, g, m, u);
  CHECK(f(0, 0) == 1.0);
  CHECK(f(1, 1) == 1.0);
  CHECK(f(0, 2) == -2.0);
  CHECK(f(0, 3) == -4.0);
  CHECK(f(0, 4) == -2.0);
}

TEST_CASE("edge features") {
  const PotentialModel m = PotentialModel::binary_lj();
  const double r0 = std::pow(2.0, 1.0 / 6);
  const GraphState eq = make_graph_state(line({5.0, 5.0 + r0}, {0, 0}), m);
  REQUIRE(eq.edge_features.rows() == 2);
  CHECK(std::abs(eq.edge_features(0, 3)) < 1e-12);
  // u -> v holds x_v - x_u; reversing negates it and keeps the strain
  CHECK(eq.edge_features(0, 0) == doctest::Approx(r0));
  CHECK(eq.edge_features(1, 0) == doctest::Approx(-r0));
  CHECK(eq.edge_features(0, 3) == eq.edge_features(1, 3));

  const GraphState squeezed = make_graph_state(line({5.0, 5.85}, {0, 1}), m);
  CHECK(squeezed.edge_features(0, 3) == doctest::Approx(0.8 * r0 - 0.85));
  CHECK(squeezed.edge_features(0, 3) > 0.0);
}

TEST_CASE("translation leaves the graph state unchanged") {
  const PotentialModel m = PotentialModel::binary_lj();
  const Configuration c = testing::random_config(m, 40, 21);
  Configuration t = c;
  t.positions.rowwise() += Eigen::RowVector3d(3.3, -7.1, 0.4);
  const GraphState a = make_graph_state(c, m), b = make_graph_state(wrap(t), m);
  CHECK(a.graph.senders == b.graph.senders);
  CHECK(a.graph.receivers == b.graph.receivers);
  CHECK((a.edge_features - b.edge_features).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((a.node_features - b.node_features).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("permuting atoms permutes features") {
  const PotentialModel m = PotentialModel::binary_lj();
  const Configuration c = testing::random_config(m, 30, 22);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(23);
  rng.shuffle(perm);
  Configuration p = c;
  for (int i = 0; i < 30; ++i) {
    p.positions.row(i) = c.positions.row(perm[static_cast<std::size_t>(i)]);
    p.species[static_cast<std::size_t>(i)] = c.species[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  const GraphState a = make_graph_state(c, m), b = make_graph_state(p, m);
  for (int i = 0; i < 30; ++i) {
    CHECK((b.node_features.row(i) - a.node_features.row(perm[static_cast<std::size_t>(i)])).norm() < 1e-12);
  }
  std::map<std::pair<int, int>, Eigen::RowVectorXd> edges;
  for (std::size_t e = 0; e < a.graph.n_edges(); ++e) {
    edges[{a.graph.senders[e], a.graph.receivers[e]}] = a.edge_features.row(static_cast<Eigen::Index>(e));
  }
  REQUIRE(b.graph.n_edges() == a.graph.n_edges());
  for (std::size_t e = 0; e < b.graph.n_edges(); ++e) {
    const auto key = std::pair(perm[static_cast<std::size_t>(b.graph.senders[e])],
                               perm[static_cast<std::size_t>(b.graph.receivers[e])]);
    REQUIRE(edges.count(key) == 1);
    CHECK((edges[key] - b.edge_features.row(static_cast<Eigen::Index>(e))).norm() < 1e-12);
  }
}

TEST_CASE("features stay finite at tiny separations") {
  const PotentialModel m = PotentialModel::binary_lj();
  const GraphState s = make_graph_state(line({5.0, 5.0 + 1e-4}, {0, 1}), m);
  CHECK(s.edge_features.allFinite());
}
