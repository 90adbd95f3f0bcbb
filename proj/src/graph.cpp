#include "rlrelax/graph.hpp"

#include <cmath>

namespace rlrelax {

int node_feature_width(const PotentialModel& model) { return model.n_species() + 3; }

Matrix node_features(const Configuration& config, const NeighborGraph& graph,
                     const PotentialModel& model, const Vector& per_atom) {
  const int n = static_cast<int>(config.size());
  const int ns = model.n_species();
  Matrix out = Matrix::Zero(n, ns + 3);
  Vector nb_sum = Vector::Zero(n);
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  for (std::size_t e = 0; e < graph.n_edges(); ++e) {
    const int u = graph.senders[e], v = graph.receivers[e];
    nb_sum[v] += per_atom[u];
    ++degree[v];
  }
  for (int v = 0; v < n; ++v) {
    out(v, config.species[v]) = 1.0;
    out(v, ns) = per_atom[v];
    out(v, ns + 1) = nb_sum[v];
    out(v, ns + 2) = degree[v] > 0 ? nb_sum[v] / degree[v] : 0.0;
  }
  return out;
}

Matrix node_features(const Configuration& config, const NeighborGraph& graph,
                     const PotentialModel& model) {
  const Vector per_atom = graph.cutoff >= model.cutoff()
                              ? model.per_atom_energies(config, graph)
                              : model.evaluate(config, false).per_atom;
  return node_features(config, graph, model, per_atom);
}

Matrix edge_features(const Configuration& config, const NeighborGraph& graph,
                     const PotentialModel& model) {
  const int d = config.dim();
  Matrix out(static_cast<Eigen::Index>(graph.n_edges()), kEdgeFeatureWidth);
  out.setZero();
  const Vector& L = config.box.lengths();
  for (std::size_t e = 0; e < graph.n_edges(); ++e) {
    const int u = graph.senders[e], v = graph.receivers[e];
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      double x = config.positions(v, k) - config.positions(u, k);
      if (config.box.periodic(k)) {
        x -= L[k] * std::round(x / L[k]);
        if (x <= -0.5 * L[k]) x += L[k];
        if (x > 0.5 * L[k]) x -= L[k];
      }
      out(static_cast<Eigen::Index>(e), k) = x;
      r2 += x * x;
    }
    out(static_cast<Eigen::Index>(e), 3) =
        model.equilibrium_length(config.species[u], config.species[v]) - std::sqrt(r2);
  }
  return out;
}

GraphState make_graph_state(const Configuration& config, const PotentialModel& model,
                            double delta) {
  GraphState s;
  s.graph = build_graph(config, delta > 0.0 ? delta : model.cutoff());
  const Evaluation ev = s.graph.cutoff >= model.cutoff() ? model.evaluate(config, s.graph, false)
                                                         : model.evaluate(config, false);
  s.energy = ev.energy;
  s.node_features = node_features(config, s.graph, model, ev.per_atom);
  s.edge_features = edge_features(config, s.graph, model);
  return s;
}

}  // namespace rlrelax
