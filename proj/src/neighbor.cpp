#include "rlrelax/neighbor.hpp"

#include <cmath>
#include <stdexcept>

namespace rlrelax {

std::vector<int> NeighborGraph::sender_offsets() const {
  std::vector<int> offsets(static_cast<std::size_t>(n_nodes) + 1, 0);
  for (int s : senders) ++offsets[static_cast<std::size_t>(s) + 1];
  for (int u = 0; u < n_nodes; ++u) offsets[u + 1] += offsets[u];
  return offsets;
}

NeighborGraph build_graph(const Configuration& config, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("graph cutoff must be positive");
  const int n = static_cast<int>(config.size());
  const int d = config.dim();
  const double delta2 = delta * delta;

  // Upper-triangle scan; appending i < j pairs in order leaves every
  // adjacency list sorted.
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  const Vector& L = config.box.lengths();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        double x = config.positions(i, k) - config.positions(j, k);
        if (config.box.periodic(k)) x -= L[k] * std::round(x / L[k]);
        r2 += x * x;
      }
      if (r2 <= delta2) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  NeighborGraph g;
  g.n_nodes = n;
  g.cutoff = delta;
  for (int i = 0; i < n; ++i) {
    for (int j : adj[i]) {
      g.senders.push_back(i);
      g.receivers.push_back(j);
    }
  }
  return g;
}

}  // namespace rlrelax
