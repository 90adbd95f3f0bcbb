#pragma once

#include <vector>

#include "rlrelax/core.hpp"

namespace rlrelax {

/// Directed cutoff graph. Every pair within `cutoff` appears twice (u->v and
/// v->u), sorted by (sender, receiver). Self-edges are never present.
struct NeighborGraph {
  std::vector<int> senders;
  std::vector<int> receivers;
  int n_nodes = 0;
  double cutoff = 0.0;

  std::size_t n_edges() const { return senders.size(); }

  /// CSR offsets into the edge arrays by sender: edges of u are
  /// [offsets[u], offsets[u+1]).
  std::vector<int> sender_offsets() const;
};

/// All pairs with minimum-image distance <= delta.
NeighborGraph build_graph(const Configuration& config, double delta);

}  // namespace rlrelax
