#pragma once

#include "rlrelax/core.hpp"
#include "rlrelax/neighbor.hpp"
#include "rlrelax/potentials.hpp"

namespace rlrelax {

/// Policy input for one configuration.
///
/// Node rows: one-hot species | U_v | sum of neighbor U | mean of neighbor U.
/// Edge rows for u -> v: (x_v - x_u) components | equilibrium length - |x_vu|.
struct GraphState {
  Matrix node_features;
  Matrix edge_features;
  NeighborGraph graph;
  double energy = 0.0;  // total potential energy of the configuration
};

/// Isolated nodes get zero neighborhood sum and mean.
Matrix node_features(const Configuration& config, const NeighborGraph& graph,
                     const PotentialModel& model, const Vector& per_atom);
Matrix node_features(const Configuration& config, const NeighborGraph& graph,
                     const PotentialModel& model);

Matrix edge_features(const Configuration& config, const NeighborGraph& graph,
                     const PotentialModel& model);

int node_feature_width(const PotentialModel& model);
constexpr int kEdgeFeatureWidth = 4;

/// Builds the cutoff graph (delta <= 0 selects the model cutoff) and both
/// feature matrices.
GraphState make_graph_state(const Configuration& config, const PotentialModel& model,
                            double delta = 0.0);

}  // namespace rlrelax
