#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rlrelax/autodiff.hpp"
#include "rlrelax/core.hpp"
#include "rlrelax/graph.hpp"

namespace rlrelax {

enum class Aggregation { Mean, Sum };

/// Architecture of the message-passing policy. Layer counts are numbers of
/// dense layers; leaky-ReLU sits between layers, never after the last one.
struct PolicyConfig {
  int node_features = 5;
  int edge_features = kEdgeFeatureWidth;
  int width = 48;
  int dim = 3;
  int message_passing_steps = 1;
  int node_embed_layers = 3;
  int edge_embed_layers = 2;
  int node_update_layers = 2;
  int edge_update_layers = 2;
  int head_layers = 4;
  double leaky_slope = 0.01;
  Aggregation aggregation = Aggregation::Mean;
  /// Feed the head h_v concatenated with the neighbor mean of h_u (otherwise h_v only).
  bool head_neighbor_mean = true;
  double displacement_scale = 2.0;
  double batchnorm_decay = 0.9;
  /// Factor on the uniform init bound of every dense layer. Deep stacks at 1.0
  /// blow up the first rollouts, 0.5 keeps them tame.
  double init_gain = 0.5;
  /// Extra factor on the uniform bound of the last head layer. Zero starts the
  /// policy as a pure noise proposal.
  double head_init_gain = 0.0;

  bool operator==(const PolicyConfig&) const = default;
};

struct Dense {
  ad::Parameter weight;  // in x out
  ad::Parameter bias;    // 1 x out; empty when the layer has no bias
  bool has_bias = true;
};

struct Mlp {
  std::vector<Dense> layers;
};

struct MessageRound {
  Dense node_message;  // W_V on (h_u | h_vu), no bias
  Dense edge_message;  // W_E on (h_v | h_u), no bias
  Mlp node_update;
  Mlp edge_update;
};

/// All learnable weights. The parameter count depends on the architecture
/// only, never on the number of atoms or edges.
class PolicyParameters {
 public:
  PolicyConfig config;
  ad::Parameter bn_gamma;
  ad::Parameter bn_beta;
  ad::BatchNormState bn;
  Mlp node_embed;
  Mlp edge_embed;
  std::vector<MessageRound> rounds;
  Mlp head;

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();
  double grad_norm() const;

  /// Text checkpoint with a shape manifest; floats are hex-encoded so
  /// save/load is bit-exact.
  std::string serialize() const;
  static PolicyParameters deserialize(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static PolicyParameters load(const std::filesystem::path& path);
};

/// Weights ~ U(-b, b) with b = init_gain sqrt(3 / fan_in); biases zero; batch-norm
/// gamma 1, beta 0, EMA mean 0 and variance 1.
PolicyParameters init_params(const PolicyConfig& config, RngStream& rng);

/// Displacement means (N x dim), already multiplied by the displacement scale.
/// With `track_grads` the weights enter the tape as parameters so a later
/// backward fills their gradients.
ad::Var forward(PolicyParameters& params, const GraphState& state, ad::Tape& tape, ad::Mode mode,
                bool track_grads = true);

/// Forward without gradients.
Matrix predict(PolicyParameters& params, const GraphState& state, ad::Mode mode);

/// a = mu + sqrt(alpha) z with z standard normal.
Matrix sample_action(const Matrix& mu, double alpha, RngStream& rng);

/// sum_i [-(d/2) ln(2 pi) - (d/2) ln(alpha) - |a_i - mu_i|^2 / (2 alpha)].
double log_prob(const Matrix& actions, const Matrix& mu, double alpha);

}  // namespace rlrelax
