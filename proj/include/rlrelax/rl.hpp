#pragma once

#include <functional>
#include <vector>

#include "rlrelax/autodiff.hpp"
#include "rlrelax/core.hpp"
#include "rlrelax/optim.hpp"
#include "rlrelax/policy.hpp"
#include "rlrelax/potentials.hpp"

namespace rlrelax {

/// One episode of the relaxation MDP. `configs` and `energies` hold the T+1
/// visited states (fewer when the episode was cut short).
struct Trajectory {
  std::vector<Configuration> configs;
  std::vector<GraphState> states;  // input state of every step taken
  std::vector<double> energies;
  std::vector<Matrix> actions;
  std::vector<double> log_probs;  // log pi(a^t | S^t) at rollout time
  std::vector<double> rewards;    // R^t = E_t - E_{t+1}
  std::vector<double> returns;    // discounted, see discounted_returns
  bool truncated = false;         // stopped early on a non-finite energy

  int steps() const { return static_cast<int>(actions.size()); }
};

struct RolloutOptions {
  int horizon = 15;
  double gamma = 0.9;
  double alpha = 1e-5;
  /// Sample a ~ N(mu, alpha I); otherwise take a = mu.
  bool stochastic = true;
  ad::Mode mode = ad::Mode::Train;
  /// Graph cutoff; 0 means the potential cutoff.
  double graph_cutoff = 0.0;
};

/// Runs the policy from `start`: each step builds the graph state, displaces
/// every atom by its action, wraps, and re-evaluates the energy.
Trajectory rollout(PolicyParameters& params, const Configuration& start,
                   const PotentialModel& model, const RolloutOptions& options, RngStream& rng);

/// D^t = R^t + gamma D^{t+1}, with D^{T-1} = R^{T-1}.
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

enum class BaselineKind { DiscountedReturn, EnergyDrop, None };

BaselineKind parse_baseline(const std::string& name);
std::string baseline_name(BaselineKind kind);

/// FIRE run for `horizon` steps from `start`. DiscountedReturn gives the
/// discounted return from t = 0 and EnergyDrop gives E_0 - E_T. A diverging
/// FIRE run yields 0.
double fire_baseline(const Configuration& start, const PotentialModel& model, int horizon,
                     double gamma, const FireParams& fire, BaselineKind kind);

/// -sum_t (D^t - b) log pi(a^t | S^t) built on `tape` with fresh forward passes
/// (advantages enter as constants). The batch-norm running statistics are
/// left untouched.
ad::Var reinforce_loss(PolicyParameters& params, const Trajectory& traj, double baseline,
                       const PotentialModel& model, const RolloutOptions& options, ad::Tape& tape);

/// Adds weight * d(loss)/d(theta) into the parameter gradients, one step per
/// tape so memory does not grow with the horizon. Returns weight * loss.
double accumulate_policy_gradient(PolicyParameters& params, const Trajectory& traj,
                                  double baseline, const PotentialModel& model,
                                  const RolloutOptions& options, double weight);

/// Scales all gradients so their global norm is at most `max_norm`; returns
/// the norm before clipping.
double clip_grad_norm(PolicyParameters& params, double max_norm);

/// Adam over all policy parameters.
class PolicyOptimizer {
 public:
  PolicyOptimizer(PolicyParameters& params, double lr);
  void step(PolicyParameters& params);

 private:
  std::vector<AdamState> states_;
};

struct TrainConfig {
  int epochs = 200;
  int horizon = 15;
  double gamma = 0.9;
  int batch_size = 4;
  int grad_accum = 2;
  double lr = 0.005;
  double grad_clip = 0.1;
  int val_every = 20;
  int val_horizon = 20;
  double train_fraction = 0.75;
  double alpha = 1e-5;
  BaselineKind baseline = BaselineKind::DiscountedReturn;
  bool sampled_validation = false;
  double graph_cutoff = 0.0;
};

struct TrainLogRow {
  int epoch = 0;
  double mean_return = 0.0;   // mean D^0 over the epoch's trajectories
  double mean_baseline = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;     // before clipping
  double val_metric = 0.0;    // NaN when no validation ran this epoch
};

struct TrainResult {
  PolicyParameters params;
  std::vector<TrainLogRow> log;          // one row per epoch, epoch 0 = before any update
  std::vector<std::size_t> train_index;  // dataset indices used for training
  std::vector<std::size_t> val_index;
};

/// Called after each validation with (epoch, parameters, metric).
using ValidationHook = std::function<void(int, const PolicyParameters&, double)>;

/// Mean of E_T - E_0 over `structures` with deterministic actions (a = mu) and
/// eval-mode batch norm unless `sampled` is set.
double validate(PolicyParameters& params, const std::vector<Configuration>& structures,
                const PotentialModel& model, int horizon, double alpha, bool sampled,
                RngStream& rng, double graph_cutoff = 0.0);

TrainResult train(const PolicyParameters& init, const std::vector<Configuration>& dataset,
                  const PotentialModel& model, const TrainConfig& cfg,
                  const FireParams& fire, RngStream& rng, const ValidationHook& hook = {});

struct AdaptConfig {
  int epochs = 1000;
  int horizon = 15;
  int seeds = 10;
  double gamma = 0.9;
  double lr = 0.005;
  double grad_clip = 0.1;
  double alpha = 1e-5;
  BaselineKind baseline = BaselineKind::DiscountedReturn;
  double graph_cutoff = 0.0;
  int threads = 1;
};

struct AdaptRun {
  std::vector<double> target_energy;  // energy of the next target after each epoch
  std::vector<double> best_energy;    // running minimum over visited states
  int restarts = 0;
  Configuration best;
};

struct AdaptResult {
  Configuration best;
  double best_energy = 0.0;
  std::vector<AdaptRun> runs;  // one per seed
};

/// Per seed: starts from a copy of `params`, alternates a rollout from the
/// current target with a policy-gradient update, and moves the target to the
/// lowest-energy state among the last three of the rollout. A truncated
/// rollout sends the target back to the best state seen so far.
AdaptResult adapt(const PolicyParameters& params, const Configuration& target,
                  const PotentialModel& model, const AdaptConfig& cfg, const FireParams& fire,
                  RngStream& rng);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// rethrown on the caller's thread (the first by index).
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace rlrelax
