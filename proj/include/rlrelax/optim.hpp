#pragma once

#include <string>
#include <vector>

#include "rlrelax/core.hpp"
#include "rlrelax/potentials.hpp"

namespace rlrelax {

enum class Method { GradientDescent, Adam, Fire };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct FireParams {
  double dt_start = 0.01;
  double dt_max = 0.4;
  int n_min = 5;
  double f_alpha = 0.99;
  double f_dec = 0.5;
  double f_inc = 1.1;
  double alpha_start = 0.1;
  /// Mix velocities with the unit force of the whole N x d vector (default)
  /// or atom by atom.
  bool per_atom_mixing = false;
};

/// FIRE integrator state; velocities use unit mass.
struct FireState {
  Matrix velocities;
  double dt = 0.0;
  double alpha_mix = 0.0;
  int n_pos = 0;
  FireParams params;

  FireState() = default;
  FireState(Eigen::Index n_atoms, int dim, const FireParams& p);
};

struct AdamParams {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;
  AdamParams params;

  AdamState() = default;
  AdamState(Eigen::Index rows, Eigen::Index cols, const AdamParams& p);
};

/// x <- x + lr F.
Matrix gd_step(const Matrix& positions, const Matrix& forces, double lr);

/// Bias-corrected Adam on `gradients`; returns the update to add to the
/// parameters (already negated, i.e. x <- x + update).
Matrix adam_step(AdamState& state, const Matrix& gradients);

/// One FIRE step: P = F.v decides between velocity mixing (with possible dt
/// growth) and a reset; then v += dt F and x += dt v.
Matrix fire_step(FireState& state, const Matrix& positions, const Matrix& forces);

/// Per-method step sizes, defaulting to the LJ column of the baseline table.
struct MinimizerSettings {
  double gd_lr = 5e-4;
  AdamParams adam;
  FireParams fire;

  static MinimizerSettings for_system(const std::string& system_tag);
};

struct MinimizeResult {
  Configuration config;       // wrapped
  std::vector<double> energies;  // initial energy plus one entry per step
};

/// Runs `max_steps` steps of `method`. Throws NumericalError when the energy
/// becomes non-finite or rises by more than 1e6 x the energy scale in one step.
MinimizeResult minimize(const Configuration& config, const PotentialModel& model, Method method,
                        int max_steps, const MinimizerSettings& settings);

}  // namespace rlrelax
