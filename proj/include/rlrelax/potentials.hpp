#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "rlrelax/core.hpp"
#include "rlrelax/neighbor.hpp"

namespace rlrelax {

/// Binary Lennard-Jones parameters, indexed by species pair. Defaults are the
/// Kob-Andersen A80B20 mixture in reduced units.
struct LjParams {
  enum class Truncation {
    Shift,   // V(r) - V(r_c) below r_c = cutoff_factor * sigma_pair
    Switch,  // V(r) S(r), S a C1 polynomial switch from onset to cutoff (times max sigma)
    Plain,   // V(r) below r_c = cutoff_factor * sigma_pair, unshifted
  };

  Matrix epsilon;
  Matrix sigma;
  double cutoff_factor = 2.5;
  Truncation truncation = Truncation::Switch;
  double switch_onset_factor = 2.0;

  static LjParams kob_andersen();
};

/// Stillinger-Weber silicon (eV, Angstrom).
struct SwParams {
  double epsilon = 2.1683;
  double sigma = 2.0951;
  double A = 7.0495;
  double B = 0.6022;
  double p = 4.0;
  double q = 0.0;
  double a = 1.80;
  double lambda = 21.0;
  double gamma = 1.20;
  double cos_theta0 = -1.0 / 3.0;

  double cutoff() const { return a * sigma; }
};

/// Generalized LJ for the coarse-grained C-S-H gel (kcal/mol, nm).
///
/// epsilon = k E sigma^3 with k = 0.0023324, E = 63.6 GPa and sigma = 5 nm,
/// i.e. 1.8543e-17 J per grain pair; times Avogadro / 4184 this is
/// 2668.9 kcal/mol.
struct CshParams {
  double epsilon = 2668.9;
  double sigma = 5.0;
  int alpha_exponent = 14;
  double cutoff_factor = 2.0;
};

double lj_pair_energy(double r, double eps, double sigma);
double csh_pair_energy(double r, const CshParams& p);
double sw_two_body(double r, const SwParams& p);
double sw_three_body(double r_ij, double r_ik, double cos_theta_jik, const SwParams& p);

/// Truncate-and-shift: pair_fn(r) - pair_fn(r_c) below r_c, zero beyond.
double truncated_pair(const std::function<double(double)>& pair_fn, double r, double r_c);

/// Energy, per-atom partition and forces of one configuration.
struct Evaluation {
  double energy = 0.0;
  Vector per_atom;
  Matrix forces;
};

class PotentialModel {
 public:
  using Params = std::variant<LjParams, SwParams, CshParams>;

  static PotentialModel binary_lj(LjParams params = LjParams::kob_andersen());
  static PotentialModel sw_silicon(SwParams params = {});
  static PotentialModel csh(CshParams params = {});

  /// "lj", "sw" or "csh".
  const std::string& system_tag() const { return tag_; }
  const std::vector<std::string>& species_names() const { return species_; }
  int n_species() const { return static_cast<int>(species_.size()); }
  const Params& params() const { return params_; }

  /// Largest interaction range over all species pairs.
  double cutoff() const { return cutoff_; }
  double equilibrium_length(int species_i, int species_j) const;
  /// Characteristic well depth (largest epsilon).
  double energy_scale() const;

  /// Per-atom energies over a graph built at (or beyond) `cutoff()`. Pair
  /// terms are split evenly between both atoms; an SW three-body term goes
  /// wholly to its apex atom.
  Vector per_atom_energies(const Configuration& config, const NeighborGraph& graph) const;
  double total_energy(const Configuration& config) const;
  Matrix forces(const Configuration& config) const;

  Evaluation evaluate(const Configuration& config, bool with_forces = true) const;
  Evaluation evaluate(const Configuration& config, const NeighborGraph& graph,
                      bool with_forces) const;

 private:
  PotentialModel(Params params, std::string tag, std::vector<std::string> species);
  void check_species(const Configuration& config) const;

  Params params_;
  std::string tag_;
  std::vector<std::string> species_;
  double cutoff_ = 0.0;
  Matrix equilibrium_;
};

/// Builds a model from its system tag with default parameters.
PotentialModel make_model(const std::string& system_tag);

}  // namespace rlrelax
