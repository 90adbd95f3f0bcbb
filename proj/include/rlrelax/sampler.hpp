#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "rlrelax/core.hpp"
#include "rlrelax/potentials.hpp"

namespace rlrelax {

struct ThermostatSpec {
  double temperature = 2.0;  // in the model's temperature unit
  double friction = 1.0;     // 1 / time
  double dt = 0.003;
};

/// Unit bookkeeping for dynamics: kinetic energy is 1/2 m v^2 in the model's
/// energy unit and k_B T shares that unit.
struct DynamicsUnits {
  double mass = 1.0;
  double boltzmann = 1.0;

  static DynamicsUnits for_system(const std::string& system_tag);
};

/// Places `n` atoms uniformly at random, rejecting any site closer than
/// `min_dist` (minimum image) to an already placed atom. Species counts are the
/// largest-remainder rounding of `n * fraction`, assigned in species order.
Configuration random_pack(int n, const SimulationBox& box, const std::map<int, double>& species_mix,
                          double min_dist, RngStream& rng, int max_attempts_per_atom = 20000);

/// Phase-space point of a Langevin run.
struct DynamicsState {
  Configuration config;
  Matrix velocities;
};

struct NvtResult {
  DynamicsState state;
  double tail_temperature = 0.0;  // mean kinetic temperature over the last 10% of steps
};

/// Draws Maxwell-Boltzmann velocities at `temperature` with zero net momentum.
Matrix thermal_velocities(const Configuration& config, double temperature,
                          const DynamicsUnits& units, RngStream& rng);

double kinetic_temperature(const Matrix& velocities, const DynamicsUnits& units);

/// Langevin dynamics with BAOAB splitting (velocity Verlet when friction = 0).
/// Throws NumericalError if |U| exceeds 1e3 (|U_0| + N * energy scale).
NvtResult nvt_run(const DynamicsState& start, const PotentialModel& model,
                  const ThermostatSpec& spec, const DynamicsUnits& units, long steps,
                  RngStream& rng);

/// Convenience overload starting from thermal velocities.
NvtResult nvt_run(const Configuration& config, const PotentialModel& model,
                  const ThermostatSpec& spec, long steps, RngStream& rng);

struct DatasetSpec {
  int n_structures = 100;
  long equilibration_steps = 10000;
  long gap_steps = 1000;
  ThermostatSpec thermostat;
};

struct DatasetEntry {
  std::filesystem::path path;  // relative to the output directory
  double energy = 0.0;
};

/// Equilibrates `start` and then samples `n_structures` configurations
/// `gap_steps` apart. When `out_dir` is non-empty writes
/// structures/struct_XXXX.xyz and manifest.csv there.
std::vector<Configuration> sample_dataset(const Configuration& start, const PotentialModel& model,
                                          const DatasetSpec& spec, RngStream& rng,
                                          const std::filesystem::path& out_dir = {});

/// Reads manifest.csv (index,path,energy,per_atom_energy) and the structures
/// it lists.
std::vector<Configuration> load_dataset(const std::filesystem::path& dir,
                                        const PotentialModel& model);

}  // namespace rlrelax
