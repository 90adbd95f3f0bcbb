#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rlrelax/optim.hpp"
#include "rlrelax/policy.hpp"
#include "rlrelax/rl.hpp"
#include "rlrelax/sampler.hpp"

namespace rlrelax {

/// Every tunable of a run. Defaults depend on `system`; see defaults_for.
struct ExperimentConfig {
  std::string system = "lj";

  // [system]
  int n_atoms = 100;
  double density = 1.2;                        // atoms per unit volume
  std::vector<double> species_fraction{0.8, 0.2};
  std::string lj_truncation = "switch";
  double lj_cutoff_factor = 2.5;
  CshParams csh;
  double min_dist = 0.75;                      // random packing exclusion
  int prerelax_steps = 300;                    // FIRE steps before the thermostat

  // [sampler]
  DatasetSpec dataset;

  // [minimize]
  MinimizerSettings minimizer;
  int max_steps = 1000;
  std::string method = "fire";
  std::string input;                           // extended-XYZ start structure

  // [policy]
  PolicyConfig policy;
  double alpha = 1e-5;

  // [train]
  TrainConfig train;
  std::string train_dataset;                   // directory with manifest.csv

  // [adapt]
  AdaptConfig adapt;
  std::string checkpoint;
  std::string target;                          // extended-XYZ target for `adapt`

  // [benchmark]
  std::string benchmark_dataset;
  int benchmark_structures = 10;
  bool benchmark_rl = true;

  // [inductivity]
  std::vector<int> inductivity_sizes{25, 50, 100, 250, 500, 1000};
  int inductivity_structures = 10;

  // [run]
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Paper-table defaults for "lj", "sw" or "csh".
ExperimentConfig defaults_for(const std::string& system);

struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;

  std::string path() const { return section + "." + name; }
};

/// All recognised keys in a stable order.
const std::vector<ConfigKey>& config_keys();

/// Builds a config from INI text plus "section.key" overrides (applied after
/// the file). The system is resolved first so per-system defaults apply to
/// every key not given. Throws InputError on unknown keys or bad values.
ExperimentConfig parse_experiment(const std::string& ini_text,
                                  const std::map<std::string, std::string>& overrides = {});

ExperimentConfig load_experiment(const std::string& path,
                                 const std::map<std::string, std::string>& overrides = {});

/// Effective configuration as INI text; parse_experiment(echo(c)) == c.
std::string echo(const ExperimentConfig& config);

/// Key listing with defaults for every system, for --help.
std::string describe_keys();

/// Potential model described by the config.
PotentialModel make_model(const ExperimentConfig& config);

}  // namespace rlrelax
