#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rlrelax/run_config.hpp"

namespace rlrelax {

/// Exit codes shared by every subcommand.
enum ExitCode { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3 };

/// Random packing, FIRE pre-relaxation, thermostat equilibration and sampling
/// of `count` structures with `n_atoms` atoms each. With a non-empty
/// `out_dir` the structures and manifest are written there.
std::vector<Configuration> make_structures(const ExperimentConfig& config,
                                           const PotentialModel& model, int n_atoms, int count,
                                           RngStream& rng,
                                           const std::filesystem::path& out_dir = {});

/// Policy architecture matching the model's feature widths.
PolicyConfig policy_config_for(const ExperimentConfig& config, const PotentialModel& model);

/// Loads a checkpoint and checks it fits the model.
PolicyParameters load_policy(const std::string& path, const PotentialModel& model);

void cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_minimize(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_train(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_adapt(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_benchmark(const ExperimentConfig& config, const std::filesystem::path& out);
void cmd_inductivity(const ExperimentConfig& config, const std::filesystem::path& out);

const std::vector<std::string>& command_names();

/// Creates `out`, writes config.echo and dispatches. Errors are reported as
/// one line on stderr and mapped to exit codes.
int run_command(const std::string& name, const ExperimentConfig& config,
                const std::filesystem::path& out);

}  // namespace rlrelax
