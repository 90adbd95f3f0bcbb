// rlrelax: structure generation, classical minimization and policy-gradient
// relaxation from the command line.

#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rlrelax/commands.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  std::vector<std::string> sets;
  long long seed = -1;
  int threads = 0;
};

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw rlrelax::InputError("--set expects section.key=value, got '" + s + "'");
    }
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy minimization of atomic structures with a graph policy trained by REINFORCE"};
  app.footer("\n" + rlrelax::describe_keys());
  app.require_subcommand(1);

  Options opt;
  std::string chosen;
  for (const auto& name : rlrelax::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", opt.config, "INI configuration file");
    sub->add_option("-o,--out", opt.out, "Output directory")->capture_default_str();
    sub->add_option("-s,--seed", opt.seed, "Master seed (overrides run.seed)");
    sub->add_option("-t,--threads", opt.threads, "Worker threads (overrides run.threads)");
    sub->add_option("--set", opt.sets, "Override a key, e.g. --set train.epochs=10");
    sub->callback([&chosen, name] { chosen = name; });
  }
  app.get_subcommand("generate")->description("Sample a dataset of thermal structures");
  app.get_subcommand("minimize")->description("Minimize one structure with gd, adam or fire");
  app.get_subcommand("train")->description("Train a policy on a dataset");
  app.get_subcommand("adapt")->description("Refine a trained policy on one target structure");
  app.get_subcommand("benchmark")->description("Compare minimizers on a set of structures");
  app.get_subcommand("inductivity")->description("Evaluate a policy across system sizes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? rlrelax::kExitOk : rlrelax::kExitConfig;
  }

  rlrelax::ExperimentConfig config;
  try {
    auto overrides = parse_sets(opt.sets);
    if (opt.seed >= 0) overrides["run.seed"] = std::to_string(opt.seed);
    if (opt.threads > 0) overrides["run.threads"] = std::to_string(opt.threads);
    config = opt.config.empty() ? rlrelax::parse_experiment("", overrides)
                                : rlrelax::load_experiment(opt.config, overrides);
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return rlrelax::kExitConfig;
  }
  return rlrelax::run_command(chosen, config, opt.out);
}
