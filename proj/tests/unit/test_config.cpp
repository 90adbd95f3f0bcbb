#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlrelax/commands.hpp"

using namespace rlrelax;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("rlrelax_cfg_" + name);
  fs::remove_all(dir);
  return dir;
}

// Small, fast settings for command tests.
std::map<std::string, std::string> tiny() {
  return {{"system.n_atoms", "12"},          {"sampler.n_structures", "4"},
          {"sampler.equilibration_steps", "200"}, {"sampler.gap_steps", "20"},
          {"minimize.max_steps", "30"},      {"train.epochs", "2"},
          {"train.horizon", "3"},            {"train.val_every", "1"},
          {"train.val_horizon", "3"},        {"adapt.epochs", "2"},
          {"adapt.horizon", "3"},            {"adapt.seeds", "2"},
          {"benchmark.structures", "2"},     {"policy.width", "8"}};
}

}  // namespace

TEST_CASE("defaults follow the tables") {
  const ExperimentConfig c = parse_experiment("");
  CHECK(c.system == "lj");
  CHECK(c.train.horizon == 15);
  CHECK(c.train.gamma == 0.9);
  CHECK(c.train.batch_size == 4);
  CHECK(c.train.grad_accum == 2);
  CHECK(c.train.lr == 0.005);
  CHECK(c.train.grad_clip == 0.1);
  CHECK(c.train.val_every == 20);
  CHECK(c.train.val_horizon == 20);
  CHECK(c.train.train_fraction == 0.75);
  CHECK(c.alpha == 1e-5);
  CHECK(c.policy.width == 48);
  CHECK(c.policy.displacement_scale == 2.0);
  CHECK(c.max_steps == 1000);
  CHECK(c.adapt.epochs == 1000);
  CHECK(c.adapt.seeds == 10);
  CHECK(c.inductivity_sizes == std::vector<int>{25, 50, 100, 250, 500, 1000});

  const ExperimentConfig sw = parse_experiment("[system]\nsystem = sw\n");
  CHECK(sw.n_atoms == 64);
  CHECK(sw.dataset.thermostat.temperature == 3500);
  CHECK(sw.minimizer.fire.dt_start == 0.5);
  CHECK(sw.minimizer.adam.lr == 0.1);
  CHECK(sw.policy.displacement_scale == 2.0);

  const ExperimentConfig csh = parse_experiment("", {{"system.system", "csh"}});
  CHECK(csh.max_steps == 2000);
  CHECK(csh.policy.displacement_scale == 5.0);
  CHECK(csh.dataset.thermostat.temperature == 1000);
  CHECK(make_model(csh).system_tag() == "csh");
}

TEST_CASE("files, sections and overrides") {
  const std::string ini =
      "# comment\n[system]\nn_atoms = 50\n[train]\nepochs = 7\nbaseline = drop\n[run]\nseed = 9\n";
  const ExperimentConfig c = parse_experiment(ini, {{"train.epochs", "11"}});
  CHECK(c.n_atoms == 50);
  CHECK(c.train.epochs == 11);
  CHECK(c.train.baseline == BaselineKind::EnergyDrop);
  CHECK(c.seed == 9);

  const ExperimentConfig again = parse_experiment(echo(c));
  CHECK(echo(again) == echo(c));
}

TEST_CASE("invalid configurations are rejected") {
  CHECK_THROWS_AS(parse_experiment("[system]\nn_atom = 5\n"), InputError);
  CHECK_THROWS_AS(parse_experiment("", {{"train.nope", "1"}}), InputError);
  CHECK_THROWS_AS(parse_experiment("", {{"train.epochs", "many"}}), InputError);
  CHECK_THROWS_AS(parse_experiment("", {{"train.gamma", "1.5"}}), InputError);
  CHECK_THROWS_AS(parse_experiment("", {{"system.system", "water"}}), InputError);
  CHECK_THROWS_AS(parse_experiment("", {{"system.density", "-1"}}), InputError);
  CHECK_THROWS_AS(parse_experiment("", {{"policy.aggregation", "max"}}), InputError);
  CHECK_THROWS_AS(load_experiment("/nonexistent/config.ini"), InputError);
}

TEST_CASE("every key is documented") {
  const std::string help = describe_keys();
  for (const auto& k : config_keys()) {
    CHECK(help.find(k.name) != std::string::npos);
  }
  CHECK(help.find("0.005") != std::string::npos);
}

TEST_CASE("minimize command") {
  const fs::path out = scratch("minimize");
  ExperimentConfig c = parse_experiment("", tiny());
  CHECK(run_command("generate", c, out / "gen") == kExitOk);
  CHECK(fs::exists(out / "gen" / "manifest.csv"));
  CHECK(fs::exists(out / "gen" / "generate.svg"));
  CHECK(fs::exists(out / "gen" / "config.echo"));
  CHECK(count_lines(out / "gen" / "manifest.csv") == 5);

  c.input = (out / "gen" / "structures" / "struct_0000.xyz").string();
  c.max_steps = 0;
  REQUIRE(run_command("minimize", c, out / "m0") == kExitOk);
  CHECK(count_lines(out / "m0" / "trace.csv") == 2);
  const PotentialModel m = make_model(c);
  const double e0 = m.total_energy(read_config(c.input, m.species_names()));
  std::ifstream trace(out / "m0" / "trace.csv");
  std::string header, row;
  std::getline(trace, header);
  std::getline(trace, row);
  CHECK(std::stod(row.substr(row.find(',') + 1)) == doctest::Approx(e0).epsilon(1e-12));

  c.max_steps = 30;
  CHECK(run_command("minimize", c, out / "m30") == kExitOk);
  CHECK(count_lines(out / "m30" / "trace.csv") == 32);
  CHECK(fs::exists(out / "m30" / "final.xyz"));
  CHECK(fs::exists(out / "m30" / "trace.svg"));

  c.input = (out / "missing.xyz").string();
  CHECK(run_command("minimize", c, out / "bad") == kExitConfig);
  CHECK(run_command("nonsense", c, out / "bad2") == kExitConfig);
  fs::remove_all(out);
}

TEST_CASE("train, benchmark, adapt and inductivity commands") {
  const fs::path out = scratch("pipeline");
  ExperimentConfig c = parse_experiment("", tiny());
  REQUIRE(run_command("train", c, out / "train") == kExitOk);
  CHECK(count_lines(out / "train" / "train_log.csv") == 4);
  CHECK(fs::exists(out / "train" / "checkpoints" / "final.ckpt"));
  CHECK(fs::exists(out / "train" / "checkpoints" / "epoch_00000.ckpt"));
  CHECK(fs::exists(out / "train" / "validation.svg"));
  CHECK(count_lines(out / "train" / "split.csv") == 5);

  // missing checkpoint is a configuration error
  CHECK(run_command("benchmark", c, out / "nockpt") == kExitConfig);

  c.checkpoint = (out / "train" / "checkpoints" / "final.ckpt").string();
  REQUIRE(run_command("benchmark", c, out / "bench") == kExitOk);
  CHECK(count_lines(out / "bench" / "benchmark.csv") == 5);
  CHECK(count_lines(out / "bench" / "benchmark_structures.csv") == 1 + 2 * 4);
  CHECK(fs::exists(out / "bench" / "benchmark.svg"));
  const std::string table = slurp(out / "bench" / "benchmark.csv");
  for (const char* method : {"lj,gd,", "lj,adam,", "lj,fire,", "lj,rl,"}) {
    CHECK(table.find(method) != std::string::npos);
  }

  c.target = (out / "bench" / "structures" / "structures" / "struct_0000.xyz").string();
  REQUIRE(run_command("adapt", c, out / "adapt") == kExitOk);
  CHECK(count_lines(out / "adapt" / "adapt_trace.csv") == 1 + 2 * 2);
  CHECK(fs::exists(out / "adapt" / "best.xyz"));

  c.inductivity_sizes = {12, 16};
  c.inductivity_structures = 2;
  REQUIRE(run_command("inductivity", c, out / "ind") == kExitOk);
  CHECK(count_lines(out / "ind" / "inductivity.csv") == 3);
  CHECK(fs::exists(out / "ind" / "inductivity.svg"));
  fs::remove_all(out);
}
