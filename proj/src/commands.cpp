#include "rlrelax/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "rlrelax/graph.hpp"
#include "rlrelax/svg.hpp"

namespace fs = std::filesystem;

namespace rlrelax {

namespace {

// Stream ids under the master seed; each command draws from its own.
enum Stream : std::uint64_t {
  kGenerate = 1,
  kPolicyInit = 2,
  kTrain = 3,
  kBenchmarkData = 4,
  kAdapt = 5,
  kInductivity = 6,
  kTrainData = 7,
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::string num(double v) { return fmt::format("{}", v); }

std::vector<Configuration> structures_from(const std::string& dir, const ExperimentConfig& config,
                                           const PotentialModel& model, int n_atoms, int count,
                                           RngStream rng, const fs::path& write_to) {
  if (!dir.empty()) return load_dataset(dir, model);
  return make_structures(config, model, n_atoms, count, rng, write_to);
}

struct MethodStats {
  double min = std::numeric_limits<double>::infinity();
  double mean = 0.0;
};

MethodStats stats(const std::vector<double>& v) {
  MethodStats s;
  for (double e : v) {
    s.min = std::min(s.min, e);
    s.mean += e;
  }
  if (!v.empty()) s.mean /= static_cast<double>(v.size());
  return s;
}

AdaptConfig adapt_config(const ExperimentConfig& c, int threads) {
  AdaptConfig a = c.adapt;
  a.gamma = c.train.gamma;
  a.alpha = c.alpha;
  a.baseline = c.train.baseline;
  a.graph_cutoff = c.train.graph_cutoff;
  a.threads = threads;
  return a;
}

struct ClassicalRuns {
  // [structure][method] final energy, traces of structure 0.
  std::vector<std::array<double, 3>> final_energy;
  std::array<std::vector<double>, 3> first_traces;
};

constexpr std::array<Method, 3> kMethods{Method::GradientDescent, Method::Adam, Method::Fire};

ClassicalRuns run_classical(const std::vector<Configuration>& structures,
                            const PotentialModel& model, const ExperimentConfig& c) {
  ClassicalRuns r;
  r.final_energy.resize(structures.size());
  std::vector<std::array<std::vector<double>, 3>> traces(structures.size());
  parallel_for(static_cast<int>(structures.size()), c.threads, [&](int i) {
    for (std::size_t m = 0; m < kMethods.size(); ++m) {
      auto res = minimize(structures[static_cast<std::size_t>(i)], model, kMethods[m], c.max_steps,
                          c.minimizer);
      r.final_energy[static_cast<std::size_t>(i)][m] = res.energies.back();
      if (i == 0) traces[0][m] = std::move(res.energies);
    }
  });
  if (!traces.empty()) r.first_traces = traces[0];
  return r;
}

std::vector<double> step_axis(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
  return x;
}

}  // namespace

std::vector<Configuration> make_structures(const ExperimentConfig& c, const PotentialModel& model,
                                           int n_atoms, int count, RngStream& rng,
                                           const fs::path& out_dir) {
  const int d = 3;
  const double side = std::cbrt(static_cast<double>(n_atoms) / c.density);
  std::map<int, double> mix;
  for (std::size_t s = 0; s < c.species_fraction.size(); ++s) {
    mix[static_cast<int>(s)] = c.species_fraction[s];
  }
  if (static_cast<int>(mix.size()) > model.n_species()) {
    throw InputError(fmt::format("config: {} species fractions for a {}-species model", mix.size(),
                                 model.n_species()));
  }
  Configuration start = random_pack(n_atoms, SimulationBox::cubic(side, d), mix, c.min_dist, rng);
  if (c.prerelax_steps > 0) {
    start = minimize(start, model, Method::Fire, c.prerelax_steps, c.minimizer).config;
  }
  DatasetSpec spec = c.dataset;
  spec.n_structures = count;
  return sample_dataset(start, model, spec, rng, out_dir);
}

PolicyConfig policy_config_for(const ExperimentConfig& c, const PotentialModel& model) {
  PolicyConfig p = c.policy;
  p.node_features = node_feature_width(model);
  p.edge_features = kEdgeFeatureWidth;
  p.dim = 3;
  return p;
}

PolicyParameters load_policy(const std::string& path, const PotentialModel& model) {
  if (path.empty()) throw InputError("config: adapt.checkpoint is required");
  PolicyParameters p = PolicyParameters::load(path);
  if (p.config.node_features != node_feature_width(model) || p.config.dim != 3) {
    throw InputError(fmt::format("checkpoint {} was trained for {} node features, model has {}",
                                 path, p.config.node_features, node_feature_width(model)));
  }
  return p;
}

void cmd_generate(const ExperimentConfig& c, const fs::path& out) {
  const PotentialModel model = make_model(c);
  RngStream rng = RngStream(c.seed).split(kGenerate);
  const auto structures =
      make_structures(c, model, c.n_atoms, c.dataset.n_structures, rng, out);
  Series s{"energy per atom", {}, {}};
  for (std::size_t i = 0; i < structures.size(); ++i) {
    s.x.push_back(static_cast<double>(i));
    s.y.push_back(model.total_energy(structures[i]) / static_cast<double>(structures[i].size()));
  }
  write_line_plot(out / "generate.svg", {s}, "Sampled structures", "structure", "U / N");
  fmt::print("generated {} structures in {}\n", structures.size(), out.string());
}

void cmd_minimize(const ExperimentConfig& c, const fs::path& out) {
  if (c.input.empty()) throw InputError("config: minimize.input is required");
  const PotentialModel model = make_model(c);
  const Configuration start = read_config(c.input, model.species_names());
  const Method method = parse_method(c.method);
  const MinimizeResult res = minimize(start, model, method, c.max_steps, c.minimizer);
  auto csv = open_out(out / "trace.csv");
  csv << "step,energy\n";
  for (std::size_t i = 0; i < res.energies.size(); ++i) {
    csv << i << ',' << num(res.energies[i]) << '\n';
  }
  write_config(res.config, out / "final.xyz", model.species_names(), model.system_tag());
  write_line_plot(out / "trace.svg", {{method_name(method), step_axis(res.energies.size()),
                                       res.energies}},
                  "Minimization", "step", "energy");
  fmt::print("{}: {} -> {} after {} steps\n", method_name(method), num(res.energies.front()),
             num(res.energies.back()), res.energies.size() - 1);
}

void cmd_train(const ExperimentConfig& c, const fs::path& out) {
  const PotentialModel model = make_model(c);
  const RngStream master(c.seed);
  const auto dataset = structures_from(c.train_dataset, c, model, c.n_atoms,
                                       c.dataset.n_structures, master.split(kTrainData),
                                       c.train_dataset.empty() ? out / "dataset" : fs::path{});
  if (dataset.empty()) throw InputError("train: the dataset is empty");
  RngStream init_rng = master.split(kPolicyInit);
  const PolicyParameters init = init_params(policy_config_for(c, model), init_rng);
  TrainConfig tc = c.train;
  tc.alpha = c.alpha;

  fs::create_directories(out / "checkpoints");
  auto hook = [&](int epoch, const PolicyParameters& p, double metric) {
    p.save(out / "checkpoints" / fmt::format("epoch_{:05d}.ckpt", epoch));
    fmt::print("epoch {:5d}  validation <E_T - E_0> = {}\n", epoch, num(metric));
  };
  RngStream train_rng = master.split(kTrain);
  const TrainResult res = train(init, dataset, model, tc, c.minimizer.fire, train_rng, hook);
  res.params.save(out / "checkpoints" / "final.ckpt");

  auto csv = open_out(out / "train_log.csv");
  csv << "epoch,mean_return,mean_baseline,loss,grad_norm,val_metric\n";
  Series val{"validation <E_T - E_0>", {}, {}};
  for (const auto& r : res.log) {
    csv << r.epoch << ',' << num(r.mean_return) << ',' << num(r.mean_baseline) << ','
        << num(r.loss) << ',' << num(r.grad_norm) << ',' << num(r.val_metric) << '\n';
    if (std::isfinite(r.val_metric)) {
      val.x.push_back(r.epoch);
      val.y.push_back(r.val_metric);
    }
  }
  auto split = open_out(out / "split.csv");
  split << "index,role\n";
  for (auto i : res.train_index) split << i << ",train\n";
  for (auto i : res.val_index) split << i << ",validation\n";
  write_line_plot(out / "validation.svg", {val}, "Validation", "epoch", "<E_T - E_0>");
}

void cmd_adapt(const ExperimentConfig& c, const fs::path& out) {
  const PotentialModel model = make_model(c);
  const PolicyParameters params = load_policy(c.checkpoint, model);
  if (c.target.empty()) throw InputError("config: adapt.target is required");
  const Configuration target = read_config(c.target, model.species_names());
  RngStream rng = RngStream(c.seed).split(kAdapt);
  const AdaptResult res =
      adapt(params, target, model, adapt_config(c, c.threads), c.minimizer.fire, rng);

  auto csv = open_out(out / "adapt_trace.csv");
  csv << "seed,epoch,target_energy,best_energy\n";
  std::vector<Series> plot;
  for (std::size_t s = 0; s < res.runs.size(); ++s) {
    const auto& run = res.runs[s];
    for (std::size_t e = 0; e < run.best_energy.size(); ++e) {
      csv << s << ',' << e + 1 << ',' << num(run.target_energy[e]) << ','
          << num(run.best_energy[e]) << '\n';
    }
    if (s < 6) plot.push_back({fmt::format("seed {}", s), step_axis(run.best_energy.size()),
                               run.best_energy});
  }
  write_config(res.best, out / "best.xyz", model.species_names(), model.system_tag());
  write_line_plot(out / "adapt.svg", plot, "Adaptation", "epoch", "best energy");
  fmt::print("best energy {} (start {})\n", num(res.best_energy),
             num(model.total_energy(target)));
}

void cmd_benchmark(const ExperimentConfig& c, const fs::path& out) {
  const PotentialModel model = make_model(c);
  const RngStream master(c.seed);
  auto structures = structures_from(c.benchmark_dataset, c, model, c.n_atoms,
                                    c.benchmark_structures, master.split(kBenchmarkData),
                                    c.benchmark_dataset.empty() ? out / "structures" : fs::path{});
  if (static_cast<int>(structures.size()) > c.benchmark_structures) {
    structures.resize(static_cast<std::size_t>(c.benchmark_structures));
  }
  if (structures.empty()) throw InputError("benchmark: no structures");

  const ClassicalRuns classical = run_classical(structures, model, c);
  std::vector<std::string> names;
  std::vector<std::vector<double>> energies;
  for (std::size_t m = 0; m < kMethods.size(); ++m) {
    names.push_back(method_name(kMethods[m]));
    std::vector<double> e;
    for (const auto& row : classical.final_energy) e.push_back(row[m]);
    energies.push_back(std::move(e));
  }

  std::vector<double> rl_first_trace;
  if (c.benchmark_rl) {
    const PolicyParameters params = load_policy(c.checkpoint, model);
    std::vector<double> e(structures.size());
    std::vector<std::vector<double>> best_traces(structures.size());
    const RngStream adapt_rng = master.split(kAdapt);
    parallel_for(static_cast<int>(structures.size()), c.threads, [&](int i) {
      RngStream r = adapt_rng.split(static_cast<std::uint64_t>(i));
      const AdaptResult res = adapt(params, structures[static_cast<std::size_t>(i)], model,
                                    adapt_config(c, 1), c.minimizer.fire, r);
      e[static_cast<std::size_t>(i)] = res.best_energy;
      std::vector<double> trace(res.runs.front().best_energy.size(),
                                std::numeric_limits<double>::infinity());
      for (const auto& run : res.runs) {
        for (std::size_t k = 0; k < trace.size(); ++k) trace[k] = std::min(trace[k], run.best_energy[k]);
      }
      best_traces[static_cast<std::size_t>(i)] = std::move(trace);
    });
    names.push_back("rl");
    energies.push_back(std::move(e));
    rl_first_trace = best_traces.front();
  }

  auto table = open_out(out / "benchmark.csv");
  table << "system,method,min,mean\n";
  for (std::size_t m = 0; m < names.size(); ++m) {
    const MethodStats s = stats(energies[m]);
    table << model.system_tag() << ',' << names[m] << ',' << num(s.min) << ',' << num(s.mean)
          << '\n';
  }
  auto per = open_out(out / "benchmark_structures.csv");
  per << "structure,method,energy\n";
  for (std::size_t i = 0; i < structures.size(); ++i) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      per << i << ',' << names[m] << ',' << num(energies[m][i]) << '\n';
    }
  }
  std::vector<Series> plot;
  for (std::size_t m = 0; m < kMethods.size(); ++m) {
    plot.push_back({names[m], step_axis(classical.first_traces[m].size()),
                    classical.first_traces[m]});
  }
  if (!rl_first_trace.empty()) {
    plot.push_back({"rl (best per epoch)", step_axis(rl_first_trace.size()), rl_first_trace});
  }
  write_line_plot(out / "benchmark.svg", plot, "Structure 0", "step / epoch", "energy");
  for (std::size_t m = 0; m < names.size(); ++m) {
    const MethodStats s = stats(energies[m]);
    fmt::print("{:<5} min {:>14.6f}  mean {:>14.6f}\n", names[m], s.min, s.mean);
  }
}

void cmd_inductivity(const ExperimentConfig& c, const fs::path& out) {
  const PotentialModel model = make_model(c);
  const PolicyParameters params = load_policy(c.checkpoint, model);
  const RngStream master = RngStream(c.seed).split(kInductivity);
  auto csv = open_out(out / "inductivity.csv");
  csv << "n_atoms,gd_min,gd_mean,adam_min,adam_mean,fire_min,fire_mean,rl_min,rl_mean\n";
  std::array<Series, 4> plot{Series{"gd", {}, {}}, Series{"adam", {}, {}}, Series{"fire", {}, {}},
                             Series{"rl", {}, {}}};
  for (int n : c.inductivity_sizes) {
    RngStream data_rng = master.split(static_cast<std::uint64_t>(n));
    const auto structures =
        make_structures(c, model, n, c.inductivity_structures, data_rng,
                        out / fmt::format("structures_{}", n));
    const ClassicalRuns classical = run_classical(structures, model, c);
    std::vector<double> rl(structures.size());
    const RngStream adapt_rng = data_rng.split(1);
    parallel_for(static_cast<int>(structures.size()), c.threads, [&](int i) {
      RngStream r = adapt_rng.split(static_cast<std::uint64_t>(i));
      rl[static_cast<std::size_t>(i)] = adapt(params, structures[static_cast<std::size_t>(i)],
                                              model, adapt_config(c, 1), c.minimizer.fire, r)
                                            .best_energy;
    });
    csv << n;
    for (std::size_t m = 0; m < 4; ++m) {
      std::vector<double> per_atom;
      for (std::size_t i = 0; i < structures.size(); ++i) {
        const double e = m < 3 ? classical.final_energy[i][m] : rl[i];
        per_atom.push_back(e / static_cast<double>(n));
      }
      const MethodStats s = stats(per_atom);
      csv << ',' << num(s.min) << ',' << num(s.mean);
      plot[m].x.push_back(n);
      plot[m].y.push_back(s.mean);
    }
    csv << '\n';
    csv.flush();
    fmt::print("N = {} done\n", n);
  }
  write_line_plot(out / "inductivity.svg", {plot.begin(), plot.end()}, "Inductivity", "atoms",
                  "mean U / N");
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"generate", "minimize", "train",
                                              "adapt",    "benchmark", "inductivity"};
  return names;
}

int run_command(const std::string& name, const ExperimentConfig& config, const fs::path& out) {
  try {
    fs::create_directories(out);
    open_out(out / "config.echo") << echo(config);
    if (name == "generate") cmd_generate(config, out);
    else if (name == "minimize") cmd_minimize(config, out);
    else if (name == "train") cmd_train(config, out);
    else if (name == "adapt") cmd_adapt(config, out);
    else if (name == "benchmark") cmd_benchmark(config, out);
    else if (name == "inductivity") cmd_inductivity(config, out);
    else throw InputError("unknown command '" + name + "'");
  } catch (const InputError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    fmt::print(stderr, "numerical failure: {}\n", e.what());
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace rlrelax
