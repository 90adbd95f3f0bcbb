#include "rlrelax/run_config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace rlrelax {

namespace {

std::string to_text(double v) { return fmt::format("{}", v); }
std::string to_text(int v) { return std::to_string(v); }
std::string to_text(long v) { return std::to_string(v); }
std::string to_text(std::uint64_t v) { return std::to_string(v); }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(const std::string& v) { return v; }
std::string to_text(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + to_text(v[i]);
  return out;
}
std::string to_text(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + std::to_string(v[i]);
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text) {
  throw InputError(fmt::format("config: bad value '{}' for {}", text, key));
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) bad_value(key, text);
  return v;
}

template <typename T>
void from_text(T& out, const std::string& text, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes") out = true;
    else if (text == "false" || text == "0" || text == "no") out = false;
    else bad_value(key, text);
  } else if constexpr (std::is_same_v<T, std::string>) {
    out = text;
  } else if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<int>>) {
    std::istringstream in(text);
    T v;
    std::string tok;
    while (in >> tok) v.push_back(parse_number<typename T::value_type>(tok, key));
    out = std::move(v);
  } else {
    out = parse_number<T>(text, key);
  }
}

template <typename F>
ConfigKey field(std::string section, std::string name, std::string help, F ref) {
  using T = std::remove_reference_t<decltype(ref(std::declval<ExperimentConfig&>()))>;
  const std::string path = section + "." + name;
  return ConfigKey{std::move(section), std::move(name), std::move(help),
                   [ref](const ExperimentConfig& c) {
                     return to_text(ref(const_cast<ExperimentConfig&>(c)));
                   },
                   [ref, path](ExperimentConfig& c, const std::string& v) {
                     T& slot = ref(c);
                     from_text(slot, v, path);
                   }};
}

std::vector<ConfigKey> build_keys() {
  using C = ExperimentConfig;
  std::vector<ConfigKey> k;
  k.push_back({"system", "system", "lj, sw or csh; selects the defaults of every other key",
               [](const C& c) { return c.system; }, [](C& c, const std::string& v) { c.system = v; }});
  k.push_back(field("system", "n_atoms", "atoms per structure", [](C& c) -> int& { return c.n_atoms; }));
  k.push_back(field("system", "density", "number density (atoms per volume)",
                    [](C& c) -> double& { return c.density; }));
  k.push_back(field("system", "species_fraction", "space-separated fraction per species",
                    [](C& c) -> std::vector<double>& { return c.species_fraction; }));
  k.push_back(field("system", "lj_truncation", "switch, shift or plain",
                    [](C& c) -> std::string& { return c.lj_truncation; }));
  k.push_back(field("system", "lj_cutoff_factor", "LJ cutoff in units of the largest sigma",
                    [](C& c) -> double& { return c.lj_cutoff_factor; }));
  k.push_back(field("system", "csh_epsilon", "C-S-H well depth, kcal/mol",
                    [](C& c) -> double& { return c.csh.epsilon; }));
  k.push_back(field("system", "csh_sigma", "C-S-H grain diameter, nm",
                    [](C& c) -> double& { return c.csh.sigma; }));
  k.push_back(field("system", "csh_alpha", "C-S-H exponent alpha",
                    [](C& c) -> int& { return c.csh.alpha_exponent; }));
  k.push_back(field("system", "csh_cutoff_factor", "C-S-H cutoff in units of sigma",
                    [](C& c) -> double& { return c.csh.cutoff_factor; }));
  k.push_back(field("system", "min_dist", "exclusion distance for random packing",
                    [](C& c) -> double& { return c.min_dist; }));
  k.push_back(field("system", "prerelax_steps", "FIRE steps on the packed start before dynamics",
                    [](C& c) -> int& { return c.prerelax_steps; }));

  k.push_back(field("sampler", "n_structures", "structures written by generate",
                    [](C& c) -> int& { return c.dataset.n_structures; }));
  k.push_back(field("sampler", "equilibration_steps", "thermostat steps before sampling",
                    [](C& c) -> long& { return c.dataset.equilibration_steps; }));
  k.push_back(field("sampler", "gap_steps", "thermostat steps between samples",
                    [](C& c) -> long& { return c.dataset.gap_steps; }));
  k.push_back(field("sampler", "temperature", "target temperature (reduced or K)",
                    [](C& c) -> double& { return c.dataset.thermostat.temperature; }));
  k.push_back(field("sampler", "friction", "Langevin friction, 1/time",
                    [](C& c) -> double& { return c.dataset.thermostat.friction; }));
  k.push_back(field("sampler", "dt", "integration time step",
                    [](C& c) -> double& { return c.dataset.thermostat.dt; }));

  k.push_back(field("minimize", "method", "gd, adam or fire",
                    [](C& c) -> std::string& { return c.method; }));
  k.push_back(field("minimize", "max_steps", "minimizer steps",
                    [](C& c) -> int& { return c.max_steps; }));
  k.push_back(field("minimize", "input", "extended-XYZ start structure",
                    [](C& c) -> std::string& { return c.input; }));
  k.push_back(field("minimize", "gd_lr", "gradient descent step",
                    [](C& c) -> double& { return c.minimizer.gd_lr; }));
  k.push_back(field("minimize", "adam_lr", "Adam learning rate",
                    [](C& c) -> double& { return c.minimizer.adam.lr; }));
  k.push_back(field("minimize", "adam_beta1", "Adam beta1",
                    [](C& c) -> double& { return c.minimizer.adam.beta1; }));
  k.push_back(field("minimize", "adam_beta2", "Adam beta2",
                    [](C& c) -> double& { return c.minimizer.adam.beta2; }));
  k.push_back(field("minimize", "adam_eps", "Adam epsilon",
                    [](C& c) -> double& { return c.minimizer.adam.eps; }));
  k.push_back(field("minimize", "fire_dt_start", "FIRE initial step (capped at dt_max)",
                    [](C& c) -> double& { return c.minimizer.fire.dt_start; }));
  k.push_back(field("minimize", "fire_dt_max", "FIRE largest step",
                    [](C& c) -> double& { return c.minimizer.fire.dt_max; }));
  k.push_back(field("minimize", "fire_n_min", "FIRE downhill steps before acceleration",
                    [](C& c) -> int& { return c.minimizer.fire.n_min; }));
  k.push_back(field("minimize", "fire_f_alpha", "FIRE mixing decay",
                    [](C& c) -> double& { return c.minimizer.fire.f_alpha; }));
  k.push_back(field("minimize", "fire_f_dec", "FIRE step decrease",
                    [](C& c) -> double& { return c.minimizer.fire.f_dec; }));
  k.push_back(field("minimize", "fire_f_inc", "FIRE step increase",
                    [](C& c) -> double& { return c.minimizer.fire.f_inc; }));
  k.push_back(field("minimize", "fire_alpha_start", "FIRE initial mixing",
                    [](C& c) -> double& { return c.minimizer.fire.alpha_start; }));
  k.push_back(field("minimize", "fire_per_atom_mixing", "mix velocities atom by atom",
                    [](C& c) -> bool& { return c.minimizer.fire.per_atom_mixing; }));

  k.push_back(field("policy", "width", "node and edge embedding width",
                    [](C& c) -> int& { return c.policy.width; }));
  k.push_back(field("policy", "message_passing_steps", "message-passing rounds",
                    [](C& c) -> int& { return c.policy.message_passing_steps; }));
  k.push_back(field("policy", "node_embed_layers", "layers of the node embedding MLP",
                    [](C& c) -> int& { return c.policy.node_embed_layers; }));
  k.push_back(field("policy", "edge_embed_layers", "layers of the edge embedding MLP",
                    [](C& c) -> int& { return c.policy.edge_embed_layers; }));
  k.push_back(field("policy", "node_update_layers", "layers of the node update MLP",
                    [](C& c) -> int& { return c.policy.node_update_layers; }));
  k.push_back(field("policy", "edge_update_layers", "layers of the edge update MLP",
                    [](C& c) -> int& { return c.policy.edge_update_layers; }));
  k.push_back(field("policy", "head_layers", "layers of the displacement MLP",
                    [](C& c) -> int& { return c.policy.head_layers; }));
  k.push_back(field("policy", "leaky_slope", "leaky-ReLU negative slope",
                    [](C& c) -> double& { return c.policy.leaky_slope; }));
  k.push_back({"policy", "aggregation", "edge-to-node aggregation: mean or sum",
               [](const C& c) {
                 return std::string(c.policy.aggregation == Aggregation::Mean ? "mean" : "sum");
               },
               [](C& c, const std::string& v) {
                 if (v == "mean") c.policy.aggregation = Aggregation::Mean;
                 else if (v == "sum") c.policy.aggregation = Aggregation::Sum;
                 else bad_value("policy.aggregation", v);
               }});
  k.push_back(field("policy", "head_neighbor_mean", "feed the head the neighbour mean as well",
                    [](C& c) -> bool& { return c.policy.head_neighbor_mean; }));
  k.push_back(field("policy", "displacement_scale", "factor applied to the predicted mean",
                    [](C& c) -> double& { return c.policy.displacement_scale; }));
  k.push_back(field("policy", "batchnorm_decay", "batch-norm running average decay",
                    [](C& c) -> double& { return c.policy.batchnorm_decay; }));
  k.push_back(field("policy", "init_gain", "factor on the uniform init bound of every layer",
                    [](C& c) -> double& { return c.policy.init_gain; }));
  k.push_back(field("policy", "head_init_gain", "extra factor for the last head layer",
                    [](C& c) -> double& { return c.policy.head_init_gain; }));
  k.push_back(field("policy", "alpha", "action covariance factor (Sigma = alpha I)",
                    [](C& c) -> double& { return c.alpha; }));

  k.push_back(field("train", "dataset", "directory holding manifest.csv",
                    [](C& c) -> std::string& { return c.train_dataset; }));
  k.push_back(field("train", "epochs", "parameter updates",
                    [](C& c) -> int& { return c.train.epochs; }));
  k.push_back(field("train", "horizon", "rollout length T",
                    [](C& c) -> int& { return c.train.horizon; }));
  k.push_back(field("train", "gamma", "reward discount",
                    [](C& c) -> double& { return c.train.gamma; }));
  k.push_back(field("train", "batch_size", "structures per batch",
                    [](C& c) -> int& { return c.train.batch_size; }));
  k.push_back(field("train", "grad_accum", "batches per update",
                    [](C& c) -> int& { return c.train.grad_accum; }));
  k.push_back(field("train", "lr", "Adam learning rate",
                    [](C& c) -> double& { return c.train.lr; }));
  k.push_back(field("train", "grad_clip", "global gradient norm limit",
                    [](C& c) -> double& { return c.train.grad_clip; }));
  k.push_back(field("train", "val_every", "epochs between validations and checkpoints",
                    [](C& c) -> int& { return c.train.val_every; }));
  k.push_back(field("train", "val_horizon", "validation rollout length",
                    [](C& c) -> int& { return c.train.val_horizon; }));
  k.push_back(field("train", "train_fraction", "share of the dataset used for training",
                    [](C& c) -> double& { return c.train.train_fraction; }));
  k.push_back({"train", "baseline", "discounted, drop or none",
               [](const C& c) { return baseline_name(c.train.baseline); },
               [](C& c, const std::string& v) { c.train.baseline = parse_baseline(v); }});
  k.push_back(field("train", "sampled_validation", "sample actions during validation",
                    [](C& c) -> bool& { return c.train.sampled_validation; }));
  k.push_back(field("train", "graph_cutoff", "graph cutoff, 0 = potential cutoff",
                    [](C& c) -> double& { return c.train.graph_cutoff; }));

  k.push_back(field("adapt", "checkpoint", "policy checkpoint for adapt/benchmark/inductivity",
                    [](C& c) -> std::string& { return c.checkpoint; }));
  k.push_back(field("adapt", "target", "extended-XYZ target structure",
                    [](C& c) -> std::string& { return c.target; }));
  k.push_back(field("adapt", "epochs", "adaptation epochs per seed",
                    [](C& c) -> int& { return c.adapt.epochs; }));
  k.push_back(field("adapt", "horizon", "rollout length per epoch",
                    [](C& c) -> int& { return c.adapt.horizon; }));
  k.push_back(field("adapt", "seeds", "independent adaptations per structure",
                    [](C& c) -> int& { return c.adapt.seeds; }));
  k.push_back(field("adapt", "lr", "Adam learning rate",
                    [](C& c) -> double& { return c.adapt.lr; }));
  k.push_back(field("adapt", "grad_clip", "global gradient norm limit",
                    [](C& c) -> double& { return c.adapt.grad_clip; }));

  k.push_back(field("benchmark", "dataset", "directory holding manifest.csv",
                    [](C& c) -> std::string& { return c.benchmark_dataset; }));
  k.push_back(field("benchmark", "structures", "structures taken from the dataset",
                    [](C& c) -> int& { return c.benchmark_structures; }));
  k.push_back(field("benchmark", "rl", "include the adapted policy",
                    [](C& c) -> bool& { return c.benchmark_rl; }));

  k.push_back(field("inductivity", "sizes", "space-separated atom counts",
                    [](C& c) -> std::vector<int>& { return c.inductivity_sizes; }));
  k.push_back(field("inductivity", "structures", "structures per size",
                    [](C& c) -> int& { return c.inductivity_structures; }));

  k.push_back(field("run", "seed", "master RNG seed",
                    [](C& c) -> std::uint64_t& { return c.seed; }));
  k.push_back(field("run", "threads", "worker threads (1 = reproducibility mode)",
                    [](C& c) -> int& { return c.threads; }));
  return k;
}

void check_config(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw InputError("config: " + m); };
  if (c.n_atoms < 1) fail("system.n_atoms must be >= 1");
  if (!(c.density > 0.0)) fail("system.density must be positive");
  if (c.species_fraction.empty()) fail("system.species_fraction is empty");
  if (c.lj_truncation != "switch" && c.lj_truncation != "shift" && c.lj_truncation != "plain") {
    fail("system.lj_truncation must be switch, shift or plain");
  }
  if (!(c.dataset.thermostat.temperature > 0.0)) fail("sampler.temperature must be positive");
  if (!(c.dataset.thermostat.dt > 0.0)) fail("sampler.dt must be positive");
  if (c.dataset.thermostat.friction < 0.0) fail("sampler.friction must be >= 0");
  if (c.max_steps < 0) fail("minimize.max_steps must be >= 0");
  parse_method(c.method);
  if (!(c.alpha > 0.0)) fail("policy.alpha must be positive");
  if (c.policy.width < 1) fail("policy.width must be >= 1");
  if (!(c.train.gamma > 0.0 && c.train.gamma <= 1.0)) fail("train.gamma must lie in (0, 1]");
  if (c.train.epochs < 0 || c.adapt.epochs < 0) fail("epochs must be >= 0");
  if (c.threads < 1) fail("run.threads must be >= 1");
  for (int n : c.inductivity_sizes) {
    if (n < 1) fail("inductivity.sizes must be positive");
  }
}

// INI text with '#' comment lines removed (the parser only knows ';').
std::string strip_hash_comments(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    const auto p = line.find_first_not_of(" \t");
    if (p != std::string::npos && line[p] == '#') continue;
    out += line + '\n';
  }
  return out;
}

}  // namespace

ExperimentConfig defaults_for(const std::string& system) {
  ExperimentConfig c;
  c.system = system;
  c.minimizer = MinimizerSettings::for_system(system);
  if (system == "lj") {
    return c;
  }
  if (system == "sw") {
    c.n_atoms = 64;
    c.density = 0.04994;
    c.species_fraction = {1.0};
    c.min_dist = 2.0;
    c.dataset.thermostat = {3500.0, 1.0, 0.001};
    c.policy.displacement_scale = 2.0;
    return c;
  }
  if (system == "csh") {
    c.n_atoms = 100;
    c.density = 0.008;
    c.species_fraction = {1.0};
    c.min_dist = 4.0;
    c.dataset.thermostat = {1000.0, 1.0, 0.02};
    c.max_steps = 2000;
    c.policy.displacement_scale = 5.0;
    return c;
  }
  throw InputError("config: unknown system '" + system + "' (expected lj, sw or csh)");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

ExperimentConfig parse_experiment(const std::string& ini_text,
                                  const std::map<std::string, std::string>& overrides) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(strip_hash_comments(ini_text));
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }

  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw InputError("config: key '" + section + "' must live in a section");
    }
    for (const auto& [key, leaf] : body) values[section + "." + key] = leaf.data();
  }
  for (const auto& [key, value] : overrides) values[key] = value;

  std::set<std::string> known;
  for (const auto& k : config_keys()) known.insert(k.path());
  for (const auto& [key, value] : values) {
    if (!known.count(key)) throw InputError("config: unknown key '" + key + "'");
  }

  const auto sys = values.find("system.system");
  ExperimentConfig c = defaults_for(sys == values.end() ? "lj" : sys->second);
  for (const auto& k : config_keys()) {
    auto it = values.find(k.path());
    if (it != values.end() && k.path() != "system.system") k.set(c, it->second);
  }
  check_config(c);
  return c;
}

ExperimentConfig load_experiment(const std::string& path,
                                 const std::map<std::string, std::string>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_experiment(text, overrides);
}

std::string echo(const ExperimentConfig& c) {
  std::string out;
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      out += fmt::format("{}[{}]\n", section.empty() ? "" : "\n", k.section);
      section = k.section;
    }
    out += fmt::format("{} = {}\n", k.name, k.get(c));
  }
  return out;
}

std::string describe_keys() {
  const ExperimentConfig lj = defaults_for("lj"), sw = defaults_for("sw"), csh = defaults_for("csh");
  std::string out = "Config keys (INI sections; defaults shown for lj / sw / csh when they differ):\n";
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      out += fmt::format("  [{}]\n", k.section);
      section = k.section;
    }
    const std::string a = k.get(lj), b = k.get(sw), d = k.get(csh);
    const std::string dflt =
        (a == b && a == d) ? a : fmt::format("{} / {} / {}", a, b, d);
    out += fmt::format("    {:<24} {}  (default: {})\n", k.name, k.help,
                       dflt.empty() ? "\"\"" : dflt);
  }
  return out;
}

PotentialModel make_model(const ExperimentConfig& c) {
  if (c.system == "lj") {
    LjParams p = LjParams::kob_andersen();
    p.cutoff_factor = c.lj_cutoff_factor;
    if (c.lj_truncation == "shift") p.truncation = LjParams::Truncation::Shift;
    else if (c.lj_truncation == "plain") p.truncation = LjParams::Truncation::Plain;
    else p.truncation = LjParams::Truncation::Switch;
    return PotentialModel::binary_lj(p);
  }
  if (c.system == "sw") return PotentialModel::sw_silicon();
  if (c.system == "csh") return PotentialModel::csh(c.csh);
  throw InputError("config: unknown system '" + c.system + "'");
}

}  // namespace rlrelax
