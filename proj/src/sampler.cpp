#include "rlrelax/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace rlrelax {

DynamicsUnits DynamicsUnits::for_system(const std::string& tag) {
  if (tag == "lj") return {1.0, 1.0};
  // eV, Angstrom, ps: 1 amu A^2/ps^2 = 1.0364269e-4 eV.
  if (tag == "sw") return {28.0855 * 1.0364269e-4, 8.617333262e-5};
  // kcal/mol, nm, ps: 1 g/mol nm^2/ps^2 = 0.2390057 kcal/mol. Grain mass
  // from a 5 nm sphere at 2.6 g/cm^3 (1.0252e5 g/mol).
  if (tag == "csh") return {1.0252e5 * 0.2390057, 1.987204e-3};
  throw InputError("unknown system '" + tag + "'");
}

Configuration random_pack(int n, const SimulationBox& box, const std::map<int, double>& species_mix,
                          double min_dist, RngStream& rng, int max_attempts_per_atom) {
  if (n < 0) throw std::invalid_argument("random_pack: negative atom count");
  if (species_mix.empty()) throw std::invalid_argument("random_pack: empty species mix");
  double total = 0.0;
  for (const auto& [s, f] : species_mix) {
    if (f < 0.0) throw std::invalid_argument("random_pack: negative species fraction");
    total += f;
  }
  if (!(total > 0.0)) throw std::invalid_argument("random_pack: species fractions sum to zero");

  // Largest-remainder rounding of n * fraction.
  std::vector<std::pair<int, double>> mix(species_mix.begin(), species_mix.end());
  std::vector<int> counts(mix.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const double exact = n * mix[k].second / total;
    counts[k] = static_cast<int>(std::floor(exact));
    assigned += counts[k];
    remainders.emplace_back(exact - counts[k], k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[remainders[r].second];

  std::vector<int> species;
  species.reserve(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < mix.size(); ++k) species.insert(species.end(), counts[k], mix[k].first);

  const int d = box.dim();
  Matrix pos(n, d);
  const double min2 = min_dist * min_dist;
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts_per_atom && !placed; ++attempt) {
      for (int k = 0; k < d; ++k) pos(i, k) = rng.uniform(0.0, box.length(k));
      placed = true;
      for (int j = 0; j < i && placed; ++j) {
        double r2 = 0.0;
        for (int k = 0; k < d; ++k) {
          double x = pos(i, k) - pos(j, k);
          if (box.periodic(k)) x -= box.length(k) * std::round(x / box.length(k));
          r2 += x * x;
        }
        placed = r2 >= min2;
      }
    }
    if (!placed) {
      throw NumericalError(fmt::format(
          "random_pack: could not place atom {} of {} with min_dist {} after {} attempts", i + 1, n,
          min_dist, max_attempts_per_atom));
    }
  }
  return Configuration(std::move(pos), std::move(species), box);
}

Matrix thermal_velocities(const Configuration& config, double temperature,
                          const DynamicsUnits& units, RngStream& rng) {
  const auto n = static_cast<Eigen::Index>(config.size());
  Matrix v(n, config.dim());
  const double s = std::sqrt(units.boltzmann * temperature / units.mass);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < config.dim(); ++k) v(i, k) = s * rng.normal();
  }
  if (n > 1) v.rowwise() -= v.colwise().mean();
  return v;
}

double kinetic_temperature(const Matrix& v, const DynamicsUnits& units) {
  const auto n = v.rows();
  if (n == 0) return 0.0;
  const double dof = n > 1 ? static_cast<double>((n - 1) * v.cols()) : static_cast<double>(v.cols());
  return units.mass * v.squaredNorm() / (dof * units.boltzmann);
}

NvtResult nvt_run(const DynamicsState& start, const PotentialModel& model,
                  const ThermostatSpec& spec, const DynamicsUnits& units, long steps,
                  RngStream& rng) {
  if (!(spec.temperature > 0.0) || !(spec.dt > 0.0) || spec.friction < 0.0) {
    throw std::invalid_argument("nvt_run: invalid thermostat specification");
  }
  NvtResult out;
  out.state = start;
  if (steps <= 0) {
    out.tail_temperature = kinetic_temperature(start.velocities, units);
    return out;
  }
  Configuration& c = out.state.config;
  Matrix& v = out.state.velocities;
  const double dt = spec.dt;
  const double c1 = std::exp(-spec.friction * dt);
  const double c2 = std::sqrt(std::max(0.0, 1.0 - c1 * c1));
  const double vscale = std::sqrt(units.boltzmann * spec.temperature / units.mass);

  Evaluation ev = model.evaluate(c, true);
  const double guard =
      1e3 * (std::abs(ev.energy) + static_cast<double>(c.size()) * model.energy_scale());
  const long tail_start = steps - std::max<long>(1, steps / 10);
  double tail_sum = 0.0;
  long tail_count = 0;
  for (long step = 0; step < steps; ++step) {
    v += (0.5 * dt / units.mass) * ev.forces;
    c.positions += (0.5 * dt) * v;
    if (spec.friction > 0.0) {
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        for (Eigen::Index k = 0; k < v.cols(); ++k) v(i, k) = c1 * v(i, k) + c2 * vscale * rng.normal();
      }
    }
    c.positions += (0.5 * dt) * v;
    ev = model.evaluate(c, true);
    v += (0.5 * dt / units.mass) * ev.forces;
    if (!std::isfinite(ev.energy) || std::abs(ev.energy) > guard) {
      throw NumericalError(fmt::format("nvt_run: energy diverged at step {} ({:.6g}); reduce dt",
                                       step + 1, ev.energy));
    }
    if (step >= tail_start) {
      tail_sum += kinetic_temperature(v, units);
      ++tail_count;
    }
  }
  out.tail_temperature = tail_sum / static_cast<double>(tail_count);
  return out;
}

NvtResult nvt_run(const Configuration& config, const PotentialModel& model,
                  const ThermostatSpec& spec, long steps, RngStream& rng) {
  const auto units = DynamicsUnits::for_system(model.system_tag());
  DynamicsState start{config, thermal_velocities(config, spec.temperature, units, rng)};
  return nvt_run(start, model, spec, units, steps, rng);
}

std::vector<Configuration> sample_dataset(const Configuration& start, const PotentialModel& model,
                                          const DatasetSpec& spec, RngStream& rng,
                                          const std::filesystem::path& out_dir) {
  if (spec.n_structures < 0) throw std::invalid_argument("n_structures must be >= 0");
  const auto units = DynamicsUnits::for_system(model.system_tag());
  std::vector<Configuration> out;
  std::ofstream manifest;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir / "structures");
    manifest.open(out_dir / "manifest.csv");
    if (!manifest) throw InputError("cannot write " + (out_dir / "manifest.csv").string());
    manifest << "index,path,energy,per_atom_energy\n";
  }
  if (spec.n_structures == 0) return out;

  DynamicsState state{start, thermal_velocities(start, spec.thermostat.temperature, units, rng)};
  state = nvt_run(state, model, spec.thermostat, units, spec.equilibration_steps, rng).state;
  for (int s = 0; s < spec.n_structures; ++s) {
    if (s > 0) state = nvt_run(state, model, spec.thermostat, units, spec.gap_steps, rng).state;
    Configuration snap = wrap(state.config);
    if (!out_dir.empty()) {
      const std::filesystem::path rel = fmt::format("structures/struct_{:04d}.xyz", s);
      write_config(snap, out_dir / rel, model.species_names(), model.system_tag());
      const double e = model.total_energy(snap);
      manifest << fmt::format("{},{},{:.17g},{:.17g}\n", s, rel.string(), e,
                              e / static_cast<double>(snap.size()));
    }
    out.push_back(std::move(snap));
  }
  return out;
}

std::vector<Configuration> load_dataset(const std::filesystem::path& dir,
                                        const PotentialModel& model) {
  std::ifstream in(dir / "manifest.csv");
  if (!in) throw InputError("missing dataset manifest " + (dir / "manifest.csv").string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("index,path", 0) != 0) throw InputError("malformed manifest header");
  std::vector<Configuration> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string idx, path;
    std::getline(ls, idx, ',');
    std::getline(ls, path, ',');
    std::string tag;
    out.push_back(read_config(dir / path, model.species_names(), &tag));
    if (!tag.empty() && tag != model.system_tag()) {
      throw InputError("structure " + path + " belongs to system '" + tag + "', expected '" +
                       model.system_tag() + "'");
    }
  }
  return out;
}

}  // namespace rlrelax
