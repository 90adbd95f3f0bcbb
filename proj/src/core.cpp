#include "rlrelax/core.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <fmt/format.h>

namespace rlrelax {

SimulationBox::SimulationBox(Vector lengths, std::vector<bool> periodic)
    : lengths_(std::move(lengths)), periodic_(std::move(periodic)) {
  if (lengths_.size() != 2 && lengths_.size() != 3) {
    throw std::invalid_argument("box dimension must be 2 or 3");
  }
  if (periodic_.size() != static_cast<std::size_t>(lengths_.size())) {
    throw std::invalid_argument("box periodic flags do not match dimension");
  }
  for (int k = 0; k < lengths_.size(); ++k) {
    if (!(lengths_[k] > 0.0) || !std::isfinite(lengths_[k])) {
      throw std::invalid_argument("box lengths must be positive and finite");
    }
  }
}

SimulationBox SimulationBox::cubic(double side, int dim) {
  return SimulationBox(Vector::Constant(dim, side), std::vector<bool>(dim, true));
}

bool SimulationBox::operator==(const SimulationBox& other) const {
  return lengths_.size() == other.lengths_.size() && lengths_ == other.lengths_ &&
         periodic_ == other.periodic_;
}

Vector minimum_image(const Vector& delta, const SimulationBox& box) {
  Vector out = delta;
  for (int k = 0; k < box.dim(); ++k) {
    if (!box.periodic(k)) continue;
    const double L = box.length(k);
    double v = out[k] - L * std::round(out[k] / L);
    if (v <= -0.5 * L) v += L;
    if (v > 0.5 * L) v -= L;
    out[k] = v;
  }
  return out;
}

Configuration::Configuration(Matrix positions_, std::vector<int> species_, SimulationBox box_)
    : positions(std::move(positions_)), species(std::move(species_)), box(std::move(box_)) {
  if (static_cast<std::size_t>(positions.rows()) != species.size()) {
    throw std::invalid_argument("positions row count does not match species length");
  }
  if (positions.rows() > 0 && positions.cols() != box.dim()) {
    throw std::invalid_argument("positions column count does not match box dimension");
  }
  if (positions.rows() == 0) positions.resize(0, box.dim());
}

Vector pair_displacement(const Configuration& config, std::size_t i, std::size_t j) {
  if (i >= config.size() || j >= config.size()) {
    throw std::out_of_range("atom index out of range");
  }
  Vector delta = (config.positions.row(i) - config.positions.row(j)).transpose();
  return minimum_image(delta, config.box);
}

Configuration wrap(const Configuration& config) {
  Configuration out = config;
  for (Eigen::Index i = 0; i < out.positions.rows(); ++i) {
    for (int k = 0; k < out.dim(); ++k) {
      if (!out.box.periodic(k)) continue;
      const double L = out.box.length(k);
      double x = out.positions(i, k) - L * std::floor(out.positions(i, k) / L);
      if (x >= L) x -= L;
      if (x < 0.0) x = 0.0;
      out.positions(i, k) = x;
    }
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id) {
  std::seed_seq seq{splitmix64(seed), splitmix64(seed ^ splitmix64(stream_id + 1)),
                    splitmix64(stream_id)};
  engine_.seed(seq);
}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(seed_, splitmix64(stream_ * 0x100000001B3ULL ^ splitmix64(child)));
}

double RngStream::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() { return gauss_(engine_); }

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below(0)");
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

namespace {

std::map<std::string, std::string> parse_metadata(const std::string& line) {
  std::map<std::string, std::string> out;
  static const std::regex kv(R"re(([A-Za-z_][A-Za-z0-9_]*)=("([^"]*)"|(\S+)))re");
  for (auto it = std::sregex_iterator(line.begin(), line.end(), kv); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    out[m[1].str()] = m[3].matched ? m[3].str() : m[4].str();
  }
  return out;
}

}  // namespace

Configuration parse_config(const std::string& text, const std::vector<std::string>& species_names,
                           std::string* system_tag) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("xyz: empty file");
  long long n = 0;
  {
    std::istringstream head(line);
    if (!(head >> n) || n < 0) throw InputError("xyz: first line must be the atom count");
  }
  if (!std::getline(in, line)) throw InputError("xyz: missing metadata line");
  const auto meta = parse_metadata(line);
  auto box_it = meta.find("box");
  if (box_it == meta.end()) throw InputError("xyz: metadata lacks box=\"Lx Ly Lz\"");
  std::vector<double> lengths;
  {
    std::istringstream bs(box_it->second);
    double v;
    while (bs >> v) lengths.push_back(v);
  }
  if (lengths.size() != 2 && lengths.size() != 3) throw InputError("xyz: box needs 2 or 3 lengths");
  std::vector<bool> periodic(lengths.size(), true);
  if (auto p = meta.find("pbc"); p != meta.end()) {
    std::istringstream ps(p->second);
    std::string tok;
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      if (!(ps >> tok)) throw InputError("xyz: pbc needs one flag per dimension");
      periodic[k] = (tok == "T" || tok == "t" || tok == "1" || tok == "true");
    }
  }
  if (system_tag) {
    auto s = meta.find("system");
    *system_tag = s == meta.end() ? std::string() : s->second;
  }
  SimulationBox box;
  try {
    box = SimulationBox(Eigen::Map<Vector>(lengths.data(), static_cast<Eigen::Index>(lengths.size())),
                        periodic);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("xyz: ") + e.what());
  }
  const int d = box.dim();
  Matrix pos(n, d);
  std::vector<int> species(static_cast<std::size_t>(n));
  long long row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (row >= n) throw InputError("xyz: more atom rows than the header count");
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    auto found = std::find(species_names.begin(), species_names.end(), tok);
    if (found == species_names.end()) throw InputError("xyz: unknown species '" + tok + "'");
    species[static_cast<std::size_t>(row)] = static_cast<int>(found - species_names.begin());
    for (int k = 0; k < d; ++k) {
      if (!(ls >> pos(row, k))) throw InputError(fmt::format("xyz: bad coordinates on atom row {}", row));
    }
    ++row;
  }
  if (row != n) throw InputError(fmt::format("xyz: header says {} atoms, found {}", n, row));
  return Configuration(std::move(pos), std::move(species), std::move(box));
}

std::string format_config(const Configuration& config,
                          const std::vector<std::string>& species_names,
                          const std::string& system_tag) {
  const Configuration c = wrap(config);
  std::string out = fmt::format("{}\n", c.size());
  std::string box, pbc;
  for (int k = 0; k < c.dim(); ++k) {
    box += fmt::format("{}{:.17g}", k ? " " : "", c.box.length(k));
    pbc += fmt::format("{}{}", k ? " " : "", c.box.periodic(k) ? "T" : "F");
  }
  out += fmt::format("box=\"{}\" pbc=\"{}\" system={}\n", box, pbc, system_tag);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const int s = c.species[i];
    if (s < 0 || static_cast<std::size_t>(s) >= species_names.size()) {
      throw std::invalid_argument("species index outside the species list");
    }
    out += species_names[s];
    for (int k = 0; k < c.dim(); ++k) out += fmt::format(" {:.17g}", c.positions(i, k));
    out += '\n';
  }
  return out;
}

Configuration read_config(const std::filesystem::path& path,
                          const std::vector<std::string>& species_names, std::string* system_tag) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), species_names, system_tag);
}

void write_config(const Configuration& config, const std::filesystem::path& path,
                  const std::vector<std::string>& species_names, const std::string& system_tag) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << format_config(config, species_names, system_tag);
}

}  // namespace rlrelax
