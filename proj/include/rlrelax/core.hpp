#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rlrelax {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a computation produces non-finite or runaway values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed input files and invalid run configuration.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Orthorhombic simulation cell. Dimension is 2 or 3.
class SimulationBox {
 public:
  SimulationBox() = default;
  SimulationBox(Vector lengths, std::vector<bool> periodic);

  static SimulationBox cubic(double side, int dim = 3);

  int dim() const { return static_cast<int>(lengths_.size()); }
  const Vector& lengths() const { return lengths_; }
  double length(int k) const { return lengths_[k]; }
  bool periodic(int k) const { return periodic_[k]; }
  double volume() const { return lengths_.prod(); }

  bool operator==(const SimulationBox& other) const;

 private:
  Vector lengths_;
  std::vector<bool> periodic_;
};

/// Maps each periodic component of `delta` into (-L/2, L/2].
Vector minimum_image(const Vector& delta, const SimulationBox& box);

/// Atom positions (N x d), species indices and the enclosing box.
///
/// Species are indices into the active potential's species list. Positions
/// may sit outside the primary cell during dynamics; see `wrap`.
struct Configuration {
  Matrix positions;
  std::vector<int> species;
  SimulationBox box;

  Configuration() = default;
  Configuration(Matrix positions, std::vector<int> species, SimulationBox box);

  std::size_t size() const { return species.size(); }
  int dim() const { return box.dim(); }
};

/// Minimum-image displacement x_i - x_j.
Vector pair_displacement(const Configuration& config, std::size_t i, std::size_t j);

/// Returns a copy with every periodic coordinate mapped into [0, L).
Configuration wrap(const Configuration& config);

/// Reproducible random stream identified by (seed, stream id).
///
/// The engine is std::mt19937_64 whose state is seeded from the pair through
/// the SplitMix64 finalizer. Child streams are derived with `split`, so each
/// (epoch, structure, step) can own an independent stream.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  RngStream split(std::uint64_t child) const;

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal
  std::uint64_t below(std::uint64_t n);   // [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// Extended-XYZ style text I/O.
///
///   line 1: N
///   line 2: box="Lx Ly Lz" system=<lj|sw|csh> [pbc="T T T"]
///   then N lines of "<species> <x> <y> <z>"
///
/// `species_names` maps species tokens to indices. Positions are wrapped on
/// write and printed with 17 significant digits.
Configuration read_config(const std::filesystem::path& path,
                          const std::vector<std::string>& species_names,
                          std::string* system_tag = nullptr);
void write_config(const Configuration& config, const std::filesystem::path& path,
                  const std::vector<std::string>& species_names,
                  const std::string& system_tag);

Configuration parse_config(const std::string& text, const std::vector<std::string>& species_names,
                           std::string* system_tag = nullptr);
std::string format_config(const Configuration& config,
                          const std::vector<std::string>& species_names,
                          const std::string& system_tag);

}  // namespace rlrelax
