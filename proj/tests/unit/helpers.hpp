#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "rlrelax/optim.hpp"
#include "rlrelax/potentials.hpp"
#include "rlrelax/sampler.hpp"

namespace testing {

using rlrelax::Configuration;
using rlrelax::Matrix;

/// Random packing of `n` atoms for `model` at a density where most atoms
/// interact. The box is never below twice the cutoff: smaller boxes make the
/// minimum-image energy kinked where a pair crosses half the box.
inline Configuration random_config(const rlrelax::PotentialModel& model, int n, std::uint64_t seed) {
  rlrelax::RngStream rng(seed);
  double density = 1.0, min_dist = 0.8;
  std::map<int, double> mix{{0, 1.0}};
  if (model.system_tag() == "lj") mix = {{0, 0.8}, {1, 0.2}};
  if (model.system_tag() == "sw") density = 0.05, min_dist = 2.1;
  if (model.system_tag() == "csh") density = 0.008, min_dist = 4.75;
  const double side = std::max(std::cbrt(n / density), 2.02 * model.cutoff());
  return rlrelax::random_pack(n, rlrelax::SimulationBox::cubic(side), mix, min_dist, rng);
}

/// Central difference of f at x along every entry of x.
inline Matrix central_difference(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                 double h) {
  Matrix g(x.rows(), x.cols());
  Matrix y = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double old = y(i, j);
      y(i, j) = old + h;
      const double fp = f(y);
      y(i, j) = old - h;
      const double fm = f(y);
      y(i, j) = old;
      g(i, j) = (fp - fm) / (2 * h);
    }
  }
  return g;
}

/// Largest violation of |a - b| <= max(abs_tol, rel_tol max(|a|, |b|)), as a ratio.
inline double worst_ratio(const Matrix& a, const Matrix& b, double rel_tol, double abs_tol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i], y = b.data()[i];
    const double tol = std::max(abs_tol, rel_tol * std::max(std::abs(x), std::abs(y)));
    worst = std::max(worst, std::abs(x - y) / tol);
  }
  return worst;
}

}  // namespace testing
