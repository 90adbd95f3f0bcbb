#include "rlrelax/optim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rlrelax {

Method parse_method(const std::string& name) {
  if (name == "gd") return Method::GradientDescent;
  if (name == "adam") return Method::Adam;
  if (name == "fire") return Method::Fire;
  throw InputError("unknown minimizer '" + name + "' (expected gd, adam or fire)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::GradientDescent: return "gd";
    case Method::Adam: return "adam";
    case Method::Fire: return "fire";
  }
  return "?";
}

FireState::FireState(Eigen::Index n_atoms, int dim, const FireParams& p)
    : velocities(Matrix::Zero(n_atoms, dim)),
      dt(std::min(p.dt_start, p.dt_max)),
      alpha_mix(p.alpha_start),
      params(p) {}

AdamState::AdamState(Eigen::Index rows, Eigen::Index cols, const AdamParams& p)
    : m(Matrix::Zero(rows, cols)), v(Matrix::Zero(rows, cols)), params(p) {}

Matrix gd_step(const Matrix& positions, const Matrix& forces, double lr) {
  return positions + lr * forces;
}

Matrix adam_step(AdamState& s, const Matrix& g) {
  const auto& p = s.params;
  ++s.step;
  s.m = p.beta1 * s.m + (1.0 - p.beta1) * g;
  s.v = p.beta2 * s.v + (1.0 - p.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(s.step));
  return (-p.lr) * ((s.m / c1).array() / ((s.v / c2).array().sqrt() + p.eps)).matrix();
}

Matrix fire_step(FireState& s, const Matrix& positions, const Matrix& forces) {
  const auto& p = s.params;
  const double power = (forces.array() * s.velocities.array()).sum();
  if (power > 0.0) {
    if (p.per_atom_mixing) {
      for (Eigen::Index i = 0; i < forces.rows(); ++i) {
        const double fn = forces.row(i).norm();
        const double vn = s.velocities.row(i).norm();
        s.velocities.row(i) *= (1.0 - s.alpha_mix);
        if (fn > 0.0) s.velocities.row(i) += s.alpha_mix * vn / fn * forces.row(i);
      }
    } else {
      const double fn = forces.norm();
      const double vn = s.velocities.norm();
      s.velocities = (1.0 - s.alpha_mix) * s.velocities + (s.alpha_mix * vn / fn) * forces;
    }
    ++s.n_pos;
    if (s.n_pos > p.n_min) {
      s.dt = std::min(s.dt * p.f_inc, p.dt_max);
      s.alpha_mix *= p.f_alpha;
    }
  } else {
    s.velocities.setZero();
    s.dt *= p.f_dec;
    s.alpha_mix = p.alpha_start;
    s.n_pos = 0;
  }
  s.velocities += s.dt * forces;
  return positions + s.dt * s.velocities;
}

MinimizerSettings MinimizerSettings::for_system(const std::string& tag) {
  MinimizerSettings m;
  if (tag == "lj") {
    m.gd_lr = 5e-4;
    m.adam.lr = 0.05;
    m.fire.dt_start = 0.01;
  } else if (tag == "sw") {
    m.gd_lr = 1e-3;
    m.adam.lr = 0.1;
    m.fire.dt_start = 0.5;
  } else if (tag == "csh") {
    m.gd_lr = 5e-4;
    m.adam.lr = 1.0;
    m.fire.dt_start = 5e-3;
  } else {
    throw InputError("unknown system '" + tag + "'");
  }
  return m;
}

MinimizeResult minimize(const Configuration& config, const PotentialModel& model, Method method,
                        int max_steps, const MinimizerSettings& settings) {
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  Configuration c = config;
  Evaluation ev = model.evaluate(c, true);
  if (!std::isfinite(ev.energy)) throw NumericalError("minimize: initial energy is not finite");
  MinimizeResult out;
  out.energies.reserve(static_cast<std::size_t>(max_steps) + 1);
  out.energies.push_back(ev.energy);

  const double jump_limit = 1e6 * model.energy_scale();
  FireState fire(c.positions.rows(), c.dim(), settings.fire);
  AdamState adam(c.positions.rows(), c.dim(), settings.adam);
  for (int step = 0; step < max_steps; ++step) {
    switch (method) {
      case Method::GradientDescent:
        c.positions = gd_step(c.positions, ev.forces, settings.gd_lr);
        break;
      case Method::Adam:
        c.positions += adam_step(adam, -ev.forces);
        break;
      case Method::Fire:
        c.positions = fire_step(fire, c.positions, ev.forces);
        break;
    }
    const double previous = ev.energy;
    ev = model.evaluate(c, true);
    if (!std::isfinite(ev.energy) || ev.energy - previous > jump_limit) {
      throw NumericalError(fmt::format(
          "{} diverged at step {} (energy {:.6g}); atoms overlapping or step size too large",
          method_name(method), step + 1, ev.energy));
    }
    out.energies.push_back(ev.energy);
  }
  out.config = wrap(c);
  return out;
}

}  // namespace rlrelax
