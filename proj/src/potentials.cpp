#include "rlrelax/potentials.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

namespace rlrelax {

LjParams LjParams::kob_andersen() {
  LjParams p;
  p.epsilon.resize(2, 2);
  p.sigma.resize(2, 2);
  p.epsilon << 1.0, 1.5, 1.5, 0.5;
  p.sigma << 1.0, 0.8, 0.8, 0.88;
  return p;
}

double lj_pair_energy(double r, double eps, double sigma) {
  if (!(r > 0.0)) throw std::domain_error("lj_pair_energy: r must be positive");
  const double s6 = std::pow(sigma / r, 6);
  return 4.0 * eps * (s6 * s6 - s6);
}

double csh_pair_energy(double r, const CshParams& p) {
  if (!(r > 0.0)) throw std::domain_error("csh_pair_energy: r must be positive");
  const double sa = std::pow(p.sigma / r, p.alpha_exponent);
  return 4.0 * p.epsilon * (sa * sa - sa);
}

double sw_two_body(double r, const SwParams& p) {
  const double rc = p.a * p.sigma;
  if (r >= rc) return 0.0;
  return p.A * p.epsilon * (p.B * std::pow(p.sigma / r, p.p) - std::pow(p.sigma / r, p.q)) *
         std::exp(p.sigma / (r - rc));
}

double sw_three_body(double r_ij, double r_ik, double cos_theta_jik, const SwParams& p) {
  const double rc = p.a * p.sigma;
  if (r_ij >= rc || r_ik >= rc) return 0.0;
  const double dc = cos_theta_jik - p.cos_theta0;
  return p.lambda * p.epsilon * dc * dc * std::exp(p.gamma * p.sigma / (r_ij - rc)) *
         std::exp(p.gamma * p.sigma / (r_ik - rc));
}

double truncated_pair(const std::function<double(double)>& pair_fn, double r, double r_c) {
  if (r >= r_c) return 0.0;
  return pair_fn(r) - pair_fn(r_c);
}

namespace {

// Shifted pair value and dV/dr for one species pair.
struct PairTable {
  int n = 0;
  std::vector<double> eps, sigma, rc2, shift;
  bool generalized = false;  // C-S-H form with exponent alpha
  int alpha = 6;
  bool switched = false;
  double switch_on2 = 0.0, switch_off2 = 0.0;

  int idx(int a, int b) const { return a * n + b; }
};

PairTable make_lj_table(const LjParams& p) {
  using T = LjParams::Truncation;
  PairTable t;
  t.n = static_cast<int>(p.epsilon.rows());
  const double smax = p.sigma.maxCoeff();
  if (p.truncation == T::Switch) {
    t.switched = true;
    t.switch_on2 = std::pow(p.switch_onset_factor * smax, 2);
    t.switch_off2 = std::pow(p.cutoff_factor * smax, 2);
  }
  for (int a = 0; a < t.n; ++a) {
    for (int b = 0; b < t.n; ++b) {
      const double e = p.epsilon(a, b), s = p.sigma(a, b);
      const double rc = p.truncation == T::Switch ? p.cutoff_factor * smax : p.cutoff_factor * s;
      t.eps.push_back(e);
      t.sigma.push_back(s);
      t.rc2.push_back(rc * rc);
      t.shift.push_back(p.truncation == T::Shift ? lj_pair_energy(rc, e, s) : 0.0);
    }
  }
  return t;
}

PairTable make_csh_table(const CshParams& p) {
  PairTable t;
  t.n = 1;
  t.generalized = true;
  t.alpha = p.alpha_exponent;
  const double rc = p.cutoff_factor * p.sigma;
  t.eps = {p.epsilon};
  t.sigma = {p.sigma};
  t.rc2 = {rc * rc};
  t.shift = {csh_pair_energy(rc, p)};
  return t;
}

inline double ipow(double x, int n) {
  double r = 1.0;
  while (n > 0) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

struct Accumulator {
  double energy = 0.0;
  Vector per_atom;
  Matrix forces;
  bool with_forces;

  Accumulator(int n, int d, bool wf) : per_atom(Vector::Zero(n)), with_forces(wf) {
    if (wf) forces = Matrix::Zero(n, d);
  }
};

// Minimum-image displacement x_j - x_i written into `out`.
inline void displacement(const Configuration& c, int i, int j, double* out) {
  const Vector& L = c.box.lengths();
  for (int k = 0; k < c.dim(); ++k) {
    double x = c.positions(j, k) - c.positions(i, k);
    if (c.box.periodic(k)) x -= L[k] * std::round(x / L[k]);
    out[k] = x;
  }
}

void pair_kernel(const Configuration& c, const NeighborGraph& g, const PairTable& t,
                 Accumulator& acc) {
  const int d = c.dim();
  double dx[3];
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    const int i = g.senders[e], j = g.receivers[e];
    if (j <= i) continue;
    displacement(c, i, j, dx);
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) r2 += dx[k] * dx[k];
    const int id = t.idx(c.species[i], c.species[j]);
    if (r2 >= t.rc2[id]) continue;
    const double r = std::sqrt(r2);
    const double eps = t.eps[id];
    double sa, v, dvdr;
    if (t.generalized) {
      sa = ipow(t.sigma[id] / r, t.alpha);
      v = 4.0 * eps * (sa * sa - sa);
      dvdr = 4.0 * eps * t.alpha * (sa - 2.0 * sa * sa) / r;
    } else {
      const double s2 = t.sigma[id] * t.sigma[id] / r2;
      sa = s2 * s2 * s2;
      v = 4.0 * eps * (sa * sa - sa);
      dvdr = 4.0 * eps * 6.0 * (sa - 2.0 * sa * sa) / r;
    }
    v -= t.shift[id];
    if (t.switched && r2 > t.switch_on2) {
      // S(R) = (Rc - R)^2 (Rc + 2R - 3Ro) / (Rc - Ro)^3 with R = r^2.
      const double rc2 = t.switch_off2, ro2 = t.switch_on2;
      const double den = std::pow(rc2 - ro2, 3);
      const double sw = (rc2 - r2) * (rc2 - r2) * (rc2 + 2.0 * r2 - 3.0 * ro2) / den;
      const double dsw_dr = -6.0 * (rc2 - r2) * (r2 - ro2) / den * 2.0 * r;
      dvdr = dvdr * sw + v * dsw_dr;
      v *= sw;
    }
    acc.energy += v;
    acc.per_atom[i] += 0.5 * v;
    acc.per_atom[j] += 0.5 * v;
    if (acc.with_forces) {
      // dx = x_j - x_i, so dU/dx_j = dvdr * dx / r.
      for (int k = 0; k < d; ++k) {
        const double f = dvdr * dx[k] / r;
        acc.forces(j, k) -= f;
        acc.forces(i, k) += f;
      }
    }
  }
}

void sw_kernel(const Configuration& c, const NeighborGraph& g, const SwParams& p,
               Accumulator& acc) {
  const int n = static_cast<int>(c.size());
  const int d = c.dim();
  const double rc = p.cutoff();
  struct Nb {
    int j;
    double r;
    double u[3];
  };
  std::vector<std::vector<Nb>> nbrs(static_cast<std::size_t>(n));
  for (std::size_t e = 0; e < g.n_edges(); ++e) {
    const int i = g.senders[e], j = g.receivers[e];
    Nb nb{j, 0.0, {0.0, 0.0, 0.0}};
    displacement(c, i, j, nb.u);
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) r2 += nb.u[k] * nb.u[k];
    nb.r = std::sqrt(r2);
    if (nb.r < rc) nbrs[i].push_back(nb);
  }

  const double Ae = p.A * p.epsilon;
  const double le = p.lambda * p.epsilon;
  const double gs = p.gamma * p.sigma;
  for (int i = 0; i < n; ++i) {
    const auto& list = nbrs[i];
    // Two-body, each pair once.
    for (const Nb& nb : list) {
      if (nb.j <= i) continue;
      const double r = nb.r;
      const double sr = p.sigma / r;
      const double pw_p = std::pow(sr, p.p), pw_q = std::pow(sr, p.q);
      const double ex = std::exp(p.sigma / (r - rc));
      const double bracket = p.B * pw_p - pw_q;
      const double v = Ae * bracket * ex;
      acc.energy += v;
      acc.per_atom[i] += 0.5 * v;
      acc.per_atom[nb.j] += 0.5 * v;
      if (acc.with_forces) {
        const double dbr = (-p.p * p.B * pw_p + p.q * pw_q) / r;
        const double dex = -p.sigma / ((r - rc) * (r - rc));
        const double dvdr = Ae * ex * (dbr + bracket * dex);
        for (int k = 0; k < d; ++k) {
          const double f = dvdr * nb.u[k] / r;
          acc.forces(nb.j, k) -= f;
          acc.forces(i, k) += f;
        }
      }
    }
    // Three-body with apex i.
    for (std::size_t a = 0; a < list.size(); ++a) {
      const Nb& A = list[a];
      const double ea = std::exp(gs / (A.r - rc));
      for (std::size_t b = a + 1; b < list.size(); ++b) {
        const Nb& B = list[b];
        const double eb = std::exp(gs / (B.r - rc));
        double dot = 0.0;
        for (int k = 0; k < d; ++k) dot += A.u[k] * B.u[k];
        const double inv = 1.0 / (A.r * B.r);
        const double cs = dot * inv;
        const double dc = cs - p.cos_theta0;
        const double v = le * dc * dc * ea * eb;
        acc.energy += v;
        acc.per_atom[i] += v;
        if (!acc.with_forces) continue;
        const double dea = -gs / ((A.r - rc) * (A.r - rc));  // d ln(ea)/dr
        const double deb = -gs / ((B.r - rc) * (B.r - rc));
        const double coef_c = 2.0 * le * dc * ea * eb;
        for (int k = 0; k < d; ++k) {
          const double dcdu = B.u[k] * inv - cs * A.u[k] / (A.r * A.r);
          const double dcdw = A.u[k] * inv - cs * B.u[k] / (B.r * B.r);
          const double gu = coef_c * dcdu + v * dea * A.u[k] / A.r;
          const double gw = coef_c * dcdw + v * deb * B.u[k] / B.r;
          acc.forces(A.j, k) -= gu;
          acc.forces(B.j, k) -= gw;
          acc.forces(i, k) += gu + gw;
        }
      }
    }
  }
}

double sw_equilibrium(const SwParams& p) {
  const double rc = p.cutoff();
  auto f = [&](double r) { return sw_two_body(r, p); };
  const auto res = boost::math::tools::brent_find_minima(f, 0.8 * p.sigma, rc * (1.0 - 1e-9), 52);
  return res.first;
}

}  // namespace

PotentialModel::PotentialModel(Params params, std::string tag, std::vector<std::string> species)
    : params_(std::move(params)), tag_(std::move(tag)), species_(std::move(species)) {
  const int ns = n_species();
  equilibrium_.resize(ns, ns);
  if (const auto* lj = std::get_if<LjParams>(&params_)) {
    if (lj->epsilon.rows() != ns || lj->sigma.rows() != ns) {
      throw std::invalid_argument("LJ parameter tables do not match the species set");
    }
    cutoff_ = lj->cutoff_factor * lj->sigma.maxCoeff();
    if (lj->truncation == LjParams::Truncation::Switch &&
        !(lj->switch_onset_factor > 0 && lj->switch_onset_factor < lj->cutoff_factor)) {
      throw std::invalid_argument("LJ switch onset must lie below the cutoff");
    }
    for (int a = 0; a < ns; ++a) {
      for (int b = 0; b < ns; ++b) {
        if (!(lj->epsilon(a, b) > 0 && lj->sigma(a, b) > 0) ||
            lj->epsilon(a, b) != lj->epsilon(b, a) || lj->sigma(a, b) != lj->sigma(b, a)) {
          throw std::invalid_argument("LJ parameters must be positive and symmetric");
        }
        equilibrium_(a, b) = std::pow(2.0, 1.0 / 6.0) * lj->sigma(a, b);
      }
    }
  } else if (const auto* sw = std::get_if<SwParams>(&params_)) {
    cutoff_ = sw->cutoff();
    equilibrium_.setConstant(sw_equilibrium(*sw));
  } else {
    const auto& c = std::get<CshParams>(params_);
    if (!(c.epsilon > 0 && c.sigma > 0 && c.alpha_exponent >= 2)) {
      throw std::invalid_argument("C-S-H parameters out of range");
    }
    cutoff_ = c.cutoff_factor * c.sigma;
    equilibrium_.setConstant(std::pow(2.0, 1.0 / c.alpha_exponent) * c.sigma);
  }
}

PotentialModel PotentialModel::binary_lj(LjParams params) {
  return PotentialModel(std::move(params), "lj", {"A", "B"});
}

PotentialModel PotentialModel::sw_silicon(SwParams params) {
  return PotentialModel(params, "sw", {"Si"});
}

PotentialModel PotentialModel::csh(CshParams params) {
  return PotentialModel(params, "csh", {"CSH"});
}

PotentialModel make_model(const std::string& system_tag) {
  if (system_tag == "lj") return PotentialModel::binary_lj();
  if (system_tag == "sw") return PotentialModel::sw_silicon();
  if (system_tag == "csh") return PotentialModel::csh();
  throw InputError("unknown system '" + system_tag + "' (expected lj, sw or csh)");
}

double PotentialModel::equilibrium_length(int species_i, int species_j) const {
  if (species_i < 0 || species_j < 0 || species_i >= n_species() || species_j >= n_species()) {
    throw std::out_of_range("species outside the model species set");
  }
  return equilibrium_(species_i, species_j);
}

double PotentialModel::energy_scale() const {
  if (const auto* lj = std::get_if<LjParams>(&params_)) return lj->epsilon.maxCoeff();
  if (const auto* sw = std::get_if<SwParams>(&params_)) return sw->epsilon;
  return std::get<CshParams>(params_).epsilon;
}

void PotentialModel::check_species(const Configuration& config) const {
  for (int s : config.species) {
    if (s < 0 || s >= n_species()) {
      throw std::invalid_argument("configuration species outside the model species set");
    }
  }
}

Evaluation PotentialModel::evaluate(const Configuration& config, const NeighborGraph& graph,
                                    bool with_forces) const {
  check_species(config);
  if (graph.n_nodes != static_cast<int>(config.size())) {
    throw std::invalid_argument("graph does not match configuration size");
  }
  Accumulator acc(static_cast<int>(config.size()), config.dim(), with_forces);
  if (const auto* lj = std::get_if<LjParams>(&params_)) {
    pair_kernel(config, graph, make_lj_table(*lj), acc);
  } else if (const auto* csh = std::get_if<CshParams>(&params_)) {
    pair_kernel(config, graph, make_csh_table(*csh), acc);
  } else {
    sw_kernel(config, graph, std::get<SwParams>(params_), acc);
  }
  return Evaluation{acc.energy, std::move(acc.per_atom), std::move(acc.forces)};
}

Evaluation PotentialModel::evaluate(const Configuration& config, bool with_forces) const {
  check_species(config);
  return evaluate(config, build_graph(config, cutoff_), with_forces);
}

Vector PotentialModel::per_atom_energies(const Configuration& config,
                                         const NeighborGraph& graph) const {
  return evaluate(config, graph, false).per_atom;
}

double PotentialModel::total_energy(const Configuration& config) const {
  return evaluate(config, false).energy;
}

Matrix PotentialModel::forces(const Configuration& config) const {
  return evaluate(config, true).forces;
}

}  // namespace rlrelax
