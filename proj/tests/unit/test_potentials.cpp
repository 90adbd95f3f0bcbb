#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "rlrelax/neighbor.hpp"

using namespace rlrelax;

namespace {

PotentialModel shifted_ka() {
  LjParams p = LjParams::kob_andersen();
  p.truncation = LjParams::Truncation::Shift;
  return PotentialModel::binary_lj(p);
}

std::vector<PotentialModel> all_models() {
  return {PotentialModel::binary_lj(), shifted_ka(), PotentialModel::sw_silicon(),
          PotentialModel::csh()};
}

Configuration dimer(double r, int s0 = 0, int s1 = 0, double side = 20.0) {
  Matrix x = Matrix::Zero(2, 3);
  x(0, 0) = 5.0;
  x(1, 0) = 5.0 + r;
  return Configuration(x, {s0, s1}, SimulationBox::cubic(side));
}

}  // namespace

TEST_CASE("pair functions at reference points") {
  CHECK(lj_pair_energy(1.0, 1.0, 1.0) == doctest::Approx(0.0));
  CHECK(lj_pair_energy(std::pow(2.0, 1.0 / 6), 1.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(lj_pair_energy(2.5, 1.0, 1.0) ==
        doctest::Approx(4 * (std::pow(2.5, -12) - std::pow(2.5, -6))).epsilon(1e-14));
  CHECK(lj_pair_energy(2.5, 1.0, 1.0) == doctest::Approx(-0.016316).epsilon(1e-4));
  CHECK_THROWS(lj_pair_energy(0.0, 1.0, 1.0));

  const CshParams c;
  CHECK(csh_pair_energy(c.sigma, c) == doctest::Approx(0.0));
  CHECK(csh_pair_energy(std::pow(2.0, 1.0 / 14) * c.sigma, c) ==
        doctest::Approx(-c.epsilon).epsilon(1e-13));
  CHECK(csh_pair_energy(1.2 * c.sigma, c) / c.epsilon ==
        doctest::Approx(4 * (std::pow(1 / 1.2, 28) - std::pow(1 / 1.2, 14))).epsilon(1e-13));
  CHECK(csh_pair_energy(1.2 * c.sigma, c) / c.epsilon == doctest::Approx(-0.287281).epsilon(1e-5));
  CHECK_THROWS(csh_pair_energy(-1.0, c));
}

TEST_CASE("truncate and shift") {
  auto lj = [](double r) { return lj_pair_energy(r, 1.0, 1.0); };
  CHECK(truncated_pair(lj, 2.5, 2.5) == 0.0);
  CHECK(truncated_pair(lj, 3.0, 2.5) == 0.0);
  CHECK(std::abs(truncated_pair(lj, 2.5 - 1e-9, 2.5)) < 1e-9);
  CHECK(truncated_pair(lj, std::pow(2.0, 1.0 / 6), 2.5) == doctest::Approx(-0.983684).epsilon(1e-6));
}

TEST_CASE("Stillinger-Weber terms") {
  const SwParams p;
  CHECK(p.epsilon == 2.1683);
  CHECK(p.sigma == 2.0951);
  CHECK(p.A == 7.0495);
  CHECK(p.B == 0.6022);
  CHECK(p.lambda == 21.0);
  CHECK(p.gamma == 1.20);
  CHECK(p.cutoff() == doctest::Approx(3.77118).epsilon(1e-6));
  CHECK(sw_two_body(3.78, p) == 0.0);
  CHECK(std::abs(sw_two_body(p.cutoff() - 1e-6, p)) < 1e-12);

  // independent evaluation of the same closed forms
  const double r = 2.35, s = 2.0951, a = 1.80;
  const double two = 7.0495 * 2.1683 * (0.6022 * std::pow(s / r, 4) - 1.0) * std::exp(s / (r - a * s));
  CHECK(sw_two_body(r, p) == doctest::Approx(two).epsilon(1e-14));
  CHECK(sw_two_body(r, p) == doctest::Approx(-2.168322583).epsilon(1e-9));
  const double g = std::exp(1.2 * s / (r - a * s));
  const double three = 21.0 * 2.1683 * (1.0 / 9.0) * g * g;
  CHECK(sw_three_body(r, r, 0.0, p) == doctest::Approx(three).epsilon(1e-14));
  CHECK(sw_three_body(r, r, 0.0, p) == doctest::Approx(0.147072049).epsilon(1e-8));
  CHECK(sw_three_body(r, 2.2, -1.0 / 3.0, p) == 0.0);
  CHECK(sw_three_body(3.8, 2.2, 0.5, p) == 0.0);
}

TEST_CASE("dimer energies, per-atom split and forces") {
  const PotentialModel m = shifted_ka();
  const Configuration c = dimer(std::pow(2.0, 1.0 / 6));
  const Evaluation e = m.evaluate(c);
  CHECK(e.energy == doctest::Approx(-0.983684).epsilon(1e-6));
  CHECK(e.per_atom(0) == doctest::Approx(-0.491842).epsilon(1e-6));
  CHECK(e.per_atom(1) == e.per_atom(0));
  CHECK(e.forces.cwiseAbs().maxCoeff() < 1e-12);

  Matrix one = Matrix::Constant(1, 3, 3.0);
  const Evaluation iso = m.evaluate(Configuration(one, {0}, SimulationBox::cubic(10.0)));
  CHECK(iso.energy == 0.0);
  CHECK(iso.per_atom(0) == 0.0);
  CHECK(iso.forces.norm() == 0.0);

  CHECK(m.total_energy(dimer(3.0)) == 0.0);
}

TEST_CASE("equilateral LJ triangle sums three bonds") {
  const PotentialModel m = shifted_ka();
  const double r = std::pow(2.0, 1.0 / 6);
  Matrix x(3, 3);
  x << 5, 5, 5, 5 + r, 5, 5, 5 + r / 2, 5 + r * std::sqrt(3.0) / 2, 5;
  const Configuration c(x, {0, 0, 0}, SimulationBox::cubic(20.0));
  CHECK(m.total_energy(c) == doctest::Approx(3 * (-1.0 - lj_pair_energy(2.5, 1, 1))).epsilon(1e-12));
}

TEST_CASE("species outside the model are rejected") {
  CHECK_THROWS(PotentialModel::binary_lj().total_energy(dimer(1.1, 0, 2)));
  CHECK_THROWS(PotentialModel::sw_silicon().total_energy(dimer(2.3, 0, 1)));
}

TEST_CASE("equilibrium lengths") {
  const PotentialModel lj = PotentialModel::binary_lj();
  CHECK(lj.equilibrium_length(0, 0) == doctest::Approx(std::pow(2.0, 1.0 / 6)).epsilon(1e-12));
  CHECK(lj.equilibrium_length(0, 1) == doctest::Approx(0.8 * std::pow(2.0, 1.0 / 6)).epsilon(1e-12));
  CHECK(lj.equilibrium_length(1, 1) == doctest::Approx(0.88 * std::pow(2.0, 1.0 / 6)).epsilon(1e-12));
  const PotentialModel csh = PotentialModel::csh();
  CHECK(csh.equilibrium_length(0, 0) / 5.0 == doctest::Approx(1.05076).epsilon(1e-5));

  // SW: brute-force scan for the two-body minimum and a derivative sign change
  const SwParams p;
  const PotentialModel sw = PotentialModel::sw_silicon();
  double best_r = 0, best = 1e9;
  for (double r = 1.8; r < 3.7; r += 1e-5) {
    if (sw_two_body(r, p) < best) best = sw_two_body(r, p), best_r = r;
  }
  const double req = sw.equilibrium_length(0, 0);
  CHECK(req == doctest::Approx(best_r).epsilon(1e-4));
  CHECK(sw_two_body(req - 1e-3, p) > sw_two_body(req, p));
  CHECK(sw_two_body(req + 1e-3, p) > sw_two_body(req, p));
}

TEST_CASE("analytic forces match finite differences") {
  for (const auto& m : all_models()) {
    CAPTURE(m.system_tag());
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Configuration c = testing::random_config(m, 30, 100 + seed);
      auto energy = [&](const Matrix& x) {
        return m.total_energy(Configuration(x, c.species, c.box));
      };
      const Matrix fd = -testing::central_difference(energy, c.positions, 1e-5);
      const double worst = testing::worst_ratio(m.forces(c), fd, 1e-6, 1e-10 * m.energy_scale());
      CHECK(worst < 1.0);
      CHECK(m.forces(c).colwise().sum().norm() < 1e-9 * m.energy_scale());
    }
  }
}

TEST_CASE("per-atom energies partition the total") {
  for (const auto& m : all_models()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Evaluation e = m.evaluate(testing::random_config(m, 40, seed), false);
      CHECK(e.per_atom.sum() == doctest::Approx(e.energy).epsilon(1e-10));
    }
  }
}

TEST_CASE("translation and permutation invariance") {
  for (const auto& m : all_models()) {
    const Configuration c = testing::random_config(m, 30, 5);
    const double e0 = m.total_energy(c);
    Configuration t = c;
    t.positions.rowwise() += Eigen::RowVector3d(0.37, -1.91, 12.3);
    CHECK(m.total_energy(t) == doctest::Approx(e0).epsilon(1e-12));

    std::vector<int> perm(c.size());
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng(9);
    rng.shuffle(perm);
    Configuration p = c;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      p.positions.row(static_cast<Eigen::Index>(i)) = c.positions.row(perm[i]);
      p.species[i] = c.species[static_cast<std::size_t>(perm[i])];
    }
    CHECK(m.total_energy(p) == doctest::Approx(e0).epsilon(1e-12));
  }
}

TEST_CASE("cutoff locality") {
  const PotentialModel m = PotentialModel::binary_lj();
  // a compact cluster in one corner of a large box plus a distant atom
  RngStream rng(3);
  Configuration cluster = random_pack(12, SimulationBox::cubic(3.0), {{0, 0.8}, {1, 0.2}}, 0.8, rng);
  Matrix x(13, 3);
  x.topRows(12) = cluster.positions;
  x.row(12) << 15, 15, 15;
  std::vector<int> sp = cluster.species;
  sp.push_back(0);
  const Configuration a(x, sp, SimulationBox::cubic(30.0));
  Configuration b = a;
  b.positions.row(12) << 16.5, 14, 17;
  const Evaluation ea = m.evaluate(a), eb = m.evaluate(b);
  CHECK((ea.per_atom.head(12) - eb.per_atom.head(12)).norm() == 0.0);
  CHECK((ea.forces.topRows(12) - eb.forces.topRows(12)).norm() == 0.0);
}

TEST_CASE("tetrahedral triplets contribute no three-body energy") {
  const SwParams p;
  for (double r1 : {2.2, 2.35, 2.9}) {
    for (double r2 : {2.1, 2.5, 3.5}) CHECK(sw_three_body(r1, r2, -1.0 / 3.0, p) == 0.0);
  }
}
