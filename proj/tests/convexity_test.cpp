#include "rdmft/convexity.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>

#include "rdmft/dimer.hpp"
#include "rdmft/ensemble_search.hpp"
#include "rdmft/fock.hpp"
#include "rdmft/rng.hpp"

namespace {

const rdmft::FunctionalGrid& fp_grid() {
  static const rdmft::FunctionalGrid grid = rdmft::dimer_fp_grid(1.0, 201, 201);
  return grid;
}

const rdmft::FunctionalGrid& envelope_default_dual() {
  static const rdmft::FunctionalGrid grid = rdmft::biconjugate(fp_grid());
  return grid;
}

// Finer conjugate lattice for the energy round trip: the agreement of the
// two grid energies to 1e-9 needs a supporting slope on the dual lattice
// at the minimizing vertex, and 0.02 spacing guarantees one even in the
// low-curvature region of the functional.
const rdmft::FunctionalGrid& envelope_fine_dual() {
  static const rdmft::FunctionalGrid grid = rdmft::biconjugate(
      fp_grid(), rdmft::GridAxis(-8.0, 8.0, 801),
      rdmft::GridAxis(-8.0, 8.0, 801));
  return grid;
}

}  // namespace

TEST_CASE("axis and grid construction rejects bad input") {
  REQUIRE_THROWS_AS(rdmft::GridAxis(0.0, 1.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(rdmft::GridAxis(1.0, 0.0, 11), std::invalid_argument);
  REQUIRE_THROWS_AS(rdmft::GridAxis(0.0, 0.0, 11), std::invalid_argument);

  const rdmft::GridAxis axis(0.0, 1.0, 11);
  REQUIRE(axis.points.front() == 0.0);
  REQUIRE(axis.points.back() == 1.0);
  REQUIRE(axis.spacing() == Catch::Approx(0.1));

  // A grid with no finite value cannot be conjugated.
  rdmft::FunctionalGrid empty(axis, axis);
  REQUIRE_FALSE(empty.any_finite());
  REQUIRE_THROWS_AS(rdmft::legendre_fenchel(empty), std::domain_error);
  REQUIRE_THROWS_AS(rdmft::energy_from_functional(1.0, 0.0, 0.0, empty),
                    std::domain_error);
  REQUIRE_THROWS_AS(
      rdmft::FunctionalGrid::tabulate(
          axis, axis,
          [](double, double) {
            return std::numeric_limits<double>::infinity();
          }),
      std::domain_error);
}

TEST_CASE("the quadratic is its own conjugate") {
  const auto f = rdmft::FunctionalGrid::tabulate(
      rdmft::GridAxis(-2.0, 2.0, 81), rdmft::GridAxis(-2.0, 2.0, 81),
      [](double x, double y) { return 0.5 * (x * x + y * y); });
  const auto star = rdmft::legendre_fenchel(f, rdmft::GridAxis(-1.0, 1.0, 41),
                                            rdmft::GridAxis(-1.0, 1.0, 41));
  double worst = 0.0;
  for (int i = 0; i < 41; ++i) {
    for (int j = 0; j < 41; ++j) {
      const double u = star.axis1.points[i];
      const double v = star.axis2.points[j];
      worst = std::max(worst,
                       std::abs(star.values(i, j) - 0.5 * (u * u + v * v)));
    }
  }
  REQUIRE(worst <= f.axis1().spacing());
}

TEST_CASE("support function of a single point is exact") {
  const rdmft::GridAxis a1(0.0, 1.0, 11);
  const rdmft::GridAxis a2(-0.5, 0.5, 11);
  rdmft::FunctionalGrid f(a1, a2);
  const int i0 = 3, j0 = 4;
  f.set(i0, j0, 0.0);
  const auto star = rdmft::legendre_fenchel(f, rdmft::GridAxis(-2.0, 2.0, 21),
                                            rdmft::GridAxis(-2.0, 2.0, 21));
  const double x0 = a1.points[i0];
  const double y0 = a2.points[j0];
  for (int i = 0; i < 21; ++i) {
    for (int j = 0; j < 21; ++j) {
      // Same expression shape as the transform kernel, so the match is
      // bitwise.
      const double expected =
          star.axis1.points[i] * x0 + star.axis2.points[j] * y0 - 0.0;
      REQUIRE(star.values(i, j) == expected);
    }
  }
}

TEST_CASE("conjugate of the dimer functional vanishes at zero slope") {
  const auto star = rdmft::legendre_fenchel(fp_grid());
  REQUIRE(star.axis1.points[200] == 0.0);
  REQUIRE(star.axis2.points[200] == 0.0);
  REQUIRE(star.values(200, 200) == 0.0);
}

TEST_CASE("double-well envelope flattens between the wells") {
  const auto f = rdmft::FunctionalGrid::tabulate(
      rdmft::GridAxis(-1.5, 1.5, 121), rdmft::GridAxis(-1.5, 1.5, 121),
      [](double x, double y) {
        const double well = x * x - 1.0;
        return well * well + 0.5 * y * y;
      });
  const auto fbi = rdmft::biconjugate(f);
  const double tol = 2.0 * f.axis1().spacing();
  for (int i = 0; i < 121; ++i) {
    const double x = f.axis1().points[i];
    const double well = x * x - 1.0;
    const double expected = (std::abs(x) <= 1.0) ? 0.0 : well * well;
    REQUIRE(std::abs(fbi.at(i, 60) - expected) <= tol);
  }
}

TEST_CASE("a convex function is a fixed point of biconjugation") {
  const auto f = rdmft::FunctionalGrid::tabulate(
      rdmft::GridAxis(-2.0, 2.0, 81), rdmft::GridAxis(-2.0, 2.0, 81),
      [](double x, double y) { return 0.5 * (x * x + y * y); });
  const auto fbi = rdmft::biconjugate(f);
  double worst = 0.0;
  for (int i = 0; i < 81; ++i) {
    for (int j = 0; j < 81; ++j) {
      worst = std::max(worst, std::abs(fbi.at(i, j) - f.at(i, j)));
    }
  }
  REQUIRE(worst <= 1e-9);
}

TEST_CASE("biconjugation is idempotent") {
  const auto f = rdmft::dimer_fp_grid(1.0, 101, 101);
  const auto once = rdmft::biconjugate(f);
  const auto twice = rdmft::biconjugate(once);
  double worst = 0.0;
  for (int i = 0; i < 101; ++i) {
    for (int j = 0; j < 101; ++j) {
      worst = std::max(worst, std::abs(twice.at(i, j) - once.at(i, j)));
    }
  }
  REQUIRE(worst <= 1e-10);
}

TEST_CASE("the envelope is dominated, finite, and midpoint convex") {
  const auto& f = fp_grid();
  const auto& fbi = envelope_default_dual();
  const int n1 = f.axis1().count;
  const int n2 = f.axis2().count;

  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      REQUIRE(fbi.finite_at(i, j));
      if (f.finite_at(i, j)) {
        REQUIRE(fbi.at(i, j) <= f.at(i, j) + 1e-12);
      }
    }
  }

  // Midpoint convexity along rows, columns, and both diagonals.
  for (int i = 1; i + 1 < n1; ++i) {
    for (int j = 1; j + 1 < n2; ++j) {
      const double center = 2.0 * fbi.at(i, j) - 1e-10;
      REQUIRE(fbi.at(i - 1, j) + fbi.at(i + 1, j) >= center);
      REQUIRE(fbi.at(i, j - 1) + fbi.at(i, j + 1) >= center);
      REQUIRE(fbi.at(i - 1, j - 1) + fbi.at(i + 1, j + 1) >= center);
      REQUIRE(fbi.at(i - 1, j + 1) + fbi.at(i + 1, j - 1) >= center);
    }
  }
}

TEST_CASE("the pure functional is not convex: witness triple on the axis") {
  const auto& f = fp_grid();
  const double left = f.at(100, 100);    // (1/2, 0)
  const double mid = f.at(150, 100);     // (3/4, 0)
  const double right = f.at(200, 100);   // (1, 0)
  REQUIRE(left == 0.0);
  REQUIRE(mid == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(right == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(mid - 0.5 * (left + right) > 0.1);
}

TEST_CASE("envelope at (3/4, 0) halves the pure value") {
  const auto& fbi = envelope_default_dual();
  REQUIRE(fp_grid().axis1().points[150] == 0.75);
  REQUIRE(fbi.at(150, 100) == Catch::Approx(0.5).margin(0.02));

  const auto ensemble = rdmft::dimer_ensemble_search({0.75, 0.0}, 1.0);
  REQUIRE(ensemble.status == rdmft::EnsembleStatus::converged);
  REQUIRE(std::abs(fbi.at(150, 100) - ensemble.value) <= 0.02);
}

TEST_CASE("the envelope matches the ensemble functional on a lattice") {
  const auto& fbi = envelope_default_dual();
  const auto& f = fp_grid();
  double worst = 0.0;
  int compared = 0;
  for (int li = 0; li <= 40; ++li) {
    for (int lj = 0; lj <= 40; ++lj) {
      const int i = 5 * li;
      const int j = 5 * lj;
      const double x = f.axis1().points[i];
      const double y = f.axis2().points[j];
      const double dx = x - 0.5;
      if (dx * dx + y * y > 0.25 - 1e-9) continue;
      const auto report = rdmft::dimer_ensemble_search({x, y}, 1.0);
      REQUIRE(report.status == rdmft::EnsembleStatus::converged);
      worst = std::max(worst, std::abs(fbi.at(i, j) - report.value));
      ++compared;
    }
  }
  INFO("worst deviation " << worst << " over " << compared << " points");
  REQUIRE(compared > 1000);
  REQUIRE(worst <= 0.02);
}

TEST_CASE("mixture oracle reproduces the known decompositions") {
  const double u = 1.0;
  const auto evaluator = [u](const rdmft::DimerPoint& p) {
    return rdmft::f_pure_closed_form(p, u);
  };

  SECTION("(3/4, 0): two atoms at the far pole and the center") {
    const auto result =
        rdmft::envelope_via_mixtures(evaluator, {0.75, 0.0}, 3, 11);
    REQUIRE(result.value == Catch::Approx(0.5).margin(1e-3));
    REQUIRE(result.atoms.size() == 2);
    const bool first_is_pole = result.atoms[0].g11 > result.atoms[1].g11;
    const auto& pole = first_is_pole ? result.atoms[0] : result.atoms[1];
    const auto& center = first_is_pole ? result.atoms[1] : result.atoms[0];
    const double w_pole = first_is_pole ? result.weights[0] : result.weights[1];
    REQUIRE(pole.g11 == Catch::Approx(1.0).margin(0.05));
    REQUIRE(pole.g12 == Catch::Approx(0.0).margin(0.05));
    REQUIRE(center.g11 == Catch::Approx(0.5).margin(0.05));
    REQUIRE(center.g12 == Catch::Approx(0.0).margin(0.05));
    REQUIRE(w_pole == Catch::Approx(0.5).margin(0.05));
  }

  SECTION("(1/2, 1/2): a boundary point collapses onto itself") {
    // Only the singleton reproduces a boundary target exactly, but the
    // square-root cusp of the functional at the rim lets round-off split
    // the decomposition into atoms a hair inside; all of them must still
    // sit on top of the target.
    const auto result =
        rdmft::envelope_via_mixtures(evaluator, {0.5, 0.5}, 3, 12);
    REQUIRE(result.value == Catch::Approx(0.5).margin(1e-3));
    double weight_sum = 0.0;
    for (std::size_t k = 0; k < result.atoms.size(); ++k) {
      REQUIRE(result.atoms[k].g11 == Catch::Approx(0.5).margin(5e-3));
      REQUIRE(result.atoms[k].g12 == Catch::Approx(0.5).margin(5e-3));
      weight_sum += result.weights[k];
    }
    REQUIRE(weight_sum == Catch::Approx(1.0).margin(1e-9));
  }

  SECTION("(1/2, 0): the global minimum needs one atom") {
    const auto result =
        rdmft::envelope_via_mixtures(evaluator, {0.5, 0.0}, 3, 13);
    REQUIRE(result.value == Catch::Approx(0.0).margin(1e-3));
    REQUIRE(result.atoms.size() == 1);
  }

  SECTION("targets outside the disc are rejected") {
    REQUIRE_THROWS_AS(rdmft::envelope_via_mixtures(evaluator, {0.9, 0.4}),
                      std::invalid_argument);
  }
}

TEST_CASE("mixture oracle brackets the ensemble value at random points") {
  const double u = 1.0;
  const auto evaluator = [u](const rdmft::DimerPoint& p) {
    return rdmft::f_pure_closed_form(p, u);
  };
  rdmft::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const double radius = 0.02 + 0.43 * rng.uniform();
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    const rdmft::DimerPoint p{0.5 + radius * std::cos(angle),
                              radius * std::sin(angle)};
    const auto mixture = rdmft::envelope_via_mixtures(
        evaluator, p, 3, static_cast<std::uint64_t>(trial));
    const auto ensemble = rdmft::dimer_ensemble_search(p, u);
    INFO("point (" << p.g11 << ", " << p.g12 << ")");
    REQUIRE(ensemble.status == rdmft::EnsembleStatus::converged);
    REQUIRE(mixture.value >= ensemble.value - 1e-6);
    REQUIRE(std::abs(mixture.value - ensemble.value) <= 1e-3 * u);
  }
}

TEST_CASE("grid energy minimization matches exact diagonalization") {
  const auto& f = fp_grid();
  const auto& fbi = envelope_fine_dual();
  const auto basis = rdmft::SectorBasis::enumerate(4, 2, "singlet");

  SECTION("symmetric dimer at t = 1") {
    const auto e1 = rdmft::energy_from_functional(1.0, 0.0, 0.0, f);
    const auto e2 = rdmft::energy_from_functional(1.0, 0.0, 0.0, fbi);
    const double exact = 0.5 * (1.0 - std::sqrt(17.0));
    REQUIRE(e1.energy == Catch::Approx(exact).margin(0.02));
    REQUIRE(std::abs(e1.energy - e2.energy) <=
            1e-9 * std::max(1.0, std::abs(e1.energy)));
  }

  SECTION("no hopping: the minimum sits at the center") {
    const auto e = rdmft::energy_from_functional(0.0, 0.0, 0.0, f);
    REQUIRE(e.energy == 0.0);
    REQUIRE(e.gamma.g11 == 0.5);
    REQUIRE(e.gamma.g12 == 0.0);
  }

  SECTION("random one-body terms, both grids, against the eigensolver") {
    rdmft::Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const double t = rng.uniform(-2.0, 2.0);
      const double eps1 = rng.uniform(-2.0, 2.0);
      const double eps2 = rng.uniform(-2.0, 2.0);
      const auto e1 = rdmft::energy_from_functional(t, eps1, eps2, f);
      const auto e2 = rdmft::energy_from_functional(t, eps1, eps2, fbi);
      const rdmft::DimerParams params(t, eps1, eps2, 1.0);
      const auto gs = rdmft::ground_state(params.hamiltonian(basis));
      INFO("t=" << t << " eps1=" << eps1 << " eps2=" << eps2);
      REQUIRE(e1.energy == Catch::Approx(gs.energy).margin(0.02));
      REQUIRE(e2.energy == Catch::Approx(gs.energy).margin(0.02));
      REQUIRE(std::abs(e1.energy - e2.energy) <=
              1e-9 * std::max(1.0, std::abs(e1.energy)));
    }
  }
}
