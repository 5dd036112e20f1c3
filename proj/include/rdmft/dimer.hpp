#pragma once

// The asymmetric Hubbard dimer: two sites, two electrons, singlet sector.
//
// The three-dimensional singlet basis is
//   |1> = both electrons on site 1,
//   |2> = both electrons on site 2,
//   |3> = the covalent singlet bond (|1up 2down> - |1down 2up>)/sqrt(2),
// in that order; it matches what SectorBasis::enumerate(4, 2, "singlet")
// produces, so states can be moved between the two representations without
// any reshuffling (dimer_test pins this).
//
// By spin symmetry and reality, the one-matrix of a singlet state is fixed
// by two numbers: the occupation g11 of site 1 and the site 1 <-> site 2
// coherence g12 (per spin channel).  Pauli representability confines
// (g11, g12) to the closed disc of radius 1/2 around (1/2, 0).  On that
// disc the pure functional for the on-site repulsion U has a closed form,
// implemented below, against which the iterative solvers are checked.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdmft/fock.hpp"

namespace rdmft {

struct DimerParams {
  DimerParams(double t_in, double eps1_in, double eps2_in, double U_in)
      : t(t_in), eps1(eps1_in), eps2(eps2_in), U(U_in) {
    if (!(U >= 0.0)) {
      throw std::invalid_argument("DimerParams: U must be non-negative");
    }
  }

  /// One-body coefficients over the interleaved spin orbitals
  /// (1up, 1down, 2up, 2down).
  Eigen::MatrixXd one_body_matrix() const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
    h(0, 0) = h(1, 1) = eps1;
    h(2, 2) = h(3, 3) = eps2;
    h(0, 2) = h(2, 0) = -t;
    h(1, 3) = h(3, 1) = -t;
    return h;
  }

  ManyBodyOperator hamiltonian(const SectorBasis& basis) const {
    const auto hop = build_one_body(basis, one_body_matrix());
    const auto rep = build_hubbard_interaction(basis, U);
    return ManyBodyOperator(basis, hop.matrix + rep.matrix);
  }

  double t, eps1, eps2, U;
};

/// A point of the dimer one-matrix disc.
struct DimerPoint {
  double g11 = 0.5;
  double g12 = 0.0;

  /// Squared distance from the disc center (1/2, 0).
  double radius_squared() const {
    const double x = g11 - 0.5;
    return x * x + g12 * g12;
  }

  bool inside_domain(double tol = 1e-12) const {
    return radius_squared() <= 0.25 + tol;
  }
};

/// Density operator on the singlet basis: real symmetric, unit trace,
/// positive semi-definite.
struct SingletState {
  explicit SingletState(const Eigen::Matrix3d& m) : matrix(m) {
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("SingletState: matrix is not symmetric");
    }
    if (std::abs(matrix.trace() - 1.0) > 1e-10) {
      throw std::invalid_argument("SingletState: trace is not 1");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(matrix,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      throw std::invalid_argument("SingletState: negative eigenvalue");
    }
  }

  static SingletState pure(const Eigen::Vector3d& amplitudes) {
    const double norm = amplitudes.norm();
    if (std::abs(norm - 1.0) > 1e-10) {
      throw std::invalid_argument("SingletState::pure: not normalized");
    }
    return SingletState(amplitudes * amplitudes.transpose());
  }

  double purity() const { return matrix.squaredNorm(); }

  Eigen::Matrix3d matrix;
};

/// Full-sector coordinates of |1>, |2>, |3> over the six determinants of
/// the (4 orbitals, 2 particles) sector in lexicographic order.
inline Eigen::Matrix<double, 6, 3> singlet_embedding() {
  Eigen::Matrix<double, 6, 3> e = Eigen::Matrix<double, 6, 3>::Zero();
  e(0, 0) = 1.0;                  // {1up, 1down}
  e(5, 1) = 1.0;                  // {2up, 2down}
  e(2, 2) = 1.0 / std::sqrt(2.0); // {1up, 2down}
  e(3, 2) = -1.0 / std::sqrt(2.0);// {1down, 2up}
  return e;
}

/// Contraction of a singlet density operator to its disc point:
/// g11 = G_11 + G_33/2, g12 = (G_13 + G_23)/sqrt(2).
inline DimerPoint one_matrix_from_singlet(const SingletState& state) {
  const Eigen::Matrix3d& m = state.matrix;
  return DimerPoint{m(0, 0) + 0.5 * m(2, 2),
                    (m(0, 2) + m(1, 2)) / std::sqrt(2.0)};
}

/// Disc point reached by the pure state a|1> + b|2> + c|3>.
inline DimerPoint point_of_amplitudes(const Eigen::Vector3d& v) {
  return DimerPoint{v[0] * v[0] + 0.5 * v[2] * v[2],
                    v[2] * (v[0] + v[1]) / std::sqrt(2.0)};
}

/// On-site repulsion as a matrix on the singlet basis: diag(U, U, 0).
inline Eigen::Matrix3d hubbard_interaction_singlet(double U) {
  Eigen::Matrix3d v = Eigen::Matrix3d::Zero();
  v(0, 0) = v(1, 1) = U;
  return v;
}

/// <V> = U (G_11 + G_22): each of |1>, |2> carries one doubly occupied
/// site, |3> carries none.
inline double dimer_interaction_expectation(const SingletState& state,
                                            double U) {
  return U * (state.matrix(0, 0) + state.matrix(1, 1));
}

/// The 4x4 spin-orbital one-matrix of a disc point (both spin channels
/// carry the same spatial block).
inline OneMatrix spin_orbital_one_matrix(const DimerPoint& p) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(4, 4);
  g(0, 0) = g(1, 1) = p.g11;
  g(2, 2) = g(3, 3) = 1.0 - p.g11;
  g(0, 2) = g(2, 0) = p.g12;
  g(1, 3) = g(3, 1) = p.g12;
  return OneMatrix(4, g);
}

/// Closed-form pure functional on the disc.  Outside the disc the value is
/// +infinity (no pure state reaches such a one-matrix).  At the exact
/// center the minimizing family contains the covalent bond state with zero
/// double occupation, so the search value is 0 even though the formula's
/// radial limits differ; the function is discontinuous there.
inline double f_pure_closed_form(const DimerPoint& p, double U) {
  // Canonicalize to the particle-hole representative with g11 >= 1/2 so the
  // hole symmetry F(g11) = F(1 - g11) holds bitwise: for g >= 1/2 both
  // 1 - g and 1 - (1 - g) are exact in IEEE arithmetic, hence both mirror
  // images reduce to the same canonical input.  (g12 -> -g12 is exact
  // anyway since only g12^2 enters.)
  const double gm = std::max(p.g11, 1.0 - p.g11);
  const double x = gm - 0.5;  // exact: gm is in [1/2, 1] up to round-off
  const double y = p.g12;
  const double r2 = x * x + y * y;
  if (r2 > 0.25 + 1e-12) return std::numeric_limits<double>::infinity();
  if (r2 == 0.0) return 0.0;
  const double bracket = std::max(0.0, 1.0 - 4.0 * y * y - 4.0 * x * x);
  return U * (0.5 * y * y * (1.0 - std::sqrt(bracket)) + x * x) / r2;
}

struct DimerPureSearchResult {
  double value;                  // min <V> over feasible pure states
  bool feasible;                 // some pure state reaches the target
  double residual;               // best |gamma(psi) - target| found
  Eigen::Vector3d amplitudes;    // argmin (or best-residual state)
};

inline constexpr double dimer_pure_feasibility_tol = 1e-8;

/// Independent pure-state search on the dimer: scan the (theta, phi)
/// sphere of real singlet amplitudes on a coarse grid, then polish every
/// local residual minimum with Levenberg-Marquardt.  Interior disc points
/// are reached by finitely many pure states; the scan locates all their
/// basins and the minimum interaction expectation among the polished
/// feasible states is reported.  Infeasible targets (e.g. outside the
/// disc) are reported as such together with the best residual achieved.
inline DimerPureSearchResult f_pure_search_dimer(const DimerPoint& target,
                                                 double U,
                                                 int resolution = 256) {
  if (resolution < 16) {
    throw std::invalid_argument("f_pure_search_dimer: resolution too small");
  }
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  struct Candidate {
    double res2, theta, phi;
  };

  const int ntheta = resolution;
  const int nphi = 2 * resolution;
  std::vector<double> grid(static_cast<std::size_t>(ntheta) * nphi);

  auto residual2 = [&](double theta, double phi) {
    const double a = std::sin(theta) * std::cos(phi);
    const double b = std::sin(theta) * std::sin(phi);
    const double c = std::cos(theta);
    const double r1 = a * a + 0.5 * c * c - target.g11;
    const double r2 = c * (a + b) * inv_sqrt2 - target.g12;
    return r1 * r1 + r2 * r2;
  };

  auto theta_at = [&](int i) { return M_PI * (i + 0.5) / ntheta; };
  auto phi_at = [&](int j) { return 2.0 * M_PI * j / nphi; };

  for (int i = 0; i < ntheta; ++i) {
    for (int j = 0; j < nphi; ++j) {
      grid[static_cast<std::size_t>(i) * nphi + j] =
          residual2(theta_at(i), phi_at(j));
    }
  }

  std::vector<Candidate> candidates;
  auto cell = [&](int i, int j) {
    return grid[static_cast<std::size_t>(i) * nphi + ((j + nphi) % nphi)];
  };
  for (int i = 0; i < ntheta; ++i) {
    for (int j = 0; j < nphi; ++j) {
      const double v = cell(i, j);
      if (v > cell(i, j - 1) || v > cell(i, j + 1)) continue;
      if (i > 0 && v > cell(i - 1, j)) continue;
      if (i + 1 < ntheta && v > cell(i + 1, j)) continue;
      candidates.push_back({v, theta_at(i), phi_at(j)});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return a.res2 < b.res2;
            });
  if (candidates.size() > 160) candidates.resize(160);
  // The poles (pure |3>) sit between grid rows; add them explicitly.
  candidates.push_back({residual2(0.0, 0.0), 0.0, 0.0});

  // Levenberg-Marquardt on the two residuals over (theta, phi).
  auto evaluate = [&](double theta, double phi, Eigen::Vector2d& r,
                      Eigen::Matrix2d* jac) {
    const double st = std::sin(theta), ct = std::cos(theta);
    const double sp = std::sin(phi), cp = std::cos(phi);
    const double a = st * cp, b = st * sp, c = ct;
    r[0] = a * a + 0.5 * c * c - target.g11;
    r[1] = c * (a + b) * inv_sqrt2 - target.g12;
    if (jac != nullptr) {
      const double da_dt = ct * cp, db_dt = ct * sp, dc_dt = -st;
      const double da_dp = -st * sp, db_dp = st * cp;
      (*jac)(0, 0) = 2.0 * a * da_dt + c * dc_dt;
      (*jac)(0, 1) = 2.0 * a * da_dp;
      (*jac)(1, 0) = (dc_dt * (a + b) + c * (da_dt + db_dt)) * inv_sqrt2;
      (*jac)(1, 1) = c * (da_dp + db_dp) * inv_sqrt2;
    }
  };

  double best_value = std::numeric_limits<double>::infinity();
  double best_res2 = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best_feasible = Eigen::Vector3d::Zero();
  Eigen::Vector3d best_any = Eigen::Vector3d::Zero();
  bool feasible = false;

  for (const auto& start : candidates) {
    double theta = start.theta, phi = start.phi;
    Eigen::Vector2d r;
    evaluate(theta, phi, r, nullptr);
    double res2 = r.squaredNorm();
    double lambda = 1e-8;
    for (int iter = 0; iter < 60 && res2 > 1e-24; ++iter) {
      Eigen::Matrix2d jac;
      evaluate(theta, phi, r, &jac);
      const Eigen::Matrix2d jtj = jac.transpose() * jac;
      const Eigen::Vector2d jtr = jac.transpose() * r;
      bool stepped = false;
      for (int attempt = 0; attempt < 10; ++attempt) {
        const Eigen::Vector2d delta =
            (jtj + lambda * Eigen::Matrix2d::Identity())
                .ldlt()
                .solve(-jtr);
        const double theta_try = theta + delta[0];
        const double phi_try = phi + delta[1];
        Eigen::Vector2d r_try;
        evaluate(theta_try, phi_try, r_try, nullptr);
        if (r_try.squaredNorm() < res2) {
          theta = theta_try;
          phi = phi_try;
          res2 = r_try.squaredNorm();
          lambda = std::max(lambda / 3.0, 1e-14);
          stepped = true;
          break;
        }
        lambda *= 10.0;
      }
      if (!stepped) break;
    }

    const double st = std::sin(theta), ct = std::cos(theta);
    const Eigen::Vector3d v(st * std::cos(phi), st * std::sin(phi), ct);
    if (res2 < best_res2) {
      best_res2 = res2;
      best_any = v;
    }
    if (std::sqrt(res2) <= dimer_pure_feasibility_tol) {
      const double value = U * (v[0] * v[0] + v[1] * v[1]);
      if (!feasible || value < best_value) {
        best_value = value;
        best_feasible = v;
      }
      feasible = true;
    }
  }

  return DimerPureSearchResult{
      feasible ? best_value : std::numeric_limits<double>::infinity(),
      feasible, std::sqrt(best_res2), feasible ? best_feasible : best_any};
}

}  // namespace rdmft
