#pragma once

// Geometry of the dimer fibers: the set of singlet density operators with a
// prescribed one-matrix is a three-dimensional spectrahedron in the
// coordinates (G11, G12, G13) once the trace and the one-matrix pin down the
// remaining entries.  This header samples such fibers, locates their pure
// boundary states, measures how often random interaction directions expose
// pure minimizers, and classifies boundary points by their normal cones.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rdmft/dimer.hpp"
#include "rdmft/ensemble_search.hpp"
#include "rdmft/fock.hpp"
#include "rdmft/rng.hpp"

namespace rdmft {

/// Direction matrices of the fiber's affine parametrization
///   Gamma(u) = fiber_offset(gamma) + u1*B1 + u2*B2 + u3*B3,
/// where u = (G11, G12, G13).  The trace constraint and the one-matrix force
/// G22 = 1 + G11 - 2*g11, G33 = 2*(g11 - G11), G23 = sqrt(2)*g12 - G13.
inline const std::array<Eigen::Matrix3d, 3>& fiber_directions() {
  static const std::array<Eigen::Matrix3d, 3> dirs = [] {
    std::array<Eigen::Matrix3d, 3> b;
    b[0] = Eigen::Matrix3d::Zero();
    b[0](0, 0) = 1.0;
    b[0](1, 1) = 1.0;
    b[0](2, 2) = -2.0;
    b[1] = Eigen::Matrix3d::Zero();
    b[1](0, 1) = b[1](1, 0) = 1.0;
    b[2] = Eigen::Matrix3d::Zero();
    b[2](0, 2) = b[2](2, 0) = 1.0;
    b[2](1, 2) = b[2](2, 1) = -1.0;
    return b;
  }();
  return dirs;
}

inline Eigen::Matrix3d fiber_offset(const DimerPoint& gamma) {
  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  c(1, 1) = 1.0 - 2.0 * gamma.g11;
  c(2, 2) = 2.0 * gamma.g11;
  c(1, 2) = c(2, 1) = std::sqrt(2.0) * gamma.g12;
  return c;
}

inline Eigen::Matrix3d fiber_matrix(const DimerPoint& gamma,
                                    const Eigen::Vector3d& u) {
  const auto& b = fiber_directions();
  return fiber_offset(gamma) + u[0] * b[0] + u[1] * b[1] + u[2] * b[2];
}

/// The free coordinates (G11, G12, G13) of a singlet density operator.
inline Eigen::Vector3d fiber_coordinates(const Eigen::Matrix3d& m) {
  return Eigen::Vector3d(m(0, 0), m(0, 1), m(0, 2));
}

/// Eigenvalue clip and trace renormalization: turns a solver iterate that is
/// positive only up to round-off into a valid density operator.
inline SingletState project_to_state(const Eigen::Matrix3d& m) {
  const Eigen::Matrix3d sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(sym);
  Eigen::Vector3d clipped = es.eigenvalues().cwiseMax(0.0);
  const double total = clipped.sum();
  if (total <= 0.0) {
    throw std::invalid_argument("project_to_state: matrix has no positive part");
  }
  clipped /= total;
  return SingletState(es.eigenvectors() * clipped.asDiagonal() *
                      es.eigenvectors().transpose());
}

struct FiberPoint {
  Eigen::Vector3d coords;  // (G11, G12, G13)
  double purity;           // Tr[Gamma^2]
  bool boundary;           // smallest eigenvalue <= 1e-8
};

struct FiberSample {
  DimerPoint gamma;
  int resolution = 0;
  std::vector<FiberPoint> points;
};

struct PureBoundaryStates {
  int count = 0;
  std::vector<Eigen::Vector3d> amplitudes;  // canonical sign, unit norm
};

/// All pure states a|1> + b|2> + c|3> (up to global sign) whose one-matrix
/// is gamma: the real system a^2 + c^2/2 = g11, c*(a+b) = sqrt(2)*g12,
/// a^2 + b^2 + c^2 = 1, reduced to sign branches of a one-variable root
/// problem in c.  Generic interior points carry exactly two such states;
/// disc boundary points exactly one (returned in closed form); points
/// outside the disc none.  The exact center is excluded: there a whole
/// curve of pure states shares the one-matrix and no finite count exists.
inline PureBoundaryStates pure_boundary_states(const DimerPoint& gamma) {
  PureBoundaryStates result;
  const double r2 = gamma.radius_squared();
  if (r2 > 0.25 + 1e-12) return result;

  if (r2 >= 0.25 - 1e-12) {
    // Rim: the fiber is the single projector onto
    // (cos^2(t/2), sin^2(t/2), sin(t)/sqrt(2)) with t the disc angle.
    const double theta = std::atan2(gamma.g12, gamma.g11 - 0.5);
    Eigen::Vector3d v(std::cos(0.5 * theta) * std::cos(0.5 * theta),
                      std::sin(0.5 * theta) * std::sin(0.5 * theta),
                      std::sin(theta) / std::sqrt(2.0));
    v.normalize();
    result.count = 1;
    result.amplitudes.push_back(v);
    return result;
  }

  if (r2 < 1e-18) {
    throw std::domain_error(
        "pure_boundary_states: the disc center carries a continuum of pure "
        "states");
  }

  const double x = gamma.g11;
  const double y = gamma.g12;

  const auto canonical = [](Eigen::Vector3d v) {
    for (int k = 2; k >= 0; --k) {
      if (std::abs(v[k]) > 1e-10) {
        if (v[k] < 0.0) v = -v;
        break;
      }
    }
    return v;
  };
  const auto push_unique = [&](const Eigen::Vector3d& v) {
    for (const auto& w : result.amplitudes) {
      if (std::min((w - v).norm(), (w + v).norm()) <= 1e-7) return;
    }
    result.amplitudes.push_back(v);
  };

  if (std::abs(y) < 1e-12) {
    // Off-center axis point: c = 0 and the signs of a, b are free.
    const double a = std::sqrt(x);
    const double b = std::sqrt(1.0 - x);
    push_unique(canonical(Eigen::Vector3d(a, b, 0.0)));
    push_unique(canonical(Eigen::Vector3d(a, -b, 0.0)));
    result.count = static_cast<int>(result.amplitudes.size());
    return result;
  }

  // c*(a+b) and sqrt(2)*y share a sign; with the global sign fixed by c > 0
  // the four (sign a, sign b) branches cover every solution.
  const double cmax = std::sqrt(2.0 * std::min(x, 1.0 - x));
  const double target = std::sqrt(2.0) * y;
  for (const double s1 : {1.0, -1.0}) {
    for (const double s2 : {1.0, -1.0}) {
      const auto h = [&](double c) {
        const double a2 = std::max(0.0, x - 0.5 * c * c);
        const double b2 = std::max(0.0, 1.0 - x - 0.5 * c * c);
        return c * (s1 * std::sqrt(a2) + s2 * std::sqrt(b2)) - target;
      };
      const int scan = 4096;
      double prev_c = 0.0;
      double prev_h = h(0.0);
      for (int k = 1; k <= scan; ++k) {
        const double c = cmax * k / scan;
        const double value = h(c);
        if (prev_h == 0.0 || prev_h * value < 0.0) {
          double lo = prev_c, hi = c, flo = prev_h;
          for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double fmid = h(mid);
            if (flo * fmid <= 0.0) {
              hi = mid;
            } else {
              lo = mid;
              flo = fmid;
            }
          }
          const double c_root = 0.5 * (lo + hi);
          const double a = s1 * std::sqrt(std::max(0.0, x - 0.5 * c_root * c_root));
          const double b =
              s2 * std::sqrt(std::max(0.0, 1.0 - x - 0.5 * c_root * c_root));
          Eigen::Vector3d v(a, b, c_root);
          v.normalize();
          const DimerPoint reached = point_of_amplitudes(v);
          const double residual = std::hypot(reached.g11 - x, reached.g12 - y);
          if (residual <= 1e-9) push_unique(canonical(v));
        }
        prev_c = c;
        prev_h = value;
      }
    }
  }
  result.count = static_cast<int>(result.amplitudes.size());
  return result;
}

inline int count_pure_boundary_states(const DimerPoint& gamma) {
  return pure_boundary_states(gamma).count;
}

/// Lattice scan of the fiber: every PSD point of the (G11, G12, G13) box
/// [0,1] x [-1/2,1/2]^2 at the given resolution, plus the exact pure states
/// so the sample always carries the extremal points the lattice misses.
inline FiberSample sample_fiber(const DimerPoint& gamma, int resolution = 101) {
  if (resolution < 2) {
    throw std::invalid_argument("sample_fiber: resolution must be at least 2");
  }
  if (!gamma.inside_domain(1e-9)) {
    throw std::domain_error(
        "sample_fiber: empty fiber, the one-matrix is not "
        "ensemble-representable");
  }
  FiberSample sample;
  sample.gamma = gamma;
  sample.resolution = resolution;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
  for (int i = 0; i < resolution; ++i) {
    const double g11 = static_cast<double>(i) / (resolution - 1);
    // Diagonal feasibility of the dependent entries first.
    if (1.0 + g11 - 2.0 * gamma.g11 < 0.0) continue;
    if (gamma.g11 - g11 < 0.0) continue;
    for (int j = 0; j < resolution; ++j) {
      const double g12 = -0.5 + static_cast<double>(j) / (resolution - 1);
      for (int k = 0; k < resolution; ++k) {
        const double g13 = -0.5 + static_cast<double>(k) / (resolution - 1);
        const Eigen::Matrix3d m =
            fiber_matrix(gamma, Eigen::Vector3d(g11, g12, g13));
        es.compute(m, Eigen::EigenvaluesOnly);
        const double lambda_min = es.eigenvalues().minCoeff();
        if (lambda_min < -1e-12) continue;
        sample.points.push_back(FiberPoint{Eigen::Vector3d(g11, g12, g13),
                                           m.squaredNorm(),
                                           lambda_min <= 1e-8});
      }
    }
  }

  if (gamma.radius_squared() >= 1e-18) {
    const auto pure = pure_boundary_states(gamma);
    for (const auto& v : pure.amplitudes) {
      const Eigen::Matrix3d m = v * v.transpose();
      const Eigen::Vector3d coords = fiber_coordinates(m);
      const bool duplicate =
          std::any_of(sample.points.begin(), sample.points.end(),
                      [&](const FiberPoint& pt) {
                        return (pt.coords - coords).norm() <= 1e-9;
                      });
      if (!duplicate) {
        sample.points.push_back(FiberPoint{coords, m.squaredNorm(), true});
      }
    }
  }

  if (sample.points.empty()) {
    throw std::domain_error("sample_fiber: empty fiber at the requested "
                            "resolution");
  }
  return sample;
}

/// Unit-Frobenius random direction in the five-dimensional space of
/// traceless real symmetric singlet operators.  The trace component only
/// shifts fiber expectation values by a constant, so sampling traceless
/// directions loses no minimizer information.
inline Eigen::Matrix3d random_traceless_direction(Rng& rng) {
  const Eigen::VectorXd q = rng.unit_vector(5);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double inv_sqrt6 = 1.0 / std::sqrt(6.0);
  Eigen::Matrix3d v = Eigen::Matrix3d::Zero();
  v(0, 0) = q[0] * inv_sqrt2 + q[1] * inv_sqrt6;
  v(1, 1) = -q[0] * inv_sqrt2 + q[1] * inv_sqrt6;
  v(2, 2) = -2.0 * q[1] * inv_sqrt6;
  v(0, 1) = v(1, 0) = q[2] * inv_sqrt2;
  v(0, 2) = v(2, 0) = q[3] * inv_sqrt2;
  v(1, 2) = v(2, 1) = q[4] * inv_sqrt2;
  return v;
}

/// Minimizers with Tr[Gamma^2] >= 1 - this are counted as pure.
inline constexpr double pure_minimizer_threshold = 1e-6;

struct DirectionRecord {
  Eigen::Matrix3d direction;
  double value = std::numeric_limits<double>::infinity();
  Eigen::Vector3d minimizer = Eigen::Vector3d::Zero();
  double purity = 0.0;
  bool pure = false;
  bool unique = false;
  bool converged = false;
};

struct DirectionStats {
  DimerPoint gamma;
  int num_directions = 0;
  std::uint64_t seed = 0;
  int num_converged = 0;
  int num_failed = 0;
  bool fractions_defined = false;
  double fraction_pure_minimizer = std::numeric_limits<double>::quiet_NaN();
  double fraction_unique_minimizer = std::numeric_limits<double>::quiet_NaN();
  std::vector<DirectionRecord> records;
};

/// Minimize Tr[V Gamma] over the fiber for seeded random unit directions V
/// and record how often the minimizer is pure and how often it is unique.
/// Uniqueness is operationalized by ten re-solves with 1e-7-perturbed
/// objectives: the direction counts as unique when all eleven minimizers
/// agree pairwise within 1e-5.  Non-converged solves are counted separately
/// and excluded from both fractions.
inline DirectionStats random_direction_statistics(
    const DimerPoint& gamma, int num_directions, std::uint64_t seed,
    const EnsembleSearchConfig& config = {}) {
  if (num_directions < 0) {
    throw std::invalid_argument(
        "random_direction_statistics: negative direction count");
  }
  if (!gamma.inside_domain(1e-9)) {
    throw std::invalid_argument(
        "random_direction_statistics: the one-matrix is not "
        "ensemble-representable");
  }

  DirectionStats stats;
  stats.gamma = gamma;
  stats.num_directions = num_directions;
  stats.seed = seed;
  if (num_directions == 0) return stats;

  const SectorBasis basis = SectorBasis::enumerate(4, 2, "singlet");
  const OneMatrix one_matrix = spin_orbital_one_matrix(gamma);

  int pure_count = 0;
  int unique_count = 0;
  for (int r = 0; r < num_directions; ++r) {
    Rng direction_rng = Rng::substream(seed, 2 * static_cast<std::uint64_t>(r));
    Rng perturb_rng =
        Rng::substream(seed, 2 * static_cast<std::uint64_t>(r) + 1);
    DirectionRecord record;
    record.direction = random_traceless_direction(direction_rng);

    const auto base = levy_ensemble_search(
        ManyBodyOperator(basis, record.direction), one_matrix, config);
    bool all_converged = (base.status == EnsembleStatus::converged);
    std::vector<Eigen::Vector3d> minimizers;
    if (all_converged) {
      record.value = base.value;
      record.minimizer = fiber_coordinates(base.minimizer);
      record.purity = base.minimizer.squaredNorm();
      record.pure = record.purity >= 1.0 - pure_minimizer_threshold;
      minimizers.push_back(record.minimizer);
      for (int k = 0; k < 10 && all_converged; ++k) {
        Eigen::Matrix3d perturbed =
            record.direction + 1e-7 * random_traceless_direction(perturb_rng);
        perturbed /= perturbed.norm();
        const auto solve = levy_ensemble_search(
            ManyBodyOperator(basis, perturbed), one_matrix, config);
        if (solve.status != EnsembleStatus::converged) {
          all_converged = false;
          break;
        }
        minimizers.push_back(fiber_coordinates(solve.minimizer));
      }
    }

    record.converged = all_converged;
    if (!all_converged) {
      ++stats.num_failed;
      stats.records.push_back(std::move(record));
      continue;
    }

    record.unique = true;
    for (std::size_t p = 0; p < minimizers.size() && record.unique; ++p) {
      for (std::size_t q = p + 1; q < minimizers.size(); ++q) {
        if ((minimizers[p] - minimizers[q]).norm() > 1e-5) {
          record.unique = false;
          break;
        }
      }
    }

    ++stats.num_converged;
    if (record.pure) ++pure_count;
    if (record.unique) ++unique_count;
    stats.records.push_back(std::move(record));
  }

  if (stats.num_converged > 0) {
    stats.fractions_defined = true;
    stats.fraction_pure_minimizer =
        static_cast<double>(pure_count) / stats.num_converged;
    stats.fraction_unique_minimizer =
        static_cast<double>(unique_count) / stats.num_converged;
  }
  return stats;
}

enum class HyperplaneKind {
  exposed_unique_normal,      // smooth boundary point, a single normal
  non_exposed,                // extreme but not the unique minimizer of any V
  exposed_positive_measure    // normal cone of positive solid angle
};

struct HyperplaneClassification {
  HyperplaneKind kind = HyperplaneKind::non_exposed;
  int kernel_dimension = 0;
  int probes = 0;
  int hits = 0;
  double normal_cone_fraction = 0.0;
  Eigen::Vector3d witness_normal = Eigen::Vector3d::Zero();
};

/// Classify a fiber boundary point by the measure of interaction directions
/// it minimizes.  The normal cone at Gamma_0 is the image of the PSD cone on
/// ker(Gamma_0) under Y -> (Tr[Y B1], Tr[Y B2], Tr[Y B3]), so membership of
/// a probe direction is an exact small linear solve: no per-probe
/// optimization is needed.  A rank-one kernel yields a single normal ray
/// (hit with probability zero); whether the point is exposed by that ray is
/// then decided by one ensemble solve along it.
inline HyperplaneClassification supporting_hyperplane_classify(
    const DimerPoint& gamma, const SingletState& state, int probe_count = 10000,
    std::uint64_t seed = 0) {
  if (probe_count < 1) {
    throw std::invalid_argument(
        "supporting_hyperplane_classify: need at least one probe");
  }
  const Eigen::Vector3d u0 = fiber_coordinates(state.matrix);
  if ((fiber_matrix(gamma, u0) - state.matrix).cwiseAbs().maxCoeff() > 1e-7) {
    throw std::invalid_argument(
        "supporting_hyperplane_classify: the state does not lie on the "
        "fiber of this one-matrix");
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(state.matrix);
  const Eigen::Vector3d evals = es.eigenvalues();
  if (evals.minCoeff() > 1e-6) {
    throw std::domain_error(
        "supporting_hyperplane_classify: the state is an interior point of "
        "the fiber");
  }
  int kernel_dim = 0;
  while (kernel_dim < 3 && evals[kernel_dim] <= 1e-6) ++kernel_dim;

  HyperplaneClassification result;
  result.kernel_dimension = kernel_dim;
  result.probes = probe_count;

  const auto& b = fiber_directions();
  const Eigen::Matrix3d kernel_projector =
      es.eigenvectors().leftCols(kernel_dim) *
      es.eigenvectors().leftCols(kernel_dim).transpose();
  const auto pairing = [&](const Eigen::Matrix3d& y) {
    return Eigen::Vector3d((y.cwiseProduct(b[0])).sum(),
                           (y.cwiseProduct(b[1])).sum(),
                           (y.cwiseProduct(b[2])).sum());
  };
  result.witness_normal = pairing(kernel_projector).normalized();

  // Pre-assemble the linear map S -> (Tr[Q S Q^T B_i]) on the kernel face.
  Eigen::MatrixXd face_map;
  if (kernel_dim == 2) {
    const Eigen::Matrix<double, 3, 2> q = es.eigenvectors().leftCols(2);
    face_map.resize(3, 3);
    const Eigen::Matrix3d y11 = q.col(0) * q.col(0).transpose();
    const Eigen::Matrix3d y12 = q.col(0) * q.col(1).transpose() +
                                q.col(1) * q.col(0).transpose();
    const Eigen::Matrix3d y22 = q.col(1) * q.col(1).transpose();
    face_map.col(0) = pairing(y11);
    face_map.col(1) = pairing(y12);
    face_map.col(2) = pairing(y22);
  }

  for (int p = 0; p < probe_count; ++p) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(p));
    const Eigen::Matrix3d v = random_traceless_direction(rng);
    const Eigen::Vector3d w = pairing(v);
    const double wnorm = w.norm();
    if (wnorm < 1e-14) continue;
    bool hit = false;
    if (kernel_dim >= 2) {
      const Eigen::Vector3d s = face_map.fullPivLu().solve(w);
      const double residual = (face_map * s - w).norm();
      // S = [[s0, s1], [s1, s2]] must be PSD for w to lie in the cone.
      hit = residual <= 1e-10 * wnorm && s[0] >= -1e-12 && s[2] >= -1e-12 &&
            s[0] * s[2] - s[1] * s[1] >= -1e-12;
    } else {
      hit = w.dot(result.witness_normal) >= (1.0 - 1e-12) * wnorm;
    }
    if (hit) ++result.hits;
  }
  result.normal_cone_fraction =
      static_cast<double>(result.hits) / result.probes;

  if (result.normal_cone_fraction >= 1e-3) {
    result.kind = HyperplaneKind::exposed_positive_measure;
    return result;
  }

  // Zero (or negligible) solid angle: decide exposedness along the witness
  // ray.  The B_i are Frobenius-orthogonal with norms 6, 2, 4, so the
  // objective with the prescribed pairing is assembled directly.
  const Eigen::Vector3d w = result.witness_normal;
  const Eigen::Matrix3d v_star =
      (w[0] / 6.0) * b[0] + (w[1] / 2.0) * b[1] + (w[2] / 4.0) * b[2];
  const SectorBasis basis = SectorBasis::enumerate(4, 2, "singlet");
  const auto solve = levy_ensemble_search(ManyBodyOperator(basis, v_star),
                                          spin_orbital_one_matrix(gamma));
  if (solve.status == EnsembleStatus::converged &&
      (fiber_coordinates(solve.minimizer) - u0).norm() <= 1e-5) {
    result.kind = HyperplaneKind::exposed_unique_normal;
  } else {
    result.kind = HyperplaneKind::non_exposed;
  }
  return result;
}

}  // namespace rdmft
