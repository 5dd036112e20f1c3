#pragma once

// Levy constrained search over pure states: F_p(gamma) is the minimum of
// <psi|V|psi> over unit vectors psi in the sector whose one-matrix equals
// gamma.  The feasible set is non-convex (a sphere cut by quadratic
// constraints), so the solver is a seeded multistart local method:
//
//   1. penalty continuation — projected gradient descent on the unit
//      sphere for <psi|V|psi> + mu*||gamma(psi) - gamma||_F^2 with mu
//      swept over an increasing schedule;
//   2. Gauss-Newton restoration — feasibility-only least squares that
//      drives the one-matrix residual to machine precision;
//   3. tangential polish — descent of the raw energy inside the feasible
//      manifold until the projected-gradient stationarity measure is met.
//
// A restart is accepted on feasibility alone, and the reported value is
// the raw <psi|V|psi> of the best accepted iterate, never the penalized
// objective.  When no restart reaches the feasibility tolerance the
// outcome is pure_infeasible; that is evidence that gamma has no pure
// preimage in the sector, but a sufficiently unlucky search can produce
// the same verdict, so the best residual over all restarts is reported
// for callers that want to retry with a larger budget.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rdmft/fock.hpp"
#include "rdmft/rng.hpp"

namespace rdmft {

struct PureSearchConfig {
  /// Strictly increasing penalty weights for the continuation sweep.
  std::vector<double> penalty_schedule = {1e0, 1e1, 1e2, 1e3,
                                          1e4, 1e5, 1e6};
  int restarts = 32;
  std::uint64_t seed = 0;
  /// Stationarity: norm of the energy gradient projected onto the
  /// feasible tangent space.
  double gradient_tol = 1e-9;
  /// Acceptance: Frobenius norm of gamma(psi) - gamma.
  double feasibility_tol = 1e-6;
};

enum class PureStatus {
  converged,        ///< feasible and stationary at the tolerances
  not_converged,    ///< feasible value found, stationarity not certified
  pure_infeasible,  ///< no restart reached the feasibility tolerance
};

struct PureSearchReport {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd minimizer;
  /// Residual of the reported minimizer.
  double feasibility_residual = std::numeric_limits<double>::infinity();
  /// Projected energy gradient norm of the reported minimizer.
  double gradient_norm = std::numeric_limits<double>::infinity();
  /// Smallest residual seen over all restarts, accepted or not.
  double best_residual = std::numeric_limits<double>::infinity();
  long iterations = 0;
  bool converged = false;
  PureStatus status = PureStatus::pure_infeasible;
  int restarts_used = 0;
  int accepted = 0;
};

namespace detail {

/// The quadratic map psi -> gamma(psi) and its derivatives.  Rows run over
/// the upper triangle i <= j with off-diagonal weight sqrt(2), so the
/// 2-norm of the residual stack equals the Frobenius norm of the matrix
/// residual.
class PureFiber {
 public:
  PureFiber(const SectorBasis& basis, const OneMatrix& gamma)
      : d_(gamma.dim), n_(basis.dimension()) {
    if (d_ != basis.num_spin_orbitals()) {
      throw std::invalid_argument(
          "PureFiber: one-matrix dimension does not match the basis");
    }
    const int m = d_ * (d_ + 1) / 2;
    sym_.reserve(m);
    weight_.resize(m);
    target_.resize(m);
    int k = 0;
    for (int i = 0; i < d_; ++i) {
      for (int j = i; j < d_; ++j, ++k) {
        const Eigen::MatrixXd t = transition_operator(basis, j, i);
        sym_.push_back(0.5 * (t + t.transpose()));
        weight_[k] = (i == j) ? 1.0 : std::numbers::sqrt2;
        target_[k] = weight_[k] * gamma.matrix(i, j);
      }
    }
  }

  int rows() const { return static_cast<int>(sym_.size()); }
  int dim() const { return n_; }

  /// Weighted stack of gamma(psi) - gamma; its 2-norm is the Frobenius
  /// residual.
  Eigen::VectorXd residual(const Eigen::VectorXd& psi) const {
    Eigen::VectorXd r(rows());
    for (int k = 0; k < rows(); ++k) {
      r[k] = weight_[k] * psi.dot(sym_[k] * psi) - target_[k];
    }
    return r;
  }

  /// Jacobian of the residual stack: row k is 2 w_k (M_k psi)^T.
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& psi) const {
    Eigen::MatrixXd j(rows(), n_);
    for (int k = 0; k < rows(); ++k) {
      j.row(k) = 2.0 * weight_[k] * (sym_[k] * psi).transpose();
    }
    return j;
  }

  /// Gradient of ||gamma(psi) - gamma||_F^2, i.e. 4 Lift(R) psi with
  /// R = gamma(psi) - gamma lifted through the symmetrised transitions.
  Eigen::VectorXd penalty_gradient(const Eigen::VectorXd& psi) const {
    const Eigen::VectorXd r = residual(psi);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_);
    for (int k = 0; k < rows(); ++k) {
      g += (4.0 * weight_[k] * r[k]) * (sym_[k] * psi);
    }
    return g;
  }

 private:
  int d_ = 0;
  int n_ = 0;
  std::vector<Eigen::MatrixXd> sym_;
  std::vector<double> weight_;
  std::vector<double> target_;
};

struct RestartOutcome {
  Eigen::VectorXd psi;
  double value = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  double kkt_norm = std::numeric_limits<double>::infinity();
  long iterations = 0;
};

/// Gauss-Newton least-squares restoration onto the fiber, constrained to
/// the sphere tangent at each step.  Returns the reached residual norm.
inline double restore_feasibility(const PureFiber& fiber,
                                  Eigen::VectorXd& psi, int max_steps,
                                  long& iterations) {
  double res = fiber.residual(psi).norm();
  for (int it = 0; it < max_steps && res > 1e-13; ++it, ++iterations) {
    Eigen::MatrixXd jt = fiber.jacobian(psi);
    jt -= (jt * psi) * psi.transpose();
    const Eigen::VectorXd r = fiber.residual(psi);
    const Eigen::VectorXd delta =
        jt.completeOrthogonalDecomposition().solve(-r);
    double s = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 30; ++bt, s *= 0.5) {
      const Eigen::VectorXd cand = (psi + s * delta).normalized();
      const double cres = fiber.residual(cand).norm();
      if (cres < res) {
        psi = cand;
        res = cres;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return res;
}

/// Stages 2 and 3 from a given start: restoration onto the fiber followed
/// by a tangential polish of the raw energy inside the feasible manifold
/// (null space of the constraint Jacobian and the sphere normal), with
/// re-restoration after every step.
inline RestartOutcome finish_candidate(const Eigen::MatrixXd& v,
                                       const PureFiber& fiber,
                                       const PureSearchConfig& cfg,
                                       Eigen::VectorXd psi,
                                       long& iterations) {
  RestartOutcome out;
  const int n = fiber.dim();
  double res = restore_feasibility(fiber, psi, 80, iterations);

  double kkt = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 150; ++it, ++iterations) {
    Eigen::MatrixXd a(fiber.rows() + 1, n);
    a.topRows(fiber.rows()) = fiber.jacobian(psi);
    a.row(fiber.rows()) = psi.transpose();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const double smax = svd.singularValues()[0];
    int rank = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k) {
      if (svd.singularValues()[k] > std::max(1e-10, 1e-12 * smax)) ++rank;
    }
    const Eigen::VectorXd ge = 2.0 * (v * psi);
    Eigen::VectorXd pg = Eigen::VectorXd::Zero(n);
    for (int k = rank; k < n; ++k) {
      const Eigen::VectorXd dir = svd.matrixV().col(k);
      pg += dir.dot(ge) * dir;
    }
    kkt = pg.norm();
    if (kkt <= cfg.gradient_tol) break;
    const double e0 = psi.dot(v * psi);
    double s = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 30; ++bt, s *= 0.5) {
      Eigen::VectorXd cand = (psi - s * pg).normalized();
      const double cres = restore_feasibility(fiber, cand, 10, iterations);
      if (cres <= std::max(res, 1e-10) && cand.dot(v * cand) < e0 - 1e-14) {
        psi = cand;
        res = cres;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  out.psi = std::move(psi);
  out.value = out.psi.dot(v * out.psi);
  out.residual = res;
  out.kkt_norm = kkt;
  return out;
}

inline RestartOutcome run_restart(const Eigen::MatrixXd& v,
                                  const PureFiber& fiber,
                                  const PureSearchConfig& cfg,
                                  const Eigen::VectorXd& start) {
  long iterations = 0;
  Eigen::VectorXd psi = start;

  const auto objective = [&](const Eigen::VectorXd& p, double mu) {
    return p.dot(v * p) + mu * fiber.residual(p).squaredNorm();
  };

  // Stage 1: penalty continuation, projected gradient with backtracking.
  double alpha = 1.0;
  for (const double mu : cfg.penalty_schedule) {
    for (int it = 0; it < 300; ++it, ++iterations) {
      Eigen::VectorXd grad =
          2.0 * (v * psi) + mu * fiber.penalty_gradient(psi);
      grad -= psi.dot(grad) * psi;
      const double gnorm = grad.norm();
      if (gnorm <= 1e-8 * (1.0 + mu)) break;
      const double f0 = objective(psi, mu);
      bool moved = false;
      for (int bt = 0; bt < 40; ++bt, alpha *= 0.5) {
        const Eigen::VectorXd cand = (psi - alpha * grad).normalized();
        if (objective(cand, mu) <= f0 - 1e-4 * alpha * gnorm * gnorm) {
          psi = cand;
          alpha = std::min(alpha * 2.0, 1e3);
          moved = true;
          break;
        }
      }
      if (!moved) {
        alpha = 1.0;
        break;
      }
    }
  }

  // The continuation funnels toward low-energy basins, but it can commit
  // every start to the same fiber component.  Restoring directly from the
  // raw start gives a second candidate whose basin is the nearest fiber
  // component instead, so the pair covers the fiber far more evenly.
  RestartOutcome funneled = finish_candidate(v, fiber, cfg, psi, iterations);
  RestartOutcome direct = finish_candidate(v, fiber, cfg, start, iterations);

  const bool funneled_ok = funneled.residual <= cfg.feasibility_tol;
  const bool direct_ok = direct.residual <= cfg.feasibility_tol;
  RestartOutcome out;
  if (funneled_ok || direct_ok) {
    out = (direct_ok && (!funneled_ok || direct.value < funneled.value))
              ? std::move(direct)
              : std::move(funneled);
  } else {
    out = (direct.residual < funneled.residual) ? std::move(direct)
                                                : std::move(funneled);
  }
  out.iterations = iterations;
  return out;
}

}  // namespace detail

inline PureSearchReport levy_pure_search(const ManyBodyOperator& v,
                                         const OneMatrix& gamma,
                                         const PureSearchConfig& cfg = {}) {
  if (cfg.restarts < 1) {
    throw std::invalid_argument("levy_pure_search: restarts must be >= 1");
  }
  bool increasing = !cfg.penalty_schedule.empty();
  for (std::size_t k = 1; k < cfg.penalty_schedule.size(); ++k) {
    if (cfg.penalty_schedule[k] <= cfg.penalty_schedule[k - 1]) {
      increasing = false;
      break;
    }
  }
  if (!increasing) {
    throw std::invalid_argument(
        "levy_pure_search: penalty schedule must be strictly increasing");
  }
  if (std::abs(gamma.matrix.trace() - v.basis.num_particles()) > 1e-8) {
    throw std::invalid_argument(
        "levy_pure_search: one-matrix trace must equal the particle number");
  }

  const detail::PureFiber fiber(v.basis, gamma);
  PureSearchReport report;
  report.restarts_used = cfg.restarts;
  report.minimizer = Eigen::VectorXd::Zero(fiber.dim());

  for (int r = 0; r < cfg.restarts; ++r) {
    Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(r));
    detail::RestartOutcome out =
        detail::run_restart(v.matrix, fiber, cfg, rng.unit_vector(fiber.dim()));
    report.iterations += out.iterations;
    report.best_residual = std::min(report.best_residual, out.residual);
    if (out.residual <= cfg.feasibility_tol) {
      ++report.accepted;
      if (out.value < report.value) {
        report.value = out.value;
        report.minimizer = out.psi;
        report.feasibility_residual = out.residual;
        report.gradient_norm = out.kkt_norm;
      }
    } else if (report.accepted == 0 &&
               out.residual < report.feasibility_residual) {
      // Best evidence so far for an empty fiber.
      report.feasibility_residual = out.residual;
      report.minimizer = out.psi;
    }
  }

  if (report.accepted == 0) {
    report.status = PureStatus::pure_infeasible;
    report.converged = false;
  } else {
    report.converged = report.feasibility_residual <= cfg.feasibility_tol &&
                       report.gradient_norm <= cfg.gradient_tol;
    report.status = report.converged ? PureStatus::converged
                                     : PureStatus::not_converged;
  }
  return report;
}

struct PureRepresentability {
  bool representable = false;
  double residual = std::numeric_limits<double>::infinity();
};

/// Numerical pure-representability test: gamma has a pure preimage in the
/// sector iff some restart of the feasibility search reaches the
/// tolerance.  No explicit generalized Pauli constraints are involved.
inline PureRepresentability is_pure_representable(
    const OneMatrix& gamma, const SectorBasis& basis,
    const PureSearchConfig& cfg = {}) {
  const int n = basis.dimension();
  const ManyBodyOperator zero(basis, Eigen::MatrixXd::Zero(n, n));
  const PureSearchReport report = levy_pure_search(zero, gamma, cfg);
  return {report.status != PureStatus::pure_infeasible, report.best_residual};
}

}  // namespace rdmft
