#pragma once

// Dense semidefinite programming for small matrices:
//
//   minimize    Tr[C X]
//   subject to  Tr[A_k X] = b_k,   X >= 0 (symmetric PSD).
//
// Solved by ADMM over the splitting X in affine subspace, Z in the PSD
// cone: the X-update is an orthogonal projection onto the constraint
// subspace (precomputed through a rank-revealing decomposition of the
// constraint Gram matrix, so linearly dependent constraints are fine), the
// Z-update clips negative eigenvalues, and the scaled dual W accumulates
// the gap.  The penalty rho is rebalanced whenever the primal and dual
// residuals drift apart.  Problems in this library have n <= ~70, where a
// few thousand of these O(n^3) iterations are cheap and reliably reach
// 1e-8..1e-10 residuals.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace rdmft {

/// One affine constraint Tr[a X] = b with symmetric coefficient matrix a.
struct AffineConstraint {
  Eigen::MatrixXd a;
  double b;
};

namespace detail {

/// Scaled vectorization of the lower triangle: the map preserves inner
/// products, svec(A) . svec(B) = Tr[A B] for symmetric A, B.
inline Eigen::VectorXd svec(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(n * (n + 1) / 2);
  const double s = std::sqrt(2.0);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      v[idx++] = (i == j) ? m(i, i) : s * m(i, j);
    }
  }
  return v;
}

inline Eigen::MatrixXd sunvec(const Eigen::VectorXd& v, int n) {
  Eigen::MatrixXd m(n, n);
  const double s = 1.0 / std::sqrt(2.0);
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double value = (i == j) ? v[idx] : s * v[idx];
      m(i, j) = value;
      m(j, i) = value;
      ++idx;
    }
  }
  return m;
}

}  // namespace detail

/// Orthogonal projection onto {X symmetric : Tr[A_k X] = b_k}.
class AffineProjector {
 public:
  AffineProjector(int n, std::vector<AffineConstraint> constraints)
      : n_(n), constraints_(std::move(constraints)) {
    const int m = static_cast<int>(constraints_.size());
    const int len = n * (n + 1) / 2;
    rows_.resize(m, len);
    rhs_.resize(m);
    for (int k = 0; k < m; ++k) {
      const auto& c = constraints_[k];
      if (c.a.rows() != n || c.a.cols() != n) {
        throw std::invalid_argument(
            "AffineProjector: constraint matrix has wrong size");
      }
      if ((c.a - c.a.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::invalid_argument(
            "AffineProjector: constraint matrix is not symmetric");
      }
      rows_.row(k) = detail::svec(c.a).transpose();
      rhs_[k] = c.b;
    }
    gram_ = rows_ * rows_.transpose();
    solver_.compute(gram_);
    solver_.setThreshold(1e-12);
  }

  int matrix_size() const { return n_; }
  const std::vector<AffineConstraint>& constraints() const {
    return constraints_;
  }

  Eigen::MatrixXd project(const Eigen::MatrixXd& x) const {
    const Eigen::VectorXd v = detail::svec(x);
    const Eigen::VectorXd corr =
        rows_.transpose() * solver_.solve(rhs_ - rows_ * v);
    return detail::sunvec(v + corr, n_);
  }

  /// Largest constraint violation of a symmetric matrix.
  double constraint_residual(const Eigen::MatrixXd& x) const {
    return (rows_ * detail::svec(x) - rhs_).cwiseAbs().maxCoeff();
  }

  /// Whether the affine system admits any solution at all: the least
  /// squares projection must actually satisfy the constraints.
  bool consistent(double tol = 1e-8) const {
    const Eigen::VectorXd p = rows_.transpose() * solver_.solve(rhs_);
    return (rows_ * p - rhs_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  int n_;
  std::vector<AffineConstraint> constraints_;
  Eigen::MatrixXd rows_;   // m x L svec'd constraint coefficients
  Eigen::VectorXd rhs_;
  Eigen::MatrixXd gram_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver_;
};

/// Projection onto the PSD cone: clip negative eigenvalues.
inline Eigen::MatrixXd project_psd(const Eigen::MatrixXd& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (x + x.transpose()));
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.asDiagonal() *
         es.eigenvectors().transpose();
}

enum class SdpStatus { converged, not_converged };

struct SdpOptions {
  int max_iterations = 20000;
  double primal_tol = 1e-8;
  double dual_tol = 1e-8;
  double rho = 1.0;            // initial penalty; adapted while running
  bool adapt_rho = true;
  bool record_history = true;
};

struct SdpResult {
  Eigen::MatrixXd x;           // PSD iterate (the Z variable)
  double value = 0.0;          // Tr[C x]
  SdpStatus status = SdpStatus::not_converged;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::vector<double> primal_history;
  std::vector<double> dual_history;
  Eigen::MatrixXd scaled_dual;
};

inline SdpResult sdp_minimize(const Eigen::MatrixXd& c,
                              const AffineProjector& projector,
                              const SdpOptions& options = {}) {
  const int n = projector.matrix_size();
  if (c.rows() != n || c.cols() != n) {
    throw std::invalid_argument("sdp_minimize: objective has wrong size");
  }
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("sdp_minimize: objective is not symmetric");
  }

  double rho = options.rho;
  // Start from the projected maximally mixed state.
  Eigen::MatrixXd z =
      project_psd(projector.project(Eigen::MatrixXd::Identity(n, n) /
                                    static_cast<double>(n)));
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);

  SdpResult result;
  if (options.record_history) {
    result.primal_history.reserve(options.max_iterations);
    result.dual_history.reserve(options.max_iterations);
  }

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::MatrixXd x = projector.project(z - w - c / rho);
    const Eigen::MatrixXd z_new = project_psd(x + w);
    const double primal = (x - z_new).norm();
    const double dual = rho * (z_new - z).norm();
    z = z_new;
    w += x - z;

    if (options.record_history) {
      result.primal_history.push_back(primal);
      result.dual_history.push_back(dual);
    }
    result.iterations = iter + 1;
    result.primal_residual = primal;
    result.dual_residual = dual;

    if (primal <= options.primal_tol && dual <= options.dual_tol) {
      result.status = SdpStatus::converged;
      break;
    }
    // Residual balancing keeps the two residuals within a decade of each
    // other; the scaled dual must be rescaled together with rho.
    if (options.adapt_rho && (iter + 1) % 50 == 0) {
      if (primal > 10.0 * dual && rho < 1e6) {
        rho *= 2.0;
        w /= 2.0;
      } else if (dual > 10.0 * primal && rho > 1e-6) {
        rho /= 2.0;
        w *= 2.0;
      }
    }
  }

  result.x = z;
  result.value = (c * z).trace();
  result.scaled_dual = rho * w;
  return result;
}

/// Distance between the affine subspace and the PSD cone, estimated by
/// alternating projections from a warm start.  A strictly positive limit
/// means the constraint set {X >= 0, Tr[A_k X] = b_k} is empty.
inline double feasibility_gap(const AffineProjector& projector,
                              const Eigen::MatrixXd& start,
                              int iterations = 2000) {
  Eigen::MatrixXd z = start;
  double gap = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Eigen::MatrixXd x = projector.project(z);
    z = project_psd(x);
    gap = (x - z).norm();
  }
  return gap;
}

}  // namespace rdmft
