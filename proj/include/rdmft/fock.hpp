#pragma once

// Dense second quantization for small fermionic sectors.
//
// Conventions used throughout:
//   * Spin orbitals are indexed 0..d-1 and interleaved by site:
//     orbital 2p is site p spin-up, orbital 2p+1 is site p spin-down.
//   * A determinant is a bitmask over orbitals; bit i set means orbital i
//     occupied.  The state attached to a mask {i1 < i2 < ... < iN} is
//     c^dag_{i1} c^dag_{i2} ... c^dag_{iN} |vac>, i.e. creators applied in
//     ascending index order.  Operator matrix elements then get their signs
//     from counting occupied orbitals below the one acted on.
//   * Sector bases list determinants in lexicographic order of the occupied
//     index tuple: (0,1), (0,2), ..., (1,2), ...  This order is part of the
//     API contract; spin-adapted bases derived from it are canonical too,
//     so results are reproducible bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rdmft {

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    result = result * static_cast<std::uint64_t>(n - k + i) /
             static_cast<std::uint64_t>(i);
  }
  return result;
}

namespace detail {

/// (-1)^(number of occupied orbitals with index < orb).
inline int jordan_wigner_sign(std::uint64_t bits, int orb) {
  const std::uint64_t below = bits & ((1ULL << orb) - 1);
  return (__builtin_popcountll(below) & 1) ? -1 : 1;
}

/// Apply c_orb.  Returns {sign, new bits} or nullopt when the result is 0.
inline std::optional<std::pair<int, std::uint64_t>> annihilate(
    std::uint64_t bits, int orb) {
  if (!(bits & (1ULL << orb))) return std::nullopt;
  return std::make_pair(jordan_wigner_sign(bits, orb),
                        bits & ~(1ULL << orb));
}

/// Apply c^dag_orb.  Returns {sign, new bits} or nullopt when the result is 0.
inline std::optional<std::pair<int, std::uint64_t>> create(
    std::uint64_t bits, int orb) {
  if (bits & (1ULL << orb)) return std::nullopt;
  return std::make_pair(jordan_wigner_sign(bits, orb), bits | (1ULL << orb));
}

}  // namespace detail

/// Basis of an (orbital count, particle number) sector, optionally projected
/// onto a spin subspace.  With a "singlet" filter the basis consists of S^2
/// eigenvectors with eigenvalue 0, expressed over the determinants in
/// `states` through the column-orthonormal matrix `subspace`.
class SectorBasis {
 public:
  static constexpr int max_dimension = 4096;

  /// Enumerates the sector.  `filter` is "" (all determinants) or "singlet".
  static SectorBasis enumerate(int num_spin_orbitals, int num_particles,
                               const std::string& filter = "");

  int num_spin_orbitals() const { return num_spin_orbitals_; }
  int num_particles() const { return num_particles_; }
  const std::string& filter() const { return filter_; }
  bool filtered() const { return !filter_.empty(); }

  /// Number of basis vectors operators and states are expressed in.
  int dimension() const {
    return filtered() ? static_cast<int>(subspace_.cols())
                      : static_cast<int>(states_.size());
  }

  /// Number of determinants spanning the unprojected sector.
  int full_dimension() const { return static_cast<int>(states_.size()); }

  const std::vector<std::uint64_t>& states() const { return states_; }

  /// Full-sector coordinates of the basis vectors (full_dimension x
  /// dimension).  Identity for an unfiltered basis.
  Eigen::MatrixXd subspace() const {
    if (filtered()) return subspace_;
    return Eigen::MatrixXd::Identity(full_dimension(), full_dimension());
  }

  int index_of(std::uint64_t bits) const {
    const auto it = std::lower_bound(
        index_.begin(), index_.end(), std::make_pair(bits, 0),
        [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it == index_.end() || it->first != bits) return -1;
    return it->second;
  }

  bool operator==(const SectorBasis& other) const {
    return num_spin_orbitals_ == other.num_spin_orbitals_ &&
           num_particles_ == other.num_particles_ &&
           filter_ == other.filter_;
  }

 private:
  SectorBasis() = default;

  void build_index() {
    index_.clear();
    index_.reserve(states_.size());
    for (int i = 0; i < static_cast<int>(states_.size()); ++i) {
      index_.emplace_back(states_[i], i);
    }
    std::sort(index_.begin(), index_.end());
  }

  int num_spin_orbitals_ = 0;
  int num_particles_ = 0;
  std::string filter_;
  std::vector<std::uint64_t> states_;
  std::vector<std::pair<std::uint64_t, int>> index_;
  Eigen::MatrixXd subspace_;  // empty unless filtered
};

/// Hermitian operator on a sector.
struct ManyBodyOperator {
  ManyBodyOperator(SectorBasis basis_in, Eigen::MatrixXd matrix_in)
      : basis(std::move(basis_in)), matrix(std::move(matrix_in)) {
    if (matrix.rows() != basis.dimension() ||
        matrix.cols() != basis.dimension()) {
      throw std::invalid_argument(
          "ManyBodyOperator: matrix size does not match basis dimension");
    }
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("ManyBodyOperator: matrix is not hermitian");
    }
  }

  SectorBasis basis;
  Eigen::MatrixXd matrix;
};

/// N-particle density operator: hermitian, unit trace, positive
/// semi-definite (up to round-off, which the constructor tolerates).
struct DensityMatrix {
  DensityMatrix(SectorBasis basis_in, Eigen::MatrixXd matrix_in)
      : basis(std::move(basis_in)), matrix(std::move(matrix_in)) {
    if (matrix.rows() != basis.dimension() ||
        matrix.cols() != basis.dimension()) {
      throw std::invalid_argument(
          "DensityMatrix: matrix size does not match basis dimension");
    }
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("DensityMatrix: matrix is not hermitian");
    }
    if (std::abs(matrix.trace() - 1.0) > 1e-10) {
      throw std::invalid_argument("DensityMatrix: trace is not 1");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) {
      throw std::invalid_argument(
          "DensityMatrix: matrix has a negative eigenvalue");
    }
  }

  static DensityMatrix pure(const SectorBasis& basis,
                            const Eigen::VectorXd& psi) {
    if (psi.size() != basis.dimension()) {
      throw std::invalid_argument("DensityMatrix::pure: wrong vector length");
    }
    const double norm = psi.norm();
    if (std::abs(norm - 1.0) > 1e-10) {
      throw std::invalid_argument(
          "DensityMatrix::pure: vector is not normalized");
    }
    return DensityMatrix(basis, psi * psi.transpose());
  }

  static DensityMatrix maximally_mixed(const SectorBasis& basis) {
    const int n = basis.dimension();
    return DensityMatrix(
        basis, Eigen::MatrixXd::Identity(n, n) / static_cast<double>(n));
  }

  /// Tr[G^2]; equals 1 exactly for a pure state.
  double purity() const { return matrix.squaredNorm(); }

  SectorBasis basis;
  Eigen::MatrixXd matrix;
};

/// One-particle reduced density matrix gamma_ij = <c^dag_j c_i>.
struct OneMatrix {
  OneMatrix(int dim_in, Eigen::MatrixXd matrix_in)
      : dim(dim_in), matrix(std::move(matrix_in)) {
    if (matrix.rows() != dim || matrix.cols() != dim) {
      throw std::invalid_argument("OneMatrix: wrong matrix size");
    }
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw std::invalid_argument("OneMatrix: matrix is not hermitian");
    }
  }

  /// Pauli ensemble representability: all natural occupations in [0, 1]
  /// and trace equal to the particle number, within `tol`.
  bool representable(int num_particles, double tol = 1e-9) const {
    if (std::abs(matrix.trace() - num_particles) > tol) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix,
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol &&
           es.eigenvalues().maxCoeff() <= 1.0 + tol;
  }

  int dim;
  Eigen::MatrixXd matrix;
};

/// Matrix of c^dag_i c_j on the given sector basis.
inline Eigen::MatrixXd transition_operator(const SectorBasis& basis, int i,
                                           int j) {
  const int d = basis.num_spin_orbitals();
  if (i < 0 || i >= d || j < 0 || j >= d) {
    throw std::invalid_argument("transition_operator: orbital out of range");
  }
  const int nfull = basis.full_dimension();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(nfull, nfull);
  for (int col = 0; col < nfull; ++col) {
    const std::uint64_t bits = basis.states()[col];
    const auto ann = detail::annihilate(bits, j);
    if (!ann) continue;
    const auto cre = detail::create(ann->second, i);
    if (!cre) continue;
    const int row = basis.index_of(cre->second);
    full(row, col) += ann->first * cre->first;
  }
  if (!basis.filtered()) return full;
  return basis.subspace().transpose() * full * basis.subspace();
}

namespace detail {

inline SectorBasis require_even_sites(const SectorBasis& basis,
                                      const char* who) {
  if (basis.num_spin_orbitals() % 2 != 0) {
    throw std::invalid_argument(std::string(who) +
                                ": needs an even number of spin orbitals "
                                "(interleaved up/down pairs)");
  }
  return basis;
}

}  // namespace detail

/// Assemble sum_ij h_ij c^dag_i c_j for a hermitian d x d coefficient
/// matrix h.
inline ManyBodyOperator build_one_body(const SectorBasis& basis,
                                       const Eigen::MatrixXd& h) {
  const int d = basis.num_spin_orbitals();
  if (h.rows() != d || h.cols() != d) {
    throw std::invalid_argument("build_one_body: coefficient matrix must be "
                                "d x d");
  }
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("build_one_body: coefficients not hermitian");
  }
  const int nfull = basis.full_dimension();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(nfull, nfull);
  for (int col = 0; col < nfull; ++col) {
    const std::uint64_t bits = basis.states()[col];
    for (int j = 0; j < d; ++j) {
      const auto ann = detail::annihilate(bits, j);
      if (!ann) continue;
      for (int i = 0; i < d; ++i) {
        if (h(i, j) == 0.0) continue;
        const auto cre = detail::create(ann->second, i);
        if (!cre) continue;
        full(basis.index_of(cre->second), col) +=
            h(i, j) * ann->first * cre->first;
      }
    }
  }
  if (basis.filtered()) {
    full = (basis.subspace().transpose() * full * basis.subspace()).eval();
  }
  // Symmetrize away round-off from the projection.
  full = 0.5 * (full + full.transpose().eval());
  return ManyBodyOperator(basis, full);
}

/// On-site Hubbard repulsion U sum_p n_{p,up} n_{p,down}.
inline ManyBodyOperator build_hubbard_interaction(const SectorBasis& basis,
                                                  double U) {
  detail::require_even_sites(basis, "build_hubbard_interaction");
  const int sites = basis.num_spin_orbitals() / 2;
  const int nfull = basis.full_dimension();
  Eigen::VectorXd diag(nfull);
  for (int col = 0; col < nfull; ++col) {
    const std::uint64_t bits = basis.states()[col];
    int doubly = 0;
    for (int p = 0; p < sites; ++p) {
      const std::uint64_t pair = 3ULL << (2 * p);
      if ((bits & pair) == pair) ++doubly;
    }
    diag[col] = U * doubly;
  }
  Eigen::MatrixXd full = diag.asDiagonal();
  if (basis.filtered()) {
    full = (basis.subspace().transpose() * full * basis.subspace()).eval();
    full = 0.5 * (full + full.transpose().eval());
  }
  return ManyBodyOperator(basis, full);
}

/// One term w c^dag_i c^dag_j c_l c_k (plus hermitian conjugate when it is
/// not self-adjoint already).  Orbital pairs must satisfy i < j and k < l.
struct PairInteractionTerm {
  int i, j, k, l;
  double weight;
};

/// Assemble a two-body interaction from antisymmetrized pair terms.
inline ManyBodyOperator build_pair_interaction(
    const SectorBasis& basis, const std::vector<PairInteractionTerm>& terms) {
  const int d = basis.num_spin_orbitals();
  const int nfull = basis.full_dimension();
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(nfull, nfull);
  auto apply = [&](int i, int j, int k, int l, double w) {
    // c^dag_i c^dag_j c_l c_k applied right to left.
    for (int col = 0; col < nfull; ++col) {
      const auto a1 = detail::annihilate(basis.states()[col], k);
      if (!a1) continue;
      const auto a2 = detail::annihilate(a1->second, l);
      if (!a2) continue;
      const auto c1 = detail::create(a2->second, j);
      if (!c1) continue;
      const auto c2 = detail::create(c1->second, i);
      if (!c2) continue;
      full(basis.index_of(c2->second), col) +=
          w * a1->first * a2->first * c1->first * c2->first;
    }
  };
  for (const auto& t : terms) {
    if (t.i < 0 || t.j >= d || t.k < 0 || t.l >= d || t.i >= t.j ||
        t.k >= t.l) {
      throw std::invalid_argument(
          "build_pair_interaction: term needs 0 <= i < j < d and "
          "0 <= k < l < d");
    }
    apply(t.i, t.j, t.k, t.l, t.weight);
    if (t.i != t.k || t.j != t.l) apply(t.k, t.l, t.j, t.i, t.weight);
  }
  if (basis.filtered()) {
    full = (basis.subspace().transpose() * full * basis.subspace()).eval();
  }
  full = 0.5 * (full + full.transpose().eval());
  return ManyBodyOperator(basis, full);
}

/// Contract a density operator to its one-matrix, gamma_ij = Tr[c^dag_j c_i
/// Gamma].
inline OneMatrix one_matrix(const DensityMatrix& density) {
  const int d = density.basis.num_spin_orbitals();
  Eigen::MatrixXd gamma(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      // Tr[c^dag_j c_i Gamma]: note the transition operator carries (j, i).
      const Eigen::MatrixXd t = transition_operator(density.basis, j, i);
      const double value = (t * density.matrix).trace();
      gamma(i, j) = value;
      gamma(j, i) = value;
    }
  }
  return OneMatrix(d, gamma);
}

struct GroundState {
  double energy;
  DensityMatrix state;
  double gap;       // distance to the next eigenvalue (inf for dim 1)
  bool degenerate;  // gap below the degeneracy threshold
};

inline constexpr double ground_state_degeneracy_threshold = 1e-9;

/// Lowest eigenpair of a hermitian operator.  When the ground level is
/// (nearly) degenerate the returned state is still deterministic: it is the
/// normalized projection of the first canonical basis vector with
/// non-negligible weight in the ground space, with an overall sign fixed by
/// making its first non-zero component positive.
inline GroundState ground_state(const ManyBodyOperator& op) {
  const int n = op.basis.dimension();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("ground_state: eigensolver failed");
  }
  const Eigen::VectorXd& evals = es.eigenvalues();
  const double e0 = evals[0];
  const double gap =
      n > 1 ? evals[1] - e0 : std::numeric_limits<double>::infinity();

  // Gather the (numerically) degenerate ground cluster.
  int cluster = 1;
  while (cluster < n && evals[cluster] - e0 <= 1e-12) ++cluster;
  const Eigen::MatrixXd v = es.eigenvectors().leftCols(cluster);

  Eigen::VectorXd psi;
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd proj = v * v.row(k).transpose();
    const double norm = proj.norm();
    if (norm > 1e-8) {
      psi = proj / norm;
      break;
    }
  }
  for (int m = 0; m < n; ++m) {
    if (std::abs(psi[m]) > 1e-10) {
      if (psi[m] < 0) psi = -psi;
      break;
    }
  }
  return GroundState{e0, DensityMatrix::pure(op.basis, psi), gap,
                     gap < ground_state_degeneracy_threshold};
}

inline SectorBasis SectorBasis::enumerate(int num_spin_orbitals,
                                          int num_particles,
                                          const std::string& filter) {
  if (num_spin_orbitals < 1 || num_spin_orbitals > 62) {
    throw std::domain_error("SectorBasis: orbital count out of range");
  }
  if (num_particles < 1 || num_particles > num_spin_orbitals) {
    throw std::domain_error("SectorBasis: particle number out of range");
  }
  const std::uint64_t dim = binomial(num_spin_orbitals, num_particles);
  if (dim > max_dimension) {
    throw std::domain_error("SectorBasis: sector dimension exceeds " +
                            std::to_string(max_dimension));
  }
  if (!filter.empty() && filter != "singlet") {
    throw std::domain_error("SectorBasis: unknown filter '" + filter + "'");
  }
  if (filter == "singlet" && num_spin_orbitals % 2 != 0) {
    throw std::domain_error(
        "SectorBasis: singlet filter needs interleaved up/down pairs");
  }

  SectorBasis basis;
  basis.num_spin_orbitals_ = num_spin_orbitals;
  basis.num_particles_ = num_particles;
  // The filter tag is attached only once the subspace is in place; the
  // S^2 assembly below needs the determinant-level operators.

  // Lexicographic enumeration of occupied index tuples.
  std::vector<int> occ(num_particles);
  for (int i = 0; i < num_particles; ++i) occ[i] = i;
  while (true) {
    std::uint64_t bits = 0;
    for (int idx : occ) bits |= 1ULL << idx;
    basis.states_.push_back(bits);
    int pos = num_particles - 1;
    while (pos >= 0 &&
           occ[pos] == num_spin_orbitals - num_particles + pos) {
      --pos;
    }
    if (pos < 0) break;
    ++occ[pos];
    for (int q = pos + 1; q < num_particles; ++q) occ[q] = occ[q - 1] + 1;
  }
  basis.build_index();
  if (filter.empty()) return basis;

  // Spin adaptation: build S^2 on the determinant sector and keep its null
  // space.  S^+ = sum_p c^dag_{p,up} c_{p,down}; S^2 = S^+ S^- + Sz^2 - Sz.
  detail::require_even_sites(basis, "SectorBasis(singlet)");
  const int sites = num_spin_orbitals / 2;
  const int nfull = basis.full_dimension();
  Eigen::MatrixXd splus = Eigen::MatrixXd::Zero(nfull, nfull);
  for (int p = 0; p < sites; ++p) {
    splus += transition_operator(basis, 2 * p, 2 * p + 1);
  }
  Eigen::VectorXd sz(nfull);
  for (int col = 0; col < nfull; ++col) {
    const std::uint64_t bits = basis.states_[col];
    int up = 0, down = 0;
    for (int p = 0; p < sites; ++p) {
      if (bits & (1ULL << (2 * p))) ++up;
      if (bits & (1ULL << (2 * p + 1))) ++down;
    }
    sz[col] = 0.5 * (up - down);
  }
  Eigen::MatrixXd s2 = splus * splus.transpose();
  s2 += Eigen::MatrixXd(
      (sz.array().square() - sz.array()).matrix().asDiagonal());
  s2 = 0.5 * (s2 + s2.transpose().eval());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s2);
  int null_dim = 0;
  while (null_dim < nfull && es.eigenvalues()[null_dim] < 1e-8) ++null_dim;
  if (null_dim == 0) {
    throw std::domain_error("SectorBasis: singlet subspace is empty");
  }
  const Eigen::MatrixXd null_basis = es.eigenvectors().leftCols(null_dim);

  // Canonicalize the null space: Gram-Schmidt of the projections of the
  // canonical determinant directions, in sector order, then sign-fix and
  // sort so that vectors supported on fewer (earlier) determinants come
  // first.  The result is independent of eigensolver details.
  std::vector<Eigen::VectorXd> vecs;
  for (int k = 0; k < nfull && static_cast<int>(vecs.size()) < null_dim;
       ++k) {
    Eigen::VectorXd w = null_basis * null_basis.row(k).transpose();
    for (const auto& v : vecs) w -= v.dot(w) * v;
    const double norm = w.norm();
    if (norm > 1e-6) vecs.push_back(w / norm);
  }
  if (static_cast<int>(vecs.size()) != null_dim) {
    throw std::runtime_error(
        "SectorBasis: singlet canonicalization failed to span the subspace");
  }
  auto support = [](const Eigen::VectorXd& v) {
    int size = 0, first = -1;
    for (int i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > 1e-10) {
        ++size;
        if (first < 0) first = i;
      }
    }
    return std::make_pair(size, first);
  };
  for (auto& v : vecs) {
    const auto [size, first] = support(v);
    if (first >= 0 && v[first] < 0) v = -v;
  }
  std::stable_sort(vecs.begin(), vecs.end(),
                   [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                     return support(a) < support(b);
                   });
  basis.subspace_.resize(nfull, null_dim);
  for (int c = 0; c < null_dim; ++c) basis.subspace_.col(c) = vecs[c];
  basis.filter_ = filter;
  return basis;
}

}  // namespace rdmft
