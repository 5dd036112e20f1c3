#pragma once

// Discrete Legendre-Fenchel machinery on two-dimensional uniform grids:
// conjugation, biconjugation (the lower convex envelope), a mixture-based
// envelope oracle, and grid-based energy minimization for the dimer.
//
// Both conjugation passes run through one support-transform kernel with a
// single compiled dot-product expression.  That makes the biconjugate
// reproduce the primal value bitwise (up to one subtraction rounding) at
// every hull vertex whose supporting slope lies on the dual lattice, which
// the energy round-trip tests rely on.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rdmft/dimer.hpp"
#include "rdmft/rng.hpp"

namespace rdmft {

/// Uniform strictly increasing 1-D grid; the node values are computed once
/// and stored so every consumer sees identical doubles.
struct GridAxis {
  GridAxis(double lo_in, double hi_in, int count_in)
      : lo(lo_in), hi(hi_in), count(count_in) {
    if (!(std::isfinite(lo) && std::isfinite(hi)) || !(lo < hi)) {
      throw std::invalid_argument("GridAxis: need finite lo < hi");
    }
    if (count < 2) {
      throw std::invalid_argument("GridAxis: need at least two points");
    }
    points.resize(count);
    for (int k = 0; k < count; ++k) {
      points[k] = lo + (hi - lo) * k / (count - 1);
    }
  }

  double spacing() const { return (hi - lo) / (count - 1); }

  double lo;
  double hi;
  int count;
  std::vector<double> points;
};

/// Grid of functional values over (g11, g12) with an explicit finiteness
/// mask.  Out-of-domain points hold a sentinel and are flagged infinite;
/// the sentinel never participates in arithmetic.
class FunctionalGrid {
 public:
  FunctionalGrid(GridAxis axis1, GridAxis axis2, std::string units_in = "energy")
      : axis1_(std::move(axis1)),
        axis2_(std::move(axis2)),
        values_(Eigen::MatrixXd::Constant(axis1_.count, axis2_.count,
                                          sentinel())),
        finite_(static_cast<std::size_t>(axis1_.count) * axis2_.count, 0),
        units(std::move(units_in)) {}

  static constexpr double sentinel() {
    return std::numeric_limits<double>::max();
  }

  const GridAxis& axis1() const { return axis1_; }
  const GridAxis& axis2() const { return axis2_; }

  void set(int i, int j, double value) {
    if (std::isfinite(value)) {
      values_(i, j) = value;
      finite_[index(i, j)] = 1;
    } else {
      set_infinite(i, j);
    }
  }

  void set_infinite(int i, int j) {
    values_(i, j) = sentinel();
    finite_[index(i, j)] = 0;
  }

  bool finite_at(int i, int j) const { return finite_[index(i, j)] != 0; }

  /// Stored value; meaningful only where finite_at holds.
  double at(int i, int j) const { return values_(i, j); }

  double value_or_infinity(int i, int j) const {
    return finite_at(i, j) ? values_(i, j)
                           : std::numeric_limits<double>::infinity();
  }

  bool any_finite() const {
    return std::any_of(finite_.begin(), finite_.end(),
                       [](std::uint8_t f) { return f != 0; });
  }

  /// Tabulate fn over the grid; non-finite results become masked points.
  template <typename F>
  static FunctionalGrid tabulate(GridAxis axis1, GridAxis axis2, F&& fn,
                                 std::string units = "energy") {
    FunctionalGrid grid(std::move(axis1), std::move(axis2), std::move(units));
    for (int i = 0; i < grid.axis1_.count; ++i) {
      for (int j = 0; j < grid.axis2_.count; ++j) {
        grid.set(i, j, fn(grid.axis1_.points[i], grid.axis2_.points[j]));
      }
    }
    if (!grid.any_finite()) {
      throw std::domain_error(
          "FunctionalGrid::tabulate: no finite value anywhere");
    }
    return grid;
  }

  std::string units;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * axis2_.count + j;
  }

  GridAxis axis1_;
  GridAxis axis2_;
  Eigen::MatrixXd values_;
  std::vector<std::uint8_t> finite_;
};

/// Conjugate values on a lattice of slopes; always finite because the
/// primal effective domain is compact.
struct DualGrid {
  GridAxis axis1;
  GridAxis axis2;
  Eigen::MatrixXd values;
};

/// Default conjugate-variable axis: slopes well beyond the dimer
/// functional's Lipschitz constant away from the center for U <= 1.
inline GridAxis default_dual_axis() { return GridAxis(-8.0, 8.0, 401); }

namespace detail {

/// Support cloud: the transform below computes, for every output node
/// (ga, gb), the maximum of ga*a[k] + gb*b[k] - v[k].  Both conjugation
/// passes use this one kernel so the dot product rounds identically.
struct SupportCloud {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> v;
};

inline Eigen::MatrixXd support_transform(const SupportCloud& cloud,
                                         const GridAxis& out1,
                                         const GridAxis& out2) {
  const int npts = static_cast<int>(cloud.a.size());
  const double* pa = cloud.a.data();
  const double* pb = cloud.b.data();
  const double* pv = cloud.v.data();
  Eigen::MatrixXd out(out1.count, out2.count);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < out1.count; ++i) {
    const double ga = out1.points[i];
    for (int j = 0; j < out2.count; ++j) {
      const double gb = out2.points[j];
      // Four independent accumulators keep the hot loop out of a serial
      // dependence chain; max is exact, so the lane split never changes
      // the result.
      double m0 = -std::numeric_limits<double>::infinity();
      double m1 = m0, m2 = m0, m3 = m0;
      int k = 0;
      for (; k + 4 <= npts; k += 4) {
        const double s0 = ga * pa[k] + gb * pb[k] - pv[k];
        const double s1 = ga * pa[k + 1] + gb * pb[k + 1] - pv[k + 1];
        const double s2 = ga * pa[k + 2] + gb * pb[k + 2] - pv[k + 2];
        const double s3 = ga * pa[k + 3] + gb * pb[k + 3] - pv[k + 3];
        m0 = (s0 > m0) ? s0 : m0;
        m1 = (s1 > m1) ? s1 : m1;
        m2 = (s2 > m2) ? s2 : m2;
        m3 = (s3 > m3) ? s3 : m3;
      }
      for (; k < npts; ++k) {
        const double s = ga * pa[k] + gb * pb[k] - pv[k];
        m0 = (s > m0) ? s : m0;
      }
      const double left = (m1 > m0) ? m1 : m0;
      const double right = (m3 > m2) ? m3 : m2;
      out(i, j) = (right > left) ? right : left;
    }
  }
  return out;
}

}  // namespace detail

inline DualGrid legendre_fenchel(const FunctionalGrid& f, GridAxis dual1,
                                 GridAxis dual2) {
  detail::SupportCloud cloud;
  for (int i = 0; i < f.axis1().count; ++i) {
    for (int j = 0; j < f.axis2().count; ++j) {
      if (!f.finite_at(i, j)) continue;
      cloud.a.push_back(f.axis1().points[i]);
      cloud.b.push_back(f.axis2().points[j]);
      cloud.v.push_back(f.at(i, j));
    }
  }
  if (cloud.a.empty()) {
    throw std::domain_error("legendre_fenchel: no finite primal value");
  }
  Eigen::MatrixXd values = detail::support_transform(cloud, dual1, dual2);
  return DualGrid{std::move(dual1), std::move(dual2), std::move(values)};
}

inline DualGrid legendre_fenchel(const FunctionalGrid& f) {
  return legendre_fenchel(f, default_dual_axis(), default_dual_axis());
}

/// Lower convex envelope on the primal grid: two conjugations through the
/// shared kernel.  The result is finite everywhere (it is a maximum of
/// affine functions), so the returned grid has a full mask.
inline FunctionalGrid biconjugate(const FunctionalGrid& f, GridAxis dual1,
                                  GridAxis dual2) {
  const DualGrid star = legendre_fenchel(f, std::move(dual1), std::move(dual2));
  detail::SupportCloud cloud;
  const std::size_t total =
      static_cast<std::size_t>(star.axis1.count) * star.axis2.count;
  cloud.a.reserve(total);
  cloud.b.reserve(total);
  cloud.v.reserve(total);
  for (int i = 0; i < star.axis1.count; ++i) {
    for (int j = 0; j < star.axis2.count; ++j) {
      cloud.a.push_back(star.axis1.points[i]);
      cloud.b.push_back(star.axis2.points[j]);
      cloud.v.push_back(star.values(i, j));
    }
  }
  const Eigen::MatrixXd values =
      detail::support_transform(cloud, f.axis1(), f.axis2());
  FunctionalGrid out(f.axis1(), f.axis2(), f.units);
  for (int i = 0; i < f.axis1().count; ++i) {
    for (int j = 0; j < f.axis2().count; ++j) {
      out.set(i, j, values(i, j));
    }
  }
  return out;
}

inline FunctionalGrid biconjugate(const FunctionalGrid& f) {
  return biconjugate(f, default_dual_axis(), default_dual_axis());
}

/// The dimer pure functional tabulated over [0,1] x [-1/2,1/2]; points
/// outside the representability disc are masked infinite.
inline FunctionalGrid dimer_fp_grid(double u, int count1 = 201,
                                    int count2 = 201) {
  return FunctionalGrid::tabulate(
      GridAxis(0.0, 1.0, count1), GridAxis(-0.5, 0.5, count2),
      [u](double g11, double g12) {
        return f_pure_closed_form({g11, g12}, u);
      });
}

struct MixtureResult {
  double value = std::numeric_limits<double>::infinity();
  std::vector<DimerPoint> atoms;
  std::vector<double> weights;
};

namespace detail {

/// Standard Nelder-Mead on R^n; deterministic given the start simplex.
template <typename F>
inline std::pair<Eigen::VectorXd, double> nelder_mead(F&& fn,
                                                      const Eigen::VectorXd& x0,
                                                      double scale,
                                                      int max_iterations) {
  const int n = static_cast<int>(x0.size());
  std::vector<Eigen::VectorXd> xs(n + 1, x0);
  std::vector<double> fs(n + 1);
  for (int k = 1; k <= n; ++k) xs[k][k - 1] += scale;
  for (int k = 0; k <= n; ++k) fs[k] = fn(xs[k]);

  std::vector<int> order(n + 1);
  for (int it = 0; it < max_iterations; ++it) {
    for (int k = 0; k <= n; ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](int p, int q) { return fs[p] < fs[q]; });
    const int best = order[0], worst = order[n], second = order[n - 1];
    if (fs[worst] - fs[best] < 1e-13 * (1.0 + std::abs(fs[best]))) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int k = 0; k <= n; ++k) {
      if (k != worst) centroid += xs[k];
    }
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + (centroid - xs[worst]);
    const double fr = fn(reflected);
    if (fr < fs[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - xs[worst]);
      const double fe = fn(expanded);
      if (fe < fr) {
        xs[worst] = expanded;
        fs[worst] = fe;
      } else {
        xs[worst] = reflected;
        fs[worst] = fr;
      }
    } else if (fr < fs[second]) {
      xs[worst] = reflected;
      fs[worst] = fr;
    } else {
      const Eigen::VectorXd contracted =
          centroid + 0.5 * (xs[worst] - centroid);
      const double fc = fn(contracted);
      if (fc < fs[worst]) {
        xs[worst] = contracted;
        fs[worst] = fc;
      } else {
        for (int k = 0; k <= n; ++k) {
          if (k == best) continue;
          xs[k] = xs[best] + 0.5 * (xs[k] - xs[best]);
          fs[k] = fn(xs[k]);
        }
      }
    }
  }
  int best = 0;
  for (int k = 1; k <= n; ++k) {
    if (fs[k] < fs[best]) best = k;
  }
  return {xs[best], fs[best]};
}

/// Largest step from p along the unit direction u that stays inside the
/// representability disc.
inline double chord_extent(const DimerPoint& p, double ux, double uy) {
  const double cx = p.g11 - 0.5;
  const double cy = p.g12;
  const double beta = cx * ux + cy * uy;
  const double slack = 0.25 - (cx * cx + cy * cy);
  const double disc = std::max(0.0, beta * beta + slack);
  return std::max(0.0, -beta + std::sqrt(disc));
}

inline DimerPoint project_to_disc(double g11, double g12) {
  const double cx = g11 - 0.5;
  const double cy = g12;
  const double r = std::sqrt(cx * cx + cy * cy);
  if (r <= 0.5) return {g11, g12};
  const double scale = 0.5 / r;
  return {0.5 + cx * scale, cy * scale};
}

}  // namespace detail

/// Envelope oracle: minimize sum_i w_i f_p(gamma_i) over convex mixtures
/// with at most `max_atoms` atoms in the disc reproducing the target
/// (Caratheodory: three atoms suffice for a planar envelope).  Seeded
/// multistart Nelder-Mead over two- and three-atom families plus a
/// deterministic family of mixtures through the center, where the
/// functional attains its minimum.  Always returns the best decomposition
/// found — an upper bound on the envelope at the target up to barycenter
/// round-off.  Caveat for targets on the disc boundary: the functional has
/// a square-root cusp there, so a barycenter error of machine epsilon can
/// legitimately show up as an O(sqrt(eps)) dip below the exact envelope.
inline MixtureResult envelope_via_mixtures(
    const std::function<double(const DimerPoint&)>& f_p,
    const DimerPoint& target, int max_atoms = 3, std::uint64_t seed = 0,
    int restarts = 48) {
  if (max_atoms < 1 || max_atoms > 3) {
    throw std::invalid_argument(
        "envelope_via_mixtures: atom budget must be 1, 2, or 3");
  }
  if (!target.inside_domain(1e-9)) {
    throw std::invalid_argument(
        "envelope_via_mixtures: target is not ensemble-representable");
  }
  if (restarts < 1) {
    throw std::invalid_argument("envelope_via_mixtures: restarts must be >= 1");
  }

  MixtureResult best;
  const auto consider = [&](double value, std::vector<DimerPoint> atoms,
                            std::vector<double> weights) {
    // Require a beyond-round-off improvement: a candidate that wins by one
    // ulp must not replace a simpler decomposition already found.
    if (!(value < best.value - 1e-12 * (1.0 + std::abs(value)))) return;
    // Drop numerically absent atoms for the report.
    std::vector<DimerPoint> kept_atoms;
    std::vector<double> kept_weights;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      if (weights[k] > 1e-6) {
        kept_atoms.push_back(atoms[k]);
        kept_weights.push_back(weights[k]);
      }
    }
    best.value = value;
    best.atoms = std::move(kept_atoms);
    best.weights = std::move(kept_weights);
  };

  // Single atom: the functional itself.
  {
    const double value = f_p(target);
    if (std::isfinite(value)) consider(value, {target}, {1.0});
  }
  if (max_atoms == 1) return best;

  // Mixtures through the center (0.5, 0): gamma = w*a + (1-w)*center with
  // the far atom on the ray from the center through the target.  Sampled
  // densely and refined by golden-section search.
  const double cx = target.g11 - 0.5;
  const double cy = target.g12;
  const double radius = std::sqrt(cx * cx + cy * cy);
  if (radius > 1e-12) {
    const DimerPoint center{0.5, 0.0};
    const double f_center = f_p(center);
    const auto ray_value = [&](double w) {
      const DimerPoint atom =
          detail::project_to_disc(0.5 + cx / w, cy / w);
      return w * f_p(atom) + (1.0 - w) * f_center;
    };
    const double wmin = std::min(1.0, 2.0 * radius);
    double w_best = 1.0;
    double v_best = ray_value(1.0);
    for (int k = 0; k <= 200; ++k) {
      const double w = wmin + (1.0 - wmin) * k / 200.0;
      const double v = ray_value(w);
      if (v < v_best) {
        v_best = v;
        w_best = w;
      }
    }
    double a = std::max(wmin, w_best - (1.0 - wmin) / 200.0);
    double b = std::min(1.0, w_best + (1.0 - wmin) / 200.0);
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = ray_value(x1);
    double f2 = ray_value(x2);
    for (int it = 0; it < 60; ++it) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = ray_value(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = ray_value(x2);
      }
    }
    const double w = (f1 < f2) ? x1 : x2;
    const double v = std::min(f1, f2);
    if (std::isfinite(v) && v < best.value) {
      const DimerPoint atom = detail::project_to_disc(0.5 + cx / w, cy / w);
      consider(v, {atom, center}, {w, 1.0 - w});
    }
  }

  // Two-atom family: atoms on a line through the target, parametrized by
  // the direction angle and two smoothly clamped arm lengths.
  const auto two_atom = [&](const Eigen::VectorXd& q, MixtureResult* out) {
    const double ux = std::cos(q[0]);
    const double uy = std::sin(q[0]);
    const double tplus = detail::chord_extent(target, ux, uy);
    const double tminus = detail::chord_extent(target, -ux, -uy);
    const double s1 = q[1] * q[1] / (1.0 + q[1] * q[1]);
    const double s2 = q[2] * q[2] / (1.0 + q[2] * q[2]);
    const double d1 = tplus * s1;
    const double d2 = tminus * s2;
    if (d1 + d2 < 1e-12) {
      if (out != nullptr) {
        out->value = f_p(target);
        out->atoms = {target};
        out->weights = {1.0};
      }
      return f_p(target);
    }
    const DimerPoint a1{target.g11 + d1 * ux, target.g12 + d1 * uy};
    const DimerPoint a2{target.g11 - d2 * ux, target.g12 - d2 * uy};
    const double w1 = d2 / (d1 + d2);
    const double w2 = d1 / (d1 + d2);
    const double value = w1 * f_p(a1) + w2 * f_p(a2);
    if (out != nullptr) {
      out->value = value;
      out->atoms = {a1, a2};
      out->weights = {w1, w2};
    }
    return value;
  };

  for (int r = 0; r < restarts; ++r) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(r));
    Eigen::VectorXd q0(3);
    q0 << 2.0 * std::numbers::pi * rng.uniform(), rng.uniform(-1.5, 1.5),
        rng.uniform(-1.5, 1.5);
    const auto [q, value] = detail::nelder_mead(
        [&](const Eigen::VectorXd& x) { return two_atom(x, nullptr); }, q0,
        0.4, 250);
    if (value < best.value) {
      MixtureResult candidate;
      two_atom(q, &candidate);
      consider(candidate.value, candidate.atoms, candidate.weights);
    }
  }

  if (max_atoms == 2) return best;

  // Three-atom family: free atom positions projected to the disc, weights
  // solved from the barycentric system, negativity penalized.
  const auto three_atom = [&](const Eigen::VectorXd& q, MixtureResult* out) {
    DimerPoint atoms[3];
    for (int k = 0; k < 3; ++k) {
      atoms[k] = detail::project_to_disc(q[2 * k], q[2 * k + 1]);
    }
    Eigen::Matrix3d m;
    Eigen::Vector3d rhs(1.0, target.g11, target.g12);
    for (int k = 0; k < 3; ++k) {
      m(0, k) = 1.0;
      m(1, k) = atoms[k].g11;
      m(2, k) = atoms[k].g12;
    }
    const Eigen::Vector3d w = m.fullPivLu().solve(rhs);
    const double residual = (m * w - rhs).norm();
    if (residual > 1e-9) return 1e3 + 1e3 * residual;
    double value = 0.0;
    double negativity = 0.0;
    for (int k = 0; k < 3; ++k) {
      value += std::max(w[k], 0.0) * f_p(atoms[k]);
      negativity += std::max(-w[k], 0.0);
    }
    value += 1e3 * negativity;
    if (out != nullptr && negativity < 1e-10) {
      out->value = value;
      out->atoms = {atoms[0], atoms[1], atoms[2]};
      out->weights = {w[0], w[1], w[2]};
    }
    return value;
  };

  const int three_restarts = std::max(1, restarts / 2);
  for (int r = 0; r < three_restarts; ++r) {
    Rng rng = Rng::substream(seed ^ 0x5bf0f3a2ULL, static_cast<std::uint64_t>(r));
    Eigen::VectorXd q0(6);
    for (int k = 0; k < 3; ++k) {
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      const double rad = 0.5 * std::sqrt(rng.uniform());
      q0[2 * k] = 0.5 + rad * std::cos(angle);
      q0[2 * k + 1] = rad * std::sin(angle);
    }
    const auto [q, value] = detail::nelder_mead(
        [&](const Eigen::VectorXd& x) { return three_atom(x, nullptr); }, q0,
        0.15, 400);
    if (value < best.value) {
      MixtureResult candidate;
      if (three_atom(q, &candidate) < best.value && !candidate.atoms.empty()) {
        consider(candidate.value, candidate.atoms, candidate.weights);
      }
    }
  }
  return best;
}

struct EnergyMinimum {
  double energy = std::numeric_limits<double>::infinity();
  int i = 0;
  int j = 0;
  DimerPoint gamma;
};

/// Ground-state energy from a grid functional: minimize <h,gamma> + f over
/// the grid, with the dimer one-body expectation
/// <h,gamma> = 2*[eps1*g11 + eps2*(1-g11) - 2*t*g12].
inline EnergyMinimum energy_from_functional(double t, double eps1, double eps2,
                                            const FunctionalGrid& f) {
  if (!f.any_finite()) {
    throw std::domain_error("energy_from_functional: no finite value");
  }
  EnergyMinimum best;
  for (int i = 0; i < f.axis1().count; ++i) {
    const double g11 = f.axis1().points[i];
    for (int j = 0; j < f.axis2().count; ++j) {
      if (!f.finite_at(i, j)) continue;
      const double g12 = f.axis2().points[j];
      const double one_body =
          2.0 * (eps1 * g11 + eps2 * (1.0 - g11) - 2.0 * t * g12);
      const double total = one_body + f.at(i, j);
      if (total < best.energy) {
        best.energy = total;
        best.i = i;
        best.j = j;
        best.gamma = {g11, g12};
      }
    }
  }
  return best;
}

}  // namespace rdmft
