// Command-line frontend for the library: dimer functional grids, convex
// envelopes, the envelope-vs-ensemble verification sweep, energy round
// trips, fiber geometry reports, and single-point searches for arbitrary
// small systems described by plain-text Hamiltonian files.
//
// Every subcommand writes its numeric payload as CSV (17 significant
// digits, '.' decimal separator, LF line endings, atomic temp+rename) and a
// JSON sidecar with the library version and the full configuration, so a
// rerun with identical flags reproduces the payload byte for byte.
//
// Exit codes: 0 success (and PASS for the checking subcommands), 1 usage or
// I/O error, 2 numerical failure (non-converged solve, tolerance FAIL, or a
// request that is numerically ill-posed such as the disc center's pure-state
// continuum).

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rdmft/convexity.hpp"
#include "rdmft/dimer.hpp"
#include "rdmft/ensemble_search.hpp"
#include "rdmft/fock.hpp"
#include "rdmft/geometry.hpp"
#include "rdmft/grid_io.hpp"
#include "rdmft/pure_search.hpp"
#include "rdmft/rng.hpp"
#include "rdmft/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;

fs::path prepare_out_dir(const std::string& out) {
  const fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" +
                             dir.string() + "'");
  }
  return dir;
}

/// JSON sidecar carrying the library version, the subcommand, its full
/// configuration, and (for the checking subcommands) a result block.
/// nlohmann::json keeps keys sorted, so the dump is deterministic.
void write_sidecar(const fs::path& path, const std::string& subcommand,
                   const json& config, const json& result = json()) {
  json doc;
  doc["version"] = rdmft::version_string;
  doc["subcommand"] = subcommand;
  doc["config"] = config;
  if (!result.is_null()) doc["result"] = result;
  rdmft::write_text_atomic(path, doc.dump(2) + "\n");
}

std::string status_name(rdmft::EnsembleStatus status) {
  switch (status) {
    case rdmft::EnsembleStatus::converged:
      return "converged";
    case rdmft::EnsembleStatus::not_converged:
      return "not_converged";
    case rdmft::EnsembleStatus::ensemble_infeasible:
      return "infeasible";
  }
  return "unknown";
}

std::string status_name(rdmft::PureStatus status) {
  switch (status) {
    case rdmft::PureStatus::converged:
      return "converged";
    case rdmft::PureStatus::not_converged:
      return "not_converged";
    case rdmft::PureStatus::pure_infeasible:
      return "infeasible";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// dimer-fp: tabulate the pure functional over [0,1] x [-1/2,1/2].

struct DimerFpOptions {
  int grid_n = 201;
  double u = 1.0;
  std::string out;
};

int run_dimer_fp(const DimerFpOptions& opt) {
  const fs::path dir = prepare_out_dir(opt.out);
  const auto grid = rdmft::dimer_fp_grid(opt.u, opt.grid_n, opt.grid_n);
  rdmft::write_text_atomic(dir / "fp_grid.csv",
                           rdmft::functional_grid_csv(grid));
  write_sidecar(dir / "fp_grid.json", "dimer-fp",
                {{"grid_n", opt.grid_n}, {"u", opt.u}});
  std::cout << "wrote " << (dir / "fp_grid.csv").string() << " (" << opt.grid_n
            << "x" << opt.grid_n << ", U = " << opt.u << ")\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// dimer-fe: sweep the ensemble functional with the fiber solver.

struct DimerFeOptions {
  int grid_n = 101;
  double u = 1.0;
  std::string out;
};

int run_dimer_fe(const DimerFeOptions& opt) {
  const fs::path dir = prepare_out_dir(opt.out);
  const rdmft::GridAxis axis1(0.0, 1.0, opt.grid_n);
  const rdmft::GridAxis axis2(-0.5, 0.5, opt.grid_n);
  rdmft::FunctionalGrid grid(axis1, axis2);
  int failures = 0;
  for (int i = 0; i < opt.grid_n; ++i) {
    for (int j = 0; j < opt.grid_n; ++j) {
      const rdmft::DimerPoint point{axis1.points[i], axis2.points[j]};
      if (!point.inside_domain()) {
        grid.set_infinite(i, j);
        continue;
      }
      const auto report = rdmft::dimer_ensemble_search(point, opt.u);
      if (report.status != rdmft::EnsembleStatus::converged) {
        ++failures;
        grid.set_infinite(i, j);
        continue;
      }
      grid.set(i, j, report.value);
    }
  }
  rdmft::write_text_atomic(dir / "fe_grid.csv",
                           rdmft::functional_grid_csv(grid));
  write_sidecar(dir / "fe_grid.json", "dimer-fe",
                {{"grid_n", opt.grid_n}, {"u", opt.u}},
                {{"num_failed", failures}});
  std::cout << "wrote " << (dir / "fe_grid.csv").string() << " (" << opt.grid_n
            << "x" << opt.grid_n << ", U = " << opt.u << ", " << failures
            << " failed solves)\n";
  return failures == 0 ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------------------
// envelope: biconjugate of any grid functional read from CSV.

struct EnvelopeOptions {
  std::string input;
  int dual_n = 401;
  double dual_lo = -8.0;
  double dual_hi = 8.0;
  std::string out;
};

int run_envelope(const EnvelopeOptions& opt) {
  const fs::path dir = prepare_out_dir(opt.out);
  const auto grid = rdmft::read_functional_grid_csv(fs::path(opt.input));
  const rdmft::GridAxis dual(opt.dual_lo, opt.dual_hi, opt.dual_n);
  const auto envelope = rdmft::biconjugate(grid, dual, dual);
  rdmft::write_text_atomic(dir / "envelope.csv",
                           rdmft::functional_grid_csv(envelope));
  write_sidecar(dir / "envelope.json", "envelope",
                {{"input", opt.input},
                 {"dual_n", opt.dual_n},
                 {"dual_lo", opt.dual_lo},
                 {"dual_hi", opt.dual_hi}});
  std::cout << "wrote " << (dir / "envelope.csv").string() << " ("
            << grid.axis1().count << "x" << grid.axis2().count
            << " primal, dual " << opt.dual_n << "^2)\n";
  return exit_ok;
}

// ---------------------------------------------------------------------------
// verify-relation: envelope of the pure functional against the ensemble
// functional on an interior lattice.

struct VerifyRelationOptions {
  int grid_n = 201;
  int lattice_n = 41;
  int dual_n = 401;
  double u = 1.0;
  double tol = 0.02;
  std::string out;
};

int run_verify_relation(const VerifyRelationOptions& opt) {
  const fs::path dir = prepare_out_dir(opt.out);
  const auto fp = rdmft::dimer_fp_grid(opt.u, opt.grid_n, opt.grid_n);
  const rdmft::GridAxis dual(-8.0 * std::max(opt.u, 1.0),
                             8.0 * std::max(opt.u, 1.0), opt.dual_n);
  const auto envelope = rdmft::biconjugate(fp, dual, dual);

  // The lattice is carried on grid nodes so the envelope is read off
  // directly: lattice_n indices evenly spread over each axis, restricted to
  // the open disc.  lattice_n = 1 degenerates to the center node.
  std::vector<int> indices;
  if (opt.lattice_n == 1) {
    indices.push_back((opt.grid_n - 1) / 2);
  } else {
    for (int k = 0; k < opt.lattice_n; ++k) {
      const double s = static_cast<double>(k) * (opt.grid_n - 1) /
                       (opt.lattice_n - 1);
      indices.push_back(static_cast<int>(std::lround(s)));
    }
  }

  std::string csv = "g11,g12,envelope,ensemble,deviation,converged\n";
  double max_deviation = 0.0;
  int num_points = 0;
  int num_failed = 0;
  for (const int i : indices) {
    for (const int j : indices) {
      const rdmft::DimerPoint point{fp.axis1().points[i],
                                    fp.axis2().points[j]};
      if (point.radius_squared() > 0.25 - 1e-9) continue;
      ++num_points;
      const auto report = rdmft::dimer_ensemble_search(point, opt.u);
      const bool ok = report.status == rdmft::EnsembleStatus::converged;
      const double env = envelope.at(i, j);
      const double dev = ok ? std::abs(env - report.value) : 0.0;
      if (!ok) {
        ++num_failed;
      } else if (dev > max_deviation) {
        max_deviation = dev;
      }
      csv += rdmft::format_value(point.g11) + ',' +
             rdmft::format_value(point.g12) + ',' + rdmft::format_value(env) +
             ',' + rdmft::format_value(ok ? report.value : 0.0) + ',' +
             rdmft::format_value(dev) + ',' + (ok ? '1' : '0') + '\n';
    }
  }
  rdmft::write_text_atomic(dir / "relation.csv", csv);

  const bool pass = num_failed == 0 && max_deviation <= opt.tol * opt.u;
  write_sidecar(dir / "relation.json", "verify-relation",
                {{"grid_n", opt.grid_n},
                 {"lattice_n", opt.lattice_n},
                 {"dual_n", opt.dual_n},
                 {"u", opt.u},
                 {"tol", opt.tol}},
                {{"pass", pass},
                 {"max_deviation", max_deviation},
                 {"num_points", num_points},
                 {"num_failed", num_failed}});
  std::cout << (pass ? "PASS" : "FAIL") << ": max |envelope - ensemble| = "
            << max_deviation << " over " << num_points << " lattice points ("
            << num_failed << " failed solves, tolerance " << opt.tol * opt.u
            << ")\n";
  if (num_failed > 0) return exit_numerical;
  return pass ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------------------
// energy-check: grid minimization against exact diagonalization.

struct EnergyCheckOptions {
  int num_samples = 20;
  std::uint64_t seed = 21;
  int grid_n = 201;
  int dual_n = 801;
  double u = 1.0;
  double tol = 0.02;
  std::string out;
};

int run_energy_check(const EnergyCheckOptions& opt) {
  const fs::path dir = prepare_out_dir(opt.out);
  const auto basis = rdmft::SectorBasis::enumerate(4, 2, "singlet");
  const auto fp = rdmft::dimer_fp_grid(opt.u, opt.grid_n, opt.grid_n);
  const rdmft::GridAxis dual(-8.0, 8.0, opt.dual_n);
  const auto envelope = rdmft::biconjugate(fp, dual, dual);

  rdmft::Rng rng(opt.seed);
  std::string csv =
      "index,t,eps1,eps2,exact,from_functional,from_envelope,deviation\n";
  double max_deviation = 0.0;
  double max_route_gap = 0.0;
  for (int k = 0; k < opt.num_samples; ++k) {
    const double t = rng.uniform(-2.0, 2.0);
    const double eps1 = rng.uniform(-2.0, 2.0);
    const double eps2 = rng.uniform(-2.0, 2.0);
    const rdmft::DimerParams params(t, eps1, eps2, opt.u);
    const double exact = rdmft::ground_state(params.hamiltonian(basis)).energy;
    const double from_fp =
        rdmft::energy_from_functional(t, eps1, eps2, fp).energy;
    const double from_env =
        rdmft::energy_from_functional(t, eps1, eps2, envelope).energy;
    const double dev =
        std::max(std::abs(from_fp - exact), std::abs(from_env - exact));
    max_deviation = std::max(max_deviation, dev);
    max_route_gap = std::max(max_route_gap, std::abs(from_fp - from_env));
    csv += std::to_string(k) + ',' + rdmft::format_value(t) + ',' +
           rdmft::format_value(eps1) + ',' + rdmft::format_value(eps2) + ',' +
           rdmft::format_value(exact) + ',' + rdmft::format_value(from_fp) +
           ',' + rdmft::format_value(from_env) + ',' +
           rdmft::format_value(dev) + '\n';
  }
  rdmft::write_text_atomic(dir / "energy_check.csv", csv);

  const bool pass = max_deviation <= opt.tol;
  write_sidecar(dir / "energy_check.json", "energy-check",
                {{"num_samples", opt.num_samples},
                 {"seed", opt.seed},
                 {"grid_n", opt.grid_n},
                 {"dual_n", opt.dual_n},
                 {"u", opt.u},
                 {"tol", opt.tol}},
                {{"pass", pass},
                 {"max_deviation", max_deviation},
                 {"max_route_gap", max_route_gap}});
  std::cout << (pass ? "PASS" : "FAIL") << ": max |grid - exact| = "
            << max_deviation << " over " << opt.num_samples
            << " samples (tolerance " << opt.tol
            << "), functional vs envelope route gap " << max_route_gap
            << "\n";
  return pass ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------------------
// geometry: fiber sample, boundary pure states, direction statistics.

struct GeometryOptions {
  double g11 = 0.0;
  double g12 = 0.0;
  int resolution = 101;
  int num_directions = 200;
  std::uint64_t seed = 7;
  std::string out;
};

int run_geometry(const GeometryOptions& opt) {
  const rdmft::DimerPoint gamma{opt.g11, opt.g12};
  if (!gamma.inside_domain()) {
    throw std::invalid_argument(
        "geometry: (g11, g12) must lie inside the representability disc");
  }
  const fs::path dir = prepare_out_dir(opt.out);

  const int count = rdmft::count_pure_boundary_states(gamma);
  const auto sample = rdmft::sample_fiber(gamma, opt.resolution);
  rdmft::write_text_atomic(dir / "fiber.csv",
                           rdmft::fiber_sample_csv(sample));
  int num_boundary = 0;
  int num_pure = 0;
  for (const auto& pt : sample.points) {
    if (pt.boundary) ++num_boundary;
    if (pt.purity >= 1.0 - 1e-6) ++num_pure;
  }

  const auto stats =
      rdmft::random_direction_statistics(gamma, opt.num_directions, opt.seed);
  rdmft::write_text_atomic(dir / "directions.csv",
                           rdmft::direction_stats_csv(stats));

  json result = {{"count_pure_boundary_states", count},
                 {"num_fiber_points", sample.points.size()},
                 {"num_boundary", num_boundary},
                 {"num_pure", num_pure},
                 {"num_converged", stats.num_converged},
                 {"num_failed", stats.num_failed}};
  if (stats.fractions_defined) {
    result["fraction_pure_minimizer"] = stats.fraction_pure_minimizer;
    result["fraction_unique_minimizer"] = stats.fraction_unique_minimizer;
  }
  write_sidecar(dir / "geometry.json", "geometry",
                {{"g11", opt.g11},
                 {"g12", opt.g12},
                 {"resolution", opt.resolution},
                 {"num_directions", opt.num_directions},
                 {"seed", opt.seed}},
                result);

  std::cout << "fiber over (" << opt.g11 << ", " << opt.g12 << "): "
            << sample.points.size() << " points, " << num_boundary
            << " on the boundary, " << num_pure << " pure, "
            << count << " boundary pure states\n";
  if (stats.fractions_defined) {
    std::cout << "directions: " << stats.num_converged << "/"
              << opt.num_directions
              << " converged, pure-minimizer fraction "
              << stats.fraction_pure_minimizer << ", unique fraction "
              << stats.fraction_unique_minimizer << "\n";
  }
  return stats.num_failed == 0 ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------------------
// pure-search / ensemble-search: single-point solves from a plain-text
// Hamiltonian description.
//
// File format, one record per line, '#' starts a comment:
//   d <int>                  number of spin orbitals (required)
//   n <int>                  number of particles (required)
//   sector <name>            optional determinant filter, e.g. "singlet"
//   onebody i j value        adds value to h_ij and (for i < j) to h_ji
//   interaction i j k l value  adds the antisymmetrized pair term
//                              value * c^dag_i c^dag_j c_l c_k with
//                              i < j and k < l; the adjoint is implied
// The objective is the sum of all listed terms.  The target one-matrix
// comes from a separate file of "i j value" lines (i <= j, mirrored).

struct HamiltonianSpec {
  int d = -1;
  int n = -1;
  std::string sector;
  Eigen::MatrixXd one_body;
  std::vector<rdmft::PairInteractionTerm> terms;
};

std::vector<std::vector<std::string>> read_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open '" + path.string() + "'");
  }
  std::vector<std::vector<std::string>> records;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    std::string token;
    while (fields >> token) tokens.push_back(token);
    if (!tokens.empty()) records.push_back(std::move(tokens));
  }
  return records;
}

int parse_index(const std::string& token, int d, const std::string& what) {
  std::size_t used = 0;
  int value = -1;
  try {
    value = std::stoi(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != token.size() || value < 0 || value >= d) {
    throw std::invalid_argument(what + ": bad integer '" + token + "'");
  }
  return value;
}

HamiltonianSpec read_hamiltonian_file(const fs::path& path) {
  HamiltonianSpec spec;
  const auto records = read_records(path);
  const std::string where = "hamiltonian file '" + path.string() + "'";
  // First pass picks up the dimensions so entry lines can be validated in
  // one sweep regardless of ordering.
  for (const auto& rec : records) {
    if (rec[0] == "d" && rec.size() == 2) {
      spec.d = parse_index(rec[1], 64, where + ", d") ;
    } else if (rec[0] == "n" && rec.size() == 2) {
      spec.n = parse_index(rec[1], 64, where + ", n");
    } else if (rec[0] == "sector" && rec.size() == 2) {
      spec.sector = rec[1];
    }
  }
  if (spec.d < 1) {
    throw std::invalid_argument(where + ": missing 'd <count>' line");
  }
  if (spec.n < 0 || spec.n > spec.d) {
    throw std::invalid_argument(where +
                                ": missing or out-of-range 'n <count>' line");
  }
  spec.one_body = Eigen::MatrixXd::Zero(spec.d, spec.d);
  for (const auto& rec : records) {
    if (rec[0] == "d" || rec[0] == "n" || rec[0] == "sector") continue;
    if (rec[0] == "onebody") {
      if (rec.size() != 4) {
        throw std::invalid_argument(where +
                                    ": onebody needs 'onebody i j value'");
      }
      const int i = parse_index(rec[1], spec.d, where + ", onebody");
      const int j = parse_index(rec[2], spec.d, where + ", onebody");
      if (i > j) {
        throw std::invalid_argument(where + ": onebody entries need i <= j");
      }
      const double value = rdmft::parse_value(rec[3]);
      spec.one_body(i, j) += value;
      if (i != j) spec.one_body(j, i) += value;
    } else if (rec[0] == "interaction") {
      if (rec.size() != 6) {
        throw std::invalid_argument(
            where + ": interaction needs 'interaction i j k l value'");
      }
      rdmft::PairInteractionTerm term;
      term.i = parse_index(rec[1], spec.d, where + ", interaction");
      term.j = parse_index(rec[2], spec.d, where + ", interaction");
      term.k = parse_index(rec[3], spec.d, where + ", interaction");
      term.l = parse_index(rec[4], spec.d, where + ", interaction");
      term.weight = rdmft::parse_value(rec[5]);
      if (term.i >= term.j || term.k >= term.l) {
        throw std::invalid_argument(where +
                                    ": interaction entries need i < j, k < l");
      }
      spec.terms.push_back(term);
    } else {
      throw std::invalid_argument(where + ": unrecognized keyword '" + rec[0] +
                                  "'");
    }
  }
  return spec;
}

rdmft::OneMatrix read_gamma_file(const fs::path& path, int d) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  const std::string where = "gamma file '" + path.string() + "'";
  for (const auto& rec : read_records(path)) {
    if (rec.size() != 3) {
      throw std::invalid_argument(where + ": entries need 'i j value'");
    }
    const int i = parse_index(rec[0], d, where);
    const int j = parse_index(rec[1], d, where);
    if (i > j) {
      throw std::invalid_argument(where + ": entries need i <= j");
    }
    const double value = rdmft::parse_value(rec[2]);
    m(i, j) += value;
    if (i != j) m(j, i) += value;
  }
  return rdmft::OneMatrix(d, m);
}

rdmft::ManyBodyOperator build_objective(const HamiltonianSpec& spec) {
  const auto basis =
      rdmft::SectorBasis::enumerate(spec.d, spec.n, spec.sector);
  Eigen::MatrixXd total = rdmft::build_one_body(basis, spec.one_body).matrix;
  if (!spec.terms.empty()) {
    total += rdmft::build_pair_interaction(basis, spec.terms).matrix;
  }
  return rdmft::ManyBodyOperator(basis, total);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct SearchOptions {
  std::string hamiltonian;
  std::string gamma;
  int restarts = 32;
  std::uint64_t seed = 0;
  int max_iterations = 20000;
  std::string out;
};

int run_pure_search(const SearchOptions& opt) {
  const fs::path dir = prepare_out_dir(opt.out);
  const auto spec = read_hamiltonian_file(fs::path(opt.hamiltonian));
  const auto objective = build_objective(spec);
  const auto gamma = read_gamma_file(fs::path(opt.gamma), spec.d);
  rdmft::PureSearchConfig config;
  config.restarts = opt.restarts;
  config.seed = opt.seed;
  const auto report = rdmft::levy_pure_search(objective, gamma, config);

  json result = {{"value", report.value},
                 {"status", status_name(report.status)},
                 {"feasibility_residual", report.feasibility_residual},
                 {"gradient_norm", report.gradient_norm},
                 {"restarts_used", report.restarts_used},
                 {"accepted", report.accepted}};
  if (report.minimizer.size() > 0 && report.minimizer.size() <= 256) {
    result["minimizer"] =
        std::vector<double>(report.minimizer.data(),
                            report.minimizer.data() + report.minimizer.size());
  }
  write_sidecar(dir / "pure_report.json", "pure-search",
                {{"hamiltonian", opt.hamiltonian},
                 {"gamma", opt.gamma},
                 {"restarts", opt.restarts},
                 {"seed", opt.seed}},
                result);
  std::cout << "pure search: value = " << report.value << ", status = "
            << status_name(report.status) << ", feasibility residual = "
            << report.feasibility_residual << "\n";
  return report.converged ? exit_ok : exit_numerical;
}

int run_ensemble_search(const SearchOptions& opt) {
  const fs::path dir = prepare_out_dir(opt.out);
  const auto spec = read_hamiltonian_file(fs::path(opt.hamiltonian));
  const auto objective = build_objective(spec);
  const auto gamma = read_gamma_file(fs::path(opt.gamma), spec.d);
  rdmft::EnsembleSearchConfig config;
  config.max_iterations = opt.max_iterations;
  const auto report = rdmft::levy_ensemble_search(objective, gamma, config);

  json result = {{"value", report.value},
                 {"status", status_name(report.status)},
                 {"iterations", report.iterations},
                 {"primal_residual", report.primal_residual},
                 {"dual_residual", report.dual_residual},
                 {"constraint_residual", report.constraint_residual}};
  if (report.minimizer.rows() > 0 && report.minimizer.rows() <= 32) {
    result["minimizer"] = matrix_to_json(report.minimizer);
  }
  write_sidecar(dir / "ensemble_report.json", "ensemble-search",
                {{"hamiltonian", opt.hamiltonian},
                 {"gamma", opt.gamma},
                 {"max_iterations", opt.max_iterations}},
                result);
  std::cout << "ensemble search: value = " << report.value << ", status = "
            << status_name(report.status) << ", constraint residual = "
            << report.constraint_residual << "\n";
  return report.status == rdmft::EnsembleStatus::converged ? exit_ok
                                                           : exit_numerical;
}

void add_out_option(CLI::App* sub, std::string& out) {
  sub->add_option("--out", out, "output directory (default '.')")
      ->envname("RDMFT_OUT_DIR");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-matrix functional toolbox for small fermionic systems"};
  app.require_subcommand(1);
  int rc = exit_ok;

  DimerFpOptions fp_opt;
  auto* fp = app.add_subcommand(
      "dimer-fp", "tabulate the pure functional on the dimer disc");
  fp->add_option("--grid-n", fp_opt.grid_n, "grid points per axis")
      ->check(CLI::Range(3, 100000));
  fp->add_option("--u", fp_opt.u, "interaction strength")
      ->check(CLI::NonNegativeNumber);
  add_out_option(fp, fp_opt.out);
  fp->callback([&] { rc = run_dimer_fp(fp_opt); });

  DimerFeOptions fe_opt;
  auto* fe = app.add_subcommand(
      "dimer-fe", "sweep the ensemble functional with the fiber solver");
  fe->add_option("--grid-n", fe_opt.grid_n, "grid points per axis")
      ->check(CLI::Range(3, 100000));
  fe->add_option("--u", fe_opt.u, "interaction strength")
      ->check(CLI::NonNegativeNumber);
  add_out_option(fe, fe_opt.out);
  fe->callback([&] { rc = run_dimer_fe(fe_opt); });

  EnvelopeOptions env_opt;
  auto* env = app.add_subcommand(
      "envelope", "convex envelope of a grid functional read from CSV");
  env->add_option("--input", env_opt.input, "functional grid CSV")
      ->required()
      ->check(CLI::ExistingFile);
  env->add_option("--dual-n", env_opt.dual_n, "dual grid points per axis")
      ->check(CLI::Range(2, 100000));
  env->add_option("--dual-lo", env_opt.dual_lo, "dual axis lower bound");
  env->add_option("--dual-hi", env_opt.dual_hi, "dual axis upper bound");
  add_out_option(env, env_opt.out);
  env->callback([&] { rc = run_envelope(env_opt); });

  VerifyRelationOptions rel_opt;
  auto* rel = app.add_subcommand(
      "verify-relation",
      "check the envelope of the pure functional against the ensemble one");
  rel->add_option("--grid-n", rel_opt.grid_n, "primal grid points per axis")
      ->check(CLI::Range(3, 100000));
  rel->add_option("--lattice-n", rel_opt.lattice_n,
                  "comparison lattice points per axis")
      ->check(CLI::Range(1, 100000));
  rel->add_option("--dual-n", rel_opt.dual_n, "dual grid points per axis")
      ->check(CLI::Range(2, 100000));
  rel->add_option("--u", rel_opt.u, "interaction strength")
      ->check(CLI::NonNegativeNumber);
  rel->add_option("--tol", rel_opt.tol, "pass threshold in units of U")
      ->check(CLI::PositiveNumber);
  add_out_option(rel, rel_opt.out);
  rel->callback([&] { rc = run_verify_relation(rel_opt); });

  EnergyCheckOptions en_opt;
  auto* en = app.add_subcommand(
      "energy-check",
      "grid-minimized energies against exact diagonalization");
  en->add_option("--num-samples", en_opt.num_samples, "number of random h")
      ->check(CLI::Range(1, 1000000));
  en->add_option("--seed", en_opt.seed, "random seed");
  en->add_option("--grid-n", en_opt.grid_n, "primal grid points per axis")
      ->check(CLI::Range(3, 100000));
  en->add_option("--dual-n", en_opt.dual_n, "dual grid points per axis")
      ->check(CLI::Range(2, 100000));
  en->add_option("--u", en_opt.u, "interaction strength")
      ->check(CLI::NonNegativeNumber);
  en->add_option("--tol", en_opt.tol, "pass threshold")
      ->check(CLI::PositiveNumber);
  add_out_option(en, en_opt.out);
  en->callback([&] { rc = run_energy_check(en_opt); });

  GeometryOptions geo_opt;
  auto* geo = app.add_subcommand(
      "geometry", "fiber sample, boundary pure states, direction statistics");
  geo->add_option("--g11", geo_opt.g11, "diagonal coordinate")->required();
  geo->add_option("--g12", geo_opt.g12, "off-diagonal coordinate")
      ->required();
  geo->add_option("--resolution", geo_opt.resolution,
                  "fiber sampling resolution per axis")
      ->check(CLI::Range(2, 100000));
  geo->add_option("--num-directions", geo_opt.num_directions,
                  "random objective directions")
      ->check(CLI::Range(0, 1000000));
  geo->add_option("--seed", geo_opt.seed, "random seed");
  add_out_option(geo, geo_opt.out);
  geo->callback([&] { rc = run_geometry(geo_opt); });

  SearchOptions pure_opt;
  auto* pure = app.add_subcommand(
      "pure-search", "pure-state search for a plain-text Hamiltonian");
  pure->add_option("--hamiltonian", pure_opt.hamiltonian,
                   "Hamiltonian description file")
      ->required()
      ->check(CLI::ExistingFile);
  pure->add_option("--gamma", pure_opt.gamma, "target one-matrix file")
      ->required()
      ->check(CLI::ExistingFile);
  pure->add_option("--restarts", pure_opt.restarts, "multistart count")
      ->check(CLI::Range(1, 100000));
  pure->add_option("--seed", pure_opt.seed, "random seed");
  add_out_option(pure, pure_opt.out);
  pure->callback([&] { rc = run_pure_search(pure_opt); });

  SearchOptions ens_opt;
  auto* ens = app.add_subcommand(
      "ensemble-search", "ensemble search for a plain-text Hamiltonian");
  ens->add_option("--hamiltonian", ens_opt.hamiltonian,
                  "Hamiltonian description file")
      ->required()
      ->check(CLI::ExistingFile);
  ens->add_option("--gamma", ens_opt.gamma, "target one-matrix file")
      ->required()
      ->check(CLI::ExistingFile);
  ens->add_option("--max-iterations", ens_opt.max_iterations,
                  "solver iteration cap")
      ->check(CLI::Range(1, 100000000));
  add_out_option(ens, ens_opt.out);
  ens->callback([&] { rc = run_ensemble_search(ens_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  return rc;
}
