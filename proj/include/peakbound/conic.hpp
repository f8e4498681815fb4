#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peakbound/model.hpp"
#include "peakbound/relaxation.hpp"

namespace peakbound {

enum class SolveStatus { optimal, near_optimal, infeasible, unbounded, numerical_failure };
std::string to_string(SolveStatus s);

struct SolverSettings {
  std::string backend = "embedded";  // "embedded" or "external"
  double feas_tol = 1e-8;
  double gap_tol = 1e-8;
  /// Residual level below which a stalled run is still reported near_optimal.
  double near_tol = 1e-4;
  int max_iter = 150;
  bool verbose = false;
  bool parallel = true;  // OpenMP Schur assembly
  std::string bridge_script;  // empty: the script installed with the build
  std::string python = "python3";
};

struct SolverStats {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double wall_seconds = 0.0;
  std::string backend;
};

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_failure;
  double primal_value = 0.0;
  double dual_value = 0.0;
  Eigen::VectorXd scalars;
  Eigen::VectorXd equality_duals;
  Eigen::VectorXd inequality_duals;
  std::vector<Eigen::MatrixXd> psd_duals;
  SolverStats stats;
  std::string message;

  bool usable() const {
    return status == SolveStatus::optimal || status == SolveStatus::near_optimal;
  }
};

SolveResult solve(const ConicProgram& prog, const SolverSettings& settings = {});
/// Primal-dual interior point method with Nesterov-Todd scaling and
/// Mehrotra predictor-corrector steps.
SolveResult solve_embedded(const ConicProgram& prog, const SolverSettings& settings);
/// Writes the program as JSON, runs the Clarabel bridge script and reads
/// back primal and dual solutions.
SolveResult solve_external(const ConicProgram& prog, const SolverSettings& settings);

/// Relative primal/dual residuals and gap of a candidate solution, computed
/// independently of the backend that produced it.
struct KktReport {
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double min_psd_eig = 0.0;       // smallest eigenvalue over all F_l(y)
  double min_dual_psd_eig = 0.0;  // smallest eigenvalue over all Z_l
};
KktReport kkt_report(const ConicProgram& prog, const SolveResult& res);

/// Dual (auxiliary function) certificate in the coordinates of the system
/// the program was assembled from.
///   continuous: v(0,x,th) <= gamma,  L_fk v <= 0,  v >= p   (or sum beta_i p_i)
///   discrete:   v(x,th) <= gamma,    v(f_k) <= v + alpha,   v >= p
struct Certificate {
  double gamma = 0.0;
  std::optional<double> alpha;
  std::vector<double> beta;  // maximin multipliers
  Polynomial v;

  /// gamma, or gamma + T alpha in discrete mode.
  double dual_bound(double horizon) const { return gamma + (alpha ? horizon * *alpha : 0.0); }
};

Certificate extract_certificate(const ConicProgram& prog, const SolveResult& res,
                                const UncertainSystem& sys);

}  // namespace peakbound
