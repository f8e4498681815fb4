#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peakbound/conic.hpp"
#include "peakbound/recovery.hpp"

namespace peakbound {

struct BoundOptions {
  SolverSettings solver;
  /// State ranges mapped onto [-1, 1]; empty means time rescaling only.
  std::vector<std::pair<double, double>> ranges;
  double rank_tol = 1e-3;
};

/// Everything produced by one degree-d relaxation of a peak problem.
struct BoundResult {
  int order = 0;
  SolveStatus status = SolveStatus::numerical_failure;
  /// p*_d: the certified upper bound when status is usable. This is the dual
  /// objective, or the moment value if the solver left that one higher.
  double bound = 0.0;
  RelaxationPlan plan;
  SolveResult solve;
  Scaling scaling;
  /// The rescaled system the program was assembled from.
  UncertainSystem internal;
  /// Auxiliary function in internal and in original coordinates.
  std::optional<Certificate> certificate_internal;
  std::optional<Certificate> certificate;
  /// Recovered point in original coordinates.
  std::optional<RecoveredPoint> recovered;
  double setup_seconds = 0.0;
  std::string message;

  bool usable() const { return solve.usable(); }
};

/// Validates, rescales, plans, assembles and solves the degree-d relaxation,
/// then extracts the certificate and attempts recovery. Throws
/// std::invalid_argument when validation reports errors.
BoundResult compute_bound(const UncertainSystem& sys, int d, const BoundOptions& opt = {});

/// Largest violation of each certificate constraint over random points, in
/// the internal coordinates the certificate was computed in:
///   initial:   v(0, x, th) - gamma                   on X0 x Theta
///   flow:      L_fk v  or  v(f_k, th) - v - alpha    on [0,1] x Xk x Theta x W
///   objective: p - v  (sum_i beta_i p_i - v)         on [0,1] x X x Theta
struct CertificateCheck {
  double initial = 0.0;
  double flow = 0.0;
  double objective = 0.0;
  int samples = 0;

  double worst() const { return std::max({initial, flow, objective}); }
};

CertificateCheck check_certificate(const Certificate& cert, const UncertainSystem& internal, int samples,
                                   std::uint64_t seed = 7);

}  // namespace peakbound
