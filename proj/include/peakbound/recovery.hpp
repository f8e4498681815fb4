#pragma once

#include <optional>
#include <vector>

#include "peakbound/conic.hpp"

namespace peakbound {

/// Candidate extremizer read off the first moments of the peak measure.
struct RecoveredPoint {
  std::optional<double> t_star;  // continuous mode only
  std::vector<double> x_star;
  std::vector<double> theta_star;
  /// Initial condition read from the first moments of y0.
  std::vector<double> x0_star;
  /// sigma_2 / sigma_1 of the order-1 moment matrix of the (x, theta)
  /// marginal of yp.
  double rank_indicator = 1.0;
  double rank_indicator_initial = 1.0;
  bool accepted = false;
  /// p(x*) (min_i p_i(x*) in maximin mode).
  double objective_value = 0.0;
  /// |p(x*) - bound|, set only when accepted.
  std::optional<double> gap;
};

/// Ratio of the two largest eigenvalues of a symmetric PSD matrix; 0 for a
/// 1x1 matrix.
double rank_ratio(const Eigen::MatrixXd& M);

/// Reads the rank-1 candidate of the peak measure. The point is in the
/// coordinates of `sys`, the system the program was assembled from.
/// Never throws for a numerically poor result: accepted is simply false.
RecoveredPoint recover(const ConicProgram& prog, const SolveResult& res, const UncertainSystem& sys,
                       double rank_tol = 1e-3);

/// Objective of a peak problem at a state: p(x) or min_i p_i(x).
double objective_at(const UncertainSystem& sys, std::span<const double> full_point);

}  // namespace peakbound
