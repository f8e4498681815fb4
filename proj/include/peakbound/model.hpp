#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peakbound/polycore.hpp"

namespace peakbound {

enum class SetLabel { X, X0, Xk, Theta, W };

/// Block a set of the given label lives on.
Block block_of(SetLabel label);
std::string to_string(SetLabel label);

/// {z | g_i(z) >= 0 for all i}. Constraints are stored over the full layout
/// but may only use the block matching the label.
struct SemialgebraicSet {
  SetLabel label = SetLabel::X;
  int subsystem = -1;  // only meaningful for Xk
  std::vector<Polynomial> constraints;

  std::vector<int> degrees() const;
  bool is_full() const { return constraints.empty(); }
};

/// True iff every g_i(point) >= -tol. `point` holds only the set's block.
bool membership(const SemialgebraicSet& set, const VarLayout& layout,
                std::span<const double> point, double tol = 1e-9);

/// One quadratic (z_i - lo_i)(hi_i - z_i) >= 0 per coordinate of the block.
SemialgebraicSet interval_box_set(const VarLayout& layout, std::span<const double> lo,
                                  std::span<const double> hi, SetLabel label);

/// r2 - |z - center|^2 >= 0 on the label's block. Useful as a redundant
/// Archimedean constraint.
SemialgebraicSet ball_set(const VarLayout& layout, std::span<const double> center, double r2,
                          SetLabel label);

/// Recognises constraints of the interval form above and returns the box, if
/// every coordinate of the block is bounded by one.
std::optional<std::vector<std::pair<double, double>>> infer_box(const SemialgebraicSet& set,
                                                                const VarLayout& layout);

enum class Mode { continuous, discrete };
enum class ObjectiveMode { max, maximin };

struct Subsystem {
  std::vector<Polynomial> f;  // length nx
  SemialgebraicSet region;    // label Xk; empty constraints means all of X
};

struct UncertainSystem {
  std::string name;
  Mode mode = Mode::continuous;
  VarLayout layout;
  double horizon = 1.0;
  SemialgebraicSet X{SetLabel::X, -1, {}};
  SemialgebraicSet X0{SetLabel::X0, -1, {}};
  SemialgebraicSet Theta{SetLabel::Theta, -1, {}};
  SemialgebraicSet W{SetLabel::W, -1, {}};
  std::vector<Subsystem> subsystems;
  std::vector<Polynomial> objectives;
  ObjectiveMode objective_mode = ObjectiveMode::max;
};

enum class Severity { warning, error };

struct Diagnostic {
  Severity severity = Severity::error;
  std::string code;
  std::string message;
};

/// Structured check of every model invariant. Empty result means valid.
std::vector<Diagnostic> validate(const UncertainSystem& sys);
bool has_errors(const std::vector<Diagnostic>& diags);

/// Affine change of coordinates used before relaxation:
///   t = horizon * tau            (continuous mode only, tau in [0,1])
///   x_i = center_i + halfwidth_i * z_i
///   theta_l, w_j likewise, onto [-1, 1] when their sets are boxes
/// Objective values are invariant, so a bound computed in internal
/// coordinates is a bound in original ones.
class Scaling {
 public:
  Scaling() = default;
  Scaling(const UncertainSystem& sys, std::vector<double> center, std::vector<double> halfwidth);
  /// Time rescaling only.
  static Scaling time_only(const UncertainSystem& sys);
  /// Time rescaling plus state rescaling of the ranges [lo_i, hi_i] onto [-1, 1].
  /// Box-shaped Theta and W sets are mapped onto [-1, 1] as well.
  static Scaling from_ranges(const UncertainSystem& sys,
                             std::span<const std::pair<double, double>> ranges);

  UncertainSystem apply(const UncertainSystem& sys) const;

  /// p(t, x, ...) in original coordinates -> same function of (tau, z, ...).
  Polynomial to_internal(const Polynomial& p) const;
  /// Inverse of to_internal.
  Polynomial to_original(const Polynomial& p) const;

  /// Full-layout point conversions.
  std::vector<double> point_to_internal(std::span<const double> point) const;
  std::vector<double> point_to_original(std::span<const double> point) const;

  double time_factor() const { return time_factor_; }
  const std::vector<double>& center() const { return center_; }
  const std::vector<double>& halfwidth() const { return halfwidth_; }
  /// Affine maps of the theta then w coordinates.
  const std::vector<double>& param_center() const { return param_center_; }
  const std::vector<double>& param_halfwidth() const { return param_half_; }
  bool continuous() const { return continuous_; }

 private:
  VarLayout layout_;
  bool continuous_ = true;
  double time_factor_ = 1.0;
  std::vector<double> center_;
  std::vector<double> halfwidth_;
  std::vector<double> param_center_;
  std::vector<double> param_half_;
};

}  // namespace peakbound
