#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "peakbound/model.hpp"

namespace peakbound {

struct SamplePolicy {
  int num_trajectories = 2000;
  /// Hold interval of the piecewise-constant disturbance; <= 0 means T/200.
  /// Ignored in discrete mode, where w is redrawn every step.
  double hold = 0.0;
  /// RK4 step; <= 0 means the hold interval. Never exceeds the hold.
  double step = 0.0;
  std::uint64_t seed = 1;
  /// Optional explicit theta values, cycled over trajectories.
  std::vector<std::vector<double>> theta_grid;
  /// Share of initial conditions drawn on the boundary of a ball or box X0.
  double boundary_fraction = 0.5;
  /// Membership tolerance for X and the switching regions.
  double tol = 1e-9;
  bool parallel = true;
};

struct TrajectoryRecord {
  std::vector<double> x0;
  std::vector<double> theta;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  /// Disturbance and subsystem of the step leaving each point; the final
  /// point repeats the last step.
  std::vector<std::vector<double>> disturbances;
  std::vector<int> subsystem;
  /// p_i at each point, one vector per point.
  std::vector<std::vector<double>> objectives;
  /// p, or min_i p_i, at each point.
  std::vector<double> values;
  double peak = -std::numeric_limits<double>::infinity();
  double peak_time = 0.0;
  bool complete = true;
  std::string diagnostic;
};

/// Per-trajectory choices during integration.
struct TrajectoryControl {
  /// Disturbance for a hold interval (continuous) or step (discrete).
  std::function<std::vector<double>(int interval)> disturbance;
  /// Picks one entry of the admissible subsystem list.
  std::function<int(const std::vector<int>& admissible)> pick;
};

/// Continuous: fixed-step RK4 over [0, T]; discrete: T exact iterations.
/// Stops early, with complete = false, on leaving X or when no subsystem
/// region contains the state.
TrajectoryRecord integrate(const UncertainSystem& sys, std::span<const double> x0,
                           std::span<const double> theta, const TrajectoryControl& control,
                           double step, double hold, double tol = 1e-9);

/// Uniform random draws from a semialgebraic set with rejection. Balls
/// (r2 - |z - c|^2 >= 0) and boxes are detected and sampled directly; other
/// sets are sampled from the given bounding box.
class SetSampler {
 public:
  SetSampler() = default;
  SetSampler(const SemialgebraicSet& set, const VarLayout& layout,
             std::optional<std::vector<std::pair<double, double>>> bounding = std::nullopt);

  int dim() const { return dim_; }
  std::vector<double> draw(std::mt19937_64& rng, double boundary_fraction = 0.0) const;

 private:
  SemialgebraicSet set_;
  VarLayout layout_;
  int dim_ = 0;
  std::vector<double> center_;
  double radius_ = 0.0;
  bool ball_ = false;
  std::vector<std::pair<double, double>> box_;
};

/// Independent stream for trajectory `index`; identical under any schedule.
std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index);

/// Draws initial conditions, parameters, disturbances and switching per the
/// policy and integrates every trajectory.
std::vector<TrajectoryRecord> sample_trajectories(const UncertainSystem& sys, const SamplePolicy& policy);

struct EmpiricalPeak {
  double value = -std::numeric_limits<double>::infinity();
  int argmax = -1;
  int num = 0;
  int incomplete = 0;
};

EmpiricalPeak empirical_peak(const std::vector<TrajectoryRecord>& records);
EmpiricalPeak empirical_peak(const UncertainSystem& sys, const SamplePolicy& policy);

/// Liouville rows of the order-d program evaluated at the moments of one
/// trajectory: y0 and yp are Diracs at the start and end points, yk the
/// occupation moments of the steps spent in subsystem k (state held at the
/// left end of each step, time integrated exactly). `scaling` defaults to the
/// time rescaling used by the bound pipeline.
double liouville_residual(const UncertainSystem& sys, const TrajectoryRecord& record, int d,
                          const Scaling* scaling = nullptr);

/// One row per recorded point: traj, t, x..., th..., w..., subsystem, p....
void write_csv(std::ostream& os, const UncertainSystem& sys, const std::vector<TrajectoryRecord>& records);

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace peakbound
