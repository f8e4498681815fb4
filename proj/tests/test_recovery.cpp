#include <gtest/gtest.h>

#include "peakbound/bound.hpp"
#include "peakbound/moments.hpp"
#include "peakbound/problem_io.hpp"
#include "peakbound/recovery.hpp"
#include "peakbound/simulate.hpp"
#include "support.hpp"

using namespace peakbound;
using peakbound::testing::flow_system;

namespace {

/// Scalars holding a Dirac y0 at x0 and yp = sum_j w_j delta(t_j, x_j).
SolveResult synthetic(const ConicProgram& prog, std::vector<double> x0,
                      const std::vector<std::vector<double>>& peaks, const std::vector<double>& weights) {
  SolveResult r;
  r.status = SolveStatus::optimal;
  r.scalars = Eigen::VectorXd::Zero(prog.num_scalars);
  const auto& m0 = prog.measure("y0");
  const auto& mp = prog.measure("yp");
  r.scalars.segment(m0.offset, m0.size()) = dirac_moments(x0, m0.basis).values;
  r.scalars.segment(mp.offset, mp.size()) = empirical_occupation_moments(peaks, weights, mp.basis).values;
  return r;
}

}  // namespace

TEST(RankRatio, Basics) {
  EXPECT_DOUBLE_EQ(rank_ratio(Eigen::MatrixXd::Identity(1, 1)), 0.0);
  EXPECT_DOUBLE_EQ(rank_ratio(Eigen::MatrixXd::Identity(3, 3)), 1.0);
  Eigen::Vector3d v(1, 2, 3);
  EXPECT_LT(rank_ratio(v * v.transpose()), 1e-15);
}

TEST(Recover, SingleDiracIsAccepted) {
  const auto sys = flow_system(0.0);
  const auto prog = assemble(sys, plan(sys, 2));
  const auto res = synthetic(prog, {-1.2, -0.9}, {{0.7, 0.4, 0.3}}, {1.0});
  const auto before = res.scalars;
  const auto rp = recover(prog, res, sys);
  EXPECT_TRUE(rp.accepted);
  EXPECT_LT(rp.rank_indicator, 1e-12);
  ASSERT_TRUE(rp.t_star.has_value());
  EXPECT_NEAR(*rp.t_star, 0.7, 1e-12);
  EXPECT_NEAR(rp.x_star[0], 0.4, 1e-12);
  EXPECT_NEAR(rp.x_star[1], 0.3, 1e-12);
  EXPECT_NEAR(rp.x0_star[0], -1.2, 1e-12);
  EXPECT_NEAR(rp.objective_value, 0.4, 1e-12);
  ASSERT_TRUE(rp.gap.has_value());
  EXPECT_TRUE(res.scalars == before);
}

TEST(Recover, TwoPointMeasureIsRejected) {
  const auto sys = flow_system(0.0);
  const auto prog = assemble(sys, plan(sys, 2));
  const auto res = synthetic(prog, {-1, -1}, {{0.2, 0.5, -1.0}, {0.9, -0.5, 1.5}}, {0.5, 0.5});
  const auto rp = recover(prog, res, sys);
  EXPECT_FALSE(rp.accepted);
  EXPECT_GT(rp.rank_indicator, 1e-3);
  EXPECT_FALSE(rp.gap.has_value());
  // the first moments are still reported: the barycenter
  EXPECT_NEAR(rp.x_star[0], 0.0, 1e-12);
}

TEST(Recover, PointOutsideXIsRejected) {
  const auto sys = flow_system(0.0);
  const auto prog = assemble(sys, plan(sys, 2));
  const auto res = synthetic(prog, {-1, -1}, {{0.5, 3.5, 0.0}}, {1.0});
  const auto rp = recover(prog, res, sys);
  EXPECT_LT(rp.rank_indicator, 1e-12);
  EXPECT_FALSE(rp.accepted);
}

TEST(Recover, MalformedResultIsNotAccepted) {
  const auto sys = flow_system(0.0);
  const auto prog = assemble(sys, plan(sys, 2));
  SolveResult empty;
  EXPECT_FALSE(recover(prog, empty, sys).accepted);
}

TEST(Recover, StationarySystemReturnsInitialPoint) {
  UncertainSystem s;
  s.layout = {1, 0, 0};
  const double xl[] = {-1}, xh[] = {1}, z[] = {0.3};
  s.X = interval_box_set(s.layout, xl, xh, SetLabel::X);
  s.X0 = interval_box_set(s.layout, z, z, SetLabel::X0);
  s.subsystems = {{{Polynomial(s.layout)}, {SetLabel::Xk, 0, {}}}};
  s.objectives = {Polynomial::variable(s.layout, {Block::x, 0})};
  const auto r = compute_bound(s, 2);
  ASSERT_TRUE(r.usable());
  ASSERT_TRUE(r.recovered.has_value());
  EXPECT_TRUE(r.recovered->accepted);
  EXPECT_NEAR(r.recovered->x_star[0], 0.3, 1e-4);
  EXPECT_NEAR(r.recovered->x0_star[0], 0.3, 1e-4);
  EXPECT_LT(r.recovered->rank_indicator, 1e-3);
}

TEST(Recover, ThreeWaveCandidateReplaysNearTheBound) {
  const auto pf = load_problem(std::string(PEAKBOUND_PROBLEMS) + "/threewave.json");
  BoundOptions opt;
  opt.ranges = pf.options.scale;
  const auto r = compute_bound(pf.sys, 3, opt);
  ASSERT_TRUE(r.usable());
  ASSERT_TRUE(r.recovered.has_value());
  const auto& rp = *r.recovered;
  if (!rp.accepted) GTEST_SKIP() << "rank indicator " << rp.rank_indicator;
  // replay from the recovered initial condition
  TrajectoryControl ctl;
  ctl.disturbance = [](int) { return std::vector<double>{}; };
  ctl.pick = [](const std::vector<int>& a) { return a.front(); };
  const auto rec = integrate(pf.sys, rp.x0_star, {}, ctl, 1e-3, 1e-3);
  EXPECT_LE(rec.peak, r.bound + 1e-6);
  EXPECT_GE(rec.peak, r.bound - std::max(*rp.gap, 1e-2));
}
