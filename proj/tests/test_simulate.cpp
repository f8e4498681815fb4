#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "peakbound/problem_io.hpp"
#include "peakbound/simulate.hpp"
#include "support.hpp"

using namespace peakbound;
using peakbound::testing::flow_system;

namespace {

TrajectoryControl constant_control(std::vector<double> w) {
  TrajectoryControl c;
  c.disturbance = [w](int) { return w; };
  c.pick = [](const std::vector<int>& a) { return a.front(); };
  return c;
}

UncertainSystem line_system(double speed) {
  UncertainSystem s;
  s.layout = {1, 0, 0};
  s.horizon = 1.0;
  const double xl[] = {-2}, xh[] = {2}, z[] = {0};
  s.X = interval_box_set(s.layout, xl, xh, SetLabel::X);
  s.X0 = interval_box_set(s.layout, z, z, SetLabel::X0);
  s.subsystems = {{{Polynomial::constant(s.layout, speed)}, {SetLabel::Xk, 0, {}}}};
  s.objectives = {Polynomial::variable(s.layout, {Block::x, 0})};
  return s;
}

ProblemFile problem(const std::string& name) {
  return load_problem(std::string(PEAKBOUND_PROBLEMS) + "/" + name + ".json");
}

}  // namespace

TEST(Integrate, StationaryTrajectory) {
  const auto sys = line_system(0.0);
  const double x0[] = {0.4};
  const auto rec = integrate(sys, x0, {}, constant_control({}), 0.01, 0.01);
  EXPECT_TRUE(rec.complete);
  for (const auto& s : rec.states) EXPECT_EQ(s[0], 0.4);
  EXPECT_DOUBLE_EQ(rec.peak, 0.4);
  EXPECT_NEAR(rec.times.back(), 1.0, 1e-12);
}

TEST(Integrate, UnitDriftIsExact) {
  const auto sys = line_system(1.0);
  const double x0[] = {0.0};
  const auto rec = integrate(sys, x0, {}, constant_control({}), 0.013, 0.1);
  EXPECT_TRUE(rec.complete);
  EXPECT_NEAR(rec.states.back()[0], 1.0, 1e-10);
  EXPECT_NEAR(rec.peak, 1.0, 1e-10);
  EXPECT_NEAR(rec.peak_time, 1.0, 1e-10);
}

TEST(Integrate, FourthOrderUnderStepHalving) {
  const auto sys = flow_system(0.0);
  const double x0[] = {-1.3, -0.8};
  auto final_state = [&](double h) {
    const auto rec = integrate(sys, x0, {}, constant_control({0.0}), h, h);
    return rec.states.back();
  };
  const auto ref = final_state(1e-3);
  double prev = 0.0;
  for (double h : {0.4, 0.2, 0.1}) {
    const auto s = final_state(h);
    const double e = std::hypot(s[0] - ref[0], s[1] - ref[1]);
    if (prev > 0) {
      const double ratio = prev / e;
      EXPECT_GT(ratio, 12.0) << "h = " << h;
      EXPECT_LT(ratio, 20.0) << "h = " << h;
    }
    prev = e;
  }
}

TEST(Integrate, ExitAndDeadEndAreRecorded) {
  const auto sys = line_system(3.0);
  const double x0[] = {0.0};
  const auto rec = integrate(sys, x0, {}, constant_control({}), 0.01, 0.01);
  EXPECT_FALSE(rec.complete);
  EXPECT_FALSE(rec.diagnostic.empty());
  for (const auto& s : rec.states) EXPECT_LE(s[0], 2.0 + 1e-9);

  auto gated = line_system(1.0);
  const Polynomial x = Polynomial::variable(gated.layout, {Block::x, 0});
  gated.subsystems[0].region.constraints = {Polynomial::constant(gated.layout, 0.5) - x};
  const auto rec2 = integrate(gated, x0, {}, constant_control({}), 0.01, 0.01);
  EXPECT_FALSE(rec2.complete);
  EXPECT_LE(rec2.states.back()[0], 0.5 + 0.01 + 1e-9);
}

TEST(Integrate, DiscreteIteratesExactly) {
  auto sys = line_system(0.0);
  sys.mode = Mode::discrete;
  sys.horizon = 5;
  const Polynomial x = Polynomial::variable(sys.layout, {Block::x, 0});
  sys.subsystems[0].f = {0.5 * x + Polynomial::constant(sys.layout, 0.25)};
  const double x0[] = {1.0};
  const auto rec = integrate(sys, x0, {}, constant_control({}), 0, 0);
  ASSERT_EQ(rec.states.size(), 6u);
  double v = 1.0;
  for (int k = 0; k <= 5; ++k) {
    EXPECT_EQ(rec.states[static_cast<std::size_t>(k)][0], v);
    v = 0.5 * v + 0.25;
  }
  EXPECT_DOUBLE_EQ(rec.peak, 1.0);
}

TEST(Sampling, ReproducibleUnderAnySchedule) {
  const auto sys = flow_system(0.5);
  SamplePolicy p;
  p.num_trajectories = 64;
  p.seed = 42;
  const auto a = sample_trajectories(sys, p);
  const auto b = sample_trajectories(sys, p);
  p.parallel = false;
  const auto c = sample_trajectories(sys, p);
  ASSERT_EQ(a.size(), 64u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].states, b[i].states);
    EXPECT_EQ(a[i].states, c[i].states);
    EXPECT_EQ(a[i].disturbances, c[i].disturbances);
    EXPECT_EQ(a[i].theta, c[i].theta);
  }
  p.seed = 43;
  const auto d = sample_trajectories(sys, p);
  EXPECT_NE(a[0].x0, d[0].x0);
}

TEST(Sampling, DrawsRespectTheSets) {
  const auto sys = flow_system(0.5);
  SamplePolicy p;
  p.num_trajectories = 300;
  const auto recs = sample_trajectories(sys, p);
  int on_boundary = 0;
  for (const auto& r : recs) {
    EXPECT_TRUE(membership(sys.X0, sys.layout, r.x0, 1e-9));
    ASSERT_EQ(r.theta.size(), 1u);
    EXPECT_LE(std::abs(r.theta[0]), 0.5);
    for (const auto& w : r.disturbances) EXPECT_LE(std::abs(w[0]), 0.2);
    const double g = sys.X0.constraints[0].eval(std::vector<double>{0, r.x0[0], r.x0[1], 0, 0});
    if (std::abs(g) < 1e-9) ++on_boundary;
  }
  EXPECT_GT(on_boundary, 100);
  EXPECT_LT(on_boundary, 200);
}

TEST(Sampling, SwitchingUsesAdmissibleSubsystems) {
  const auto pf = problem("discrete_w0");
  SamplePolicy p;
  p.num_trajectories = 100;
  const auto recs = sample_trajectories(pf.sys, p);
  for (const auto& r : recs) {
    for (std::size_t k = 0; k + 1 < r.states.size(); ++k) {
      const int s = r.subsystem[k];
      const auto& region = pf.sys.subsystems[static_cast<std::size_t>(s)].region;
      EXPECT_TRUE(membership(region, pf.sys.layout, r.states[k], 1e-9));
    }
  }
}

TEST(EmpiricalPeak, StationarySingleton) {
  const auto sys = line_system(0.0);
  SamplePolicy p;
  p.num_trajectories = 10;
  const auto e = empirical_peak(sys, p);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.num, 10);
  EXPECT_EQ(e.incomplete, 0);
}

TEST(EmpiricalPeak, BelowPublishedBounds) {
  SamplePolicy p;
  p.num_trajectories = 2000;
  const auto flow = problem("flow_theta0");
  EXPECT_LE(empirical_peak(flow.sys, p).value, 0.4925 + 1e-6);
  const auto disc = problem("discrete_w");
  const auto e = empirical_peak(disc.sys, p);
  EXPECT_LE(e.value, 1.837 + 1e-6);
  EXPECT_GT(e.value, 1.2);
}

TEST(Residual, StationaryIsExact) {
  const auto sys = line_system(0.0);
  const double x0[] = {0.0};
  const auto rec = integrate(sys, x0, {}, constant_control({}), 0.05, 0.05);
  EXPECT_LE(liouville_residual(sys, rec, 3), 1e-12);
}

TEST(Residual, DiscreteTelescopes) {
  const auto pf = problem("discrete_w");
  SamplePolicy p;
  p.num_trajectories = 20;
  for (const auto& r : sample_trajectories(pf.sys, p)) {
    if (!r.complete) continue;
    EXPECT_LE(liouville_residual(pf.sys, r, 3), 1e-10);
  }
}

TEST(Residual, ContinuousIsFirstOrder) {
  const auto sys = flow_system(0.0);
  const double x0[] = {-1.2, -0.7};
  double prev = 0.0;
  for (double h : {0.1, 0.05, 0.025}) {
    const auto rec = integrate(sys, x0, {}, constant_control({0.1}), h, h);
    const double r = liouville_residual(sys, rec, 3);
    if (prev > 0) EXPECT_GE(prev / r, 1.8) << "h = " << h;
    prev = r;
  }
}

TEST(Quadrature, GaussLegendreIsExact) {
  std::vector<double> x, w;
  for (int n : {1, 3, 6}) {
    gauss_legendre(n, x, w);
    for (int k = 0; k < 2 * n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += w[static_cast<std::size_t>(i)] * std::pow(x[static_cast<std::size_t>(i)], k);
      EXPECT_NEAR(s, 1.0 / (k + 1), 1e-14) << n << " " << k;
    }
  }
}

TEST(Csv, HeaderAndRows) {
  const auto sys = flow_system(0.5);
  SamplePolicy p;
  p.num_trajectories = 2;
  const auto recs = sample_trajectories(sys, p);
  std::ostringstream os;
  write_csv(os, sys, recs);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "traj,t,x1,x2,th1,w1,subsystem,p1");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
  }
  EXPECT_EQ(rows, recs[0].states.size() + recs[1].states.size());
  EXPECT_EQ(os.str().find('\r'), std::string::npos);
}
