#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "peakbound/bound.hpp"
#include "peakbound/relaxation.hpp"
#include "support.hpp"

using namespace peakbound;
using peakbound::testing::flow_system;

namespace {

/// One state, one parameter: x' = -th x (continuous) or x+ = th x (discrete).
UncertainSystem scalar_system(Mode mode, double horizon) {
  UncertainSystem s;
  s.mode = mode;
  s.layout = {1, 1, 0};
  s.horizon = horizon;
  const VarLayout L = s.layout;
  const Polynomial x = Polynomial::variable(L, {Block::x, 0});
  const Polynomial th = Polynomial::variable(L, {Block::theta, 0});
  const double xl[] = {-2}, xh[] = {2}, il[] = {0.5}, ih[] = {1.0};
  s.X = interval_box_set(L, xl, xh, SetLabel::X);
  s.X0 = interval_box_set(L, il, ih, SetLabel::X0);
  if (mode == Mode::continuous) {
    const double tl[] = {0.5}, thh[] = {1.5};
    s.Theta = interval_box_set(L, tl, thh, SetLabel::Theta);
    s.subsystems = {{{-1.0 * th * x}, {SetLabel::Xk, 0, {}}}};
  } else {
    const double tl[] = {0.4}, thh[] = {0.6};
    s.Theta = interval_box_set(L, tl, thh, SetLabel::Theta);
    s.subsystems = {{{th * x}, {SetLabel::Xk, 0, {}}}};
  }
  s.objectives = {x};
  return s;
}

/// Composite Simpson rule on [0, T].
template <class F>
double simpson(F f, double T, int n = 4000) {
  const double h = T / n;
  double s = f(0.0) + f(T);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

double row_value(const LinearConstraint& row, const Eigen::VectorXd& y) {
  double s = -row.rhs;
  for (const auto& t : row.form) s += t.coef * y[t.var];
  return s;
}

double min_block_eig(const ConicProgram& prog, const Eigen::VectorXd& y) {
  double worst = 1e300;
  for (const auto& b : prog.psd_blocks) {
    const auto& m = prog.measures[static_cast<std::size_t>(b.measure)];
    const Eigen::MatrixXd F = b.spec.instantiate(y.segment(m.offset, m.size()));
    const double scale = std::max(1.0, F.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F, Eigen::EigenvaluesOnly);
    worst = std::min(worst, es.eigenvalues()[0] / scale);
  }
  return worst;
}

}  // namespace

TEST(Plan, LiouvilleRowCount) {
  const auto p = plan(flow_system(0.5), 4);
  EXPECT_EQ(p.num_liouville_rows, 495);  // C(1 + 2 + 1 + 8, 8)
  EXPECT_EQ(static_cast<int>(p.test_monomials.size()), 495);
  const auto p0 = plan(flow_system(0.0), 4);
  EXPECT_EQ(p0.num_liouville_rows, 165);  // C(1 + 2 + 8, 8)
}

TEST(Plan, NominalOccupationOrder) {
  auto lin = scalar_system(Mode::continuous, 1.0);
  lin.subsystems[0].f = {-1.0 * Polynomial::variable(lin.layout, {Block::x, 0})};
  EXPECT_EQ(plan(lin, 3).nominal_occupation_orders, std::vector<int>{3});

  UncertainSystem wave;
  wave.layout = {3, 0, 0};
  const VarLayout L = wave.layout;
  auto x = [&](int i) { return Polynomial::variable(L, {Block::x, i}); };
  const double lo[] = {-4, 0.5, 0}, hi[] = {3, 3.6, 4};
  wave.X = interval_box_set(L, lo, hi, SetLabel::X);
  const double c[] = {1, 1, 1};
  wave.X0 = ball_set(L, c, 0.16, SetLabel::X0);
  wave.subsystems = {{{x(0) + 0.5 * x(1) + x(2) - 2.0 * x(1) * x(1), -0.5 * x(0) + x(1) + 2.0 * x(0) * x(1),
                       -2.0 * x(2) - 2.0 * x(0) * x(2)},
                      {SetLabel::Xk, 0, {}}}};
  wave.objectives = {x(0)};
  wave.horizon = 5;
  const auto p = plan(wave, 3);
  EXPECT_EQ(p.nominal_occupation_orders, std::vector<int>{3});
  // every moment of a Liouville row sits inside the occupation moment matrix
  EXPECT_GE(2 * p.occupation_orders[0], 2 * 3 - 1 + 2);
}

TEST(Plan, OrderTooSmall) {
  auto sys = flow_system(0.0);
  sys.objectives[0] = pow(sys.objectives[0], 4);
  EXPECT_THROW(plan(sys, 1), PolyError);
}

TEST(Assemble, StructureIsConsistent) {
  const auto sys = flow_system(0.5);
  const auto p = plan(sys, 3);
  const auto prog = assemble(sys, p);
  EXPECT_NO_THROW(prog.check());
  EXPECT_EQ(prog.num_scalars, p.num_scalars);
  EXPECT_EQ(prog.psd_blocks.size(), p.block_sides.size());
  for (std::size_t l = 0; l < prog.psd_blocks.size(); ++l) EXPECT_EQ(prog.psd_blocks[l].side(), p.block_sides[l]);
  EXPECT_EQ(static_cast<int>(prog.liouville_rows.size()), p.num_liouville_rows);
  ASSERT_GE(prog.mass_row, 0);
  EXPECT_DOUBLE_EQ(prog.equalities[static_cast<std::size_t>(prog.mass_row)].rhs, 1.0);
  for (int r : prog.liouville_rows) {
    double big = 0.0;
    for (const auto& t : prog.equalities[static_cast<std::size_t>(r)].form) big = std::max(big, std::abs(t.coef));
    EXPECT_NEAR(big, 1.0, 1e-12);
  }
  EXPECT_THROW(assemble_discrete(sys, p), PolyError);
}

TEST(Assemble, ExactTrajectoryMomentsSatisfyContinuousRows) {
  // x(t) = x0 exp(-th t) on [0, T]; occupation moments by quadrature.
  const double T = 1.0, x0 = 0.8, th = 1.2;
  const auto sys = scalar_system(Mode::continuous, T);
  const int d = 3;
  const auto prog = assemble(sys, plan(sys, d));
  Eigen::VectorXd y = Eigen::VectorXd::Zero(prog.num_scalars);
  auto path = [&](double t) { return x0 * std::exp(-th * t); };
  for (const auto& m : prog.measures) {
    for (int i = 0; i < m.size(); ++i) {
      const MultiIndex& a = m.basis->at(i);
      const int bt = a[0], bx = a[1], bth = a[2];
      double v = 0.0;
      if (m.name == "y0") v = std::pow(x0, bx) * std::pow(th, bth);
      else if (m.name == "yp") v = std::pow(T, bt) * std::pow(path(T), bx) * std::pow(th, bth);
      else v = std::pow(th, bth) * simpson([&](double t) { return std::pow(t, bt) * std::pow(path(t), bx); }, T);
      y[m.offset + i] = v;
    }
  }
  double worst = 0.0;
  for (int r : prog.liouville_rows) worst = std::max(worst, std::abs(row_value(prog.equalities[static_cast<std::size_t>(r)], y)));
  EXPECT_LT(worst, 1e-10);
  EXPECT_GT(min_block_eig(prog, y), -1e-9);
}

TEST(Assemble, ExactOrbitMomentsSatisfyDiscreteRows) {
  const int T = 5;
  const double x0 = 0.9, th = 0.45;
  const auto sys = scalar_system(Mode::discrete, T);
  const auto prog = assemble(sys, plan(sys, 2));
  EXPECT_DOUBLE_EQ(prog.occupation_scale, T);
  ASSERT_GE(prog.time_row, 0);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(prog.num_scalars);
  for (const auto& m : prog.measures) {
    for (int i = 0; i < m.size(); ++i) {
      const MultiIndex& a = m.basis->at(i);
      const int bx = a[1], bth = a[2];
      double v = 0.0;
      if (m.name == "y0") v = std::pow(x0, bx);
      else if (m.name == "yp") v = std::pow(x0 * std::pow(th, T), bx);
      else
        for (int j = 0; j < T; ++j) v += std::pow(x0 * std::pow(th, j), bx) / T;
      y[m.offset + i] = v * std::pow(th, bth);
    }
  }
  double worst = 0.0;
  for (int r : prog.liouville_rows) worst = std::max(worst, std::abs(row_value(prog.equalities[static_cast<std::size_t>(r)], y)));
  EXPECT_LT(worst, 1e-14);
  EXPECT_LE(row_value(prog.inequalities[static_cast<std::size_t>(prog.time_row)], y), 1e-15);
  EXPECT_GT(min_block_eig(prog, y), -1e-9);
}

TEST(Assemble, JsonAndSdpaDumps) {
  const auto sys = flow_system(0.0);
  const auto prog = assemble(sys, plan(sys, 2));
  const auto j = to_json(prog);
  EXPECT_EQ(j["num_scalars"].get<int>(), prog.num_scalars);
  EXPECT_EQ(j["equalities"].size(), prog.equalities.size());
  EXPECT_EQ(j["psd_blocks"].size(), prog.psd_blocks.size());
  std::ostringstream os;
  write_sdpa(prog, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  while (!line.empty() && (line[0] == '*' || line[0] == '"')) std::getline(is, line);
  EXPECT_EQ(std::stoi(line), prog.num_scalars);
  std::getline(is, line);
  EXPECT_EQ(std::stoi(line), static_cast<int>(prog.psd_blocks.size()) + 1);
}

TEST(Solve, StationarySystemBoundIsZero) {
  UncertainSystem s;
  s.layout = {1, 0, 0};
  const double xl[] = {-1}, xh[] = {1}, z[] = {0};
  s.X = interval_box_set(s.layout, xl, xh, SetLabel::X);
  s.X0 = interval_box_set(s.layout, z, z, SetLabel::X0);
  s.subsystems = {{{Polynomial(s.layout)}, {SetLabel::Xk, 0, {}}}};
  s.objectives = {Polynomial::variable(s.layout, {Block::x, 0})};
  s.horizon = 1.0;
  const auto r = compute_bound(s, 2);
  ASSERT_TRUE(r.usable()) << r.message;
  EXPECT_NEAR(r.bound, 0.0, 1e-4);
}

TEST(Solve, IdentityMapGivesInitialMaximum) {
  UncertainSystem s;
  s.mode = Mode::discrete;
  s.layout = {1, 0, 0};
  s.horizon = 4;
  const double xl[] = {-1}, xh[] = {1}, il[] = {0.2}, ih[] = {0.6};
  s.X = interval_box_set(s.layout, xl, xh, SetLabel::X);
  s.X0 = interval_box_set(s.layout, il, ih, SetLabel::X0);
  const Polynomial x = Polynomial::variable(s.layout, {Block::x, 0});
  s.subsystems = {{{x}, {SetLabel::Xk, 0, {}}}};
  s.objectives = {x};
  const auto r = compute_bound(s, 2);
  ASSERT_TRUE(r.usable()) << r.message;
  EXPECT_NEAR(r.bound, 0.6, 1e-5);
}

TEST(Solve, MaximinWithOneObjectiveMatchesMax) {
  auto sys = flow_system(0.0);
  const auto a = compute_bound(sys, 2);
  sys.objective_mode = ObjectiveMode::maximin;
  const auto b = compute_bound(sys, 2);
  ASSERT_TRUE(a.usable());
  ASSERT_TRUE(b.usable());
  EXPECT_NEAR(a.bound, b.bound, 1e-6);
}

TEST(Solve, InvalidSystemThrows) {
  auto sys = flow_system(0.0);
  sys.subsystems.clear();
  EXPECT_THROW(compute_bound(sys, 2), std::invalid_argument);
}
