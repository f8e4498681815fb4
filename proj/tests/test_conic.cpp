#include <gtest/gtest.h>

#include <cmath>

#include "peakbound/bound.hpp"
#include "peakbound/conic.hpp"
#include "peakbound/relaxation.hpp"
#include "support.hpp"

using namespace peakbound;
using peakbound::testing::flow_system;

namespace {

PsdBlock block_for(const MonomialBasis& basis, const Polynomial& g, int parent, const std::string& tag) {
  PsdBlock b;
  b.measure = 0;
  b.tag = tag;
  b.spec = localizing_matrix_spec(g, basis, parent);
  b.order = b.spec.order;
  for (const auto& [m, c] : g.terms()) {
    b.loc_monomials.push_back(m);
    b.loc_coefs.push_back(c);
  }
  return b;
}

/// max y_1 over moments of a measure on [-1, 1] with unit mass: optimum 1.
ConicProgram interval_program(double mass = 1.0) {
  const VarLayout L{1, 0, 0};
  auto basis = std::make_shared<MonomialBasis>(L, std::vector<Block>{Block::x}, 2);
  ConicProgram prog;
  prog.layout = L;
  prog.order = 1;
  prog.num_scalars = basis->size();
  prog.measures.push_back({"y0", -1, 0, 1, basis});
  const Polynomial x = Polynomial::variable(L, {Block::x, 0});
  prog.psd_blocks.push_back(block_for(*basis, Polynomial::constant(L, 1.0), 1, "M(y0)"));
  prog.psd_blocks.push_back(block_for(*basis, Polynomial::constant(L, 1.0) - x * x, 1, "M(g y0)"));
  prog.equalities.push_back({{{0, 1.0}}, mass, "mass"});
  prog.mass_row = 0;
  prog.objective = {{1, 1.0}};
  prog.check();
  return prog;
}

}  // namespace

TEST(Embedded, IntervalMaximum) {
  const auto prog = interval_program();
  const auto r = solve(prog);
  ASSERT_EQ(r.status, SolveStatus::optimal) << r.message;
  EXPECT_NEAR(r.primal_value, 1.0, 1e-7);
  EXPECT_NEAR(r.dual_value, 1.0, 1e-7);
  const auto k = kkt_report(prog, r);
  EXPECT_LT(k.primal_residual, 1e-7);
  EXPECT_LT(k.dual_residual, 1e-7);
  EXPECT_GT(k.min_psd_eig, -1e-8);
  EXPECT_GT(k.min_dual_psd_eig, -1e-8);
  EXPECT_GE(r.dual_value, r.primal_value - 1e-7);
}

TEST(Embedded, InfeasibleProgramIsFlagged) {
  auto prog = interval_program();
  prog.equalities.push_back({{{0, 1.0}}, 2.0, "clash"});
  const auto r = solve(prog);
  EXPECT_FALSE(r.usable());
  EXPECT_FALSE(r.message.empty());
}

TEST(Embedded, Deterministic) {
  const auto sys = flow_system(0.0);
  const auto prog = assemble(sys, plan(sys, 2));
  const auto a = solve(prog);
  const auto b = solve(prog);
  ASSERT_TRUE(a.usable());
  EXPECT_EQ(a.stats.iterations, b.stats.iterations);
  ASSERT_EQ(a.scalars.size(), b.scalars.size());
  for (Eigen::Index i = 0; i < a.scalars.size(); ++i) EXPECT_EQ(a.scalars[i], b.scalars[i]);
  SolverSettings serial;
  serial.parallel = false;
  const auto c = solve(prog, serial);
  EXPECT_NEAR(c.primal_value, a.primal_value, 1e-9);
}

TEST(External, IntervalMaximumThroughBridge) {
  if (std::system("python3 -c 'import clarabel' >/dev/null 2>&1") != 0) GTEST_SKIP() << "clarabel not installed";
  SolverSettings s;
  s.backend = "external";
  const auto prog = interval_program();
  const auto r = solve(prog, s);
  ASSERT_TRUE(r.usable()) << r.message;
  EXPECT_NEAR(r.primal_value, 1.0, 1e-6);
  EXPECT_EQ(r.stats.backend, "external");
}

TEST(External, AgreesWithEmbedded) {
  if (std::system("python3 -c 'import clarabel' >/dev/null 2>&1") != 0) GTEST_SKIP() << "clarabel not installed";
  const auto sys = flow_system(0.0);
  BoundOptions opt;
  opt.ranges = {{-3, 3}, {-3, 3}};
  const auto a = compute_bound(sys, 2, opt);
  opt.solver.backend = "external";
  const auto b = compute_bound(sys, 2, opt);
  ASSERT_TRUE(a.usable());
  ASSERT_TRUE(b.usable()) << b.message;
  // Clarabel stops at AlmostSolved on these programs (no strict interior),
  // slightly outside the PSD cone, so it can only overshoot the optimum.
  EXPECT_EQ(a.status, SolveStatus::optimal);
  EXPECT_GE(b.bound, a.bound - 1e-6);
  EXPECT_LT(std::abs(a.bound - b.bound), 2e-3 * std::abs(a.bound));
  ASSERT_TRUE(b.certificate.has_value());
  EXPECT_NEAR(b.certificate->gamma, b.bound, 1e-4);
}

TEST(Certificate, ContinuousDualityAndSampling) {
  const auto sys = flow_system(0.5);
  BoundOptions opt;
  opt.ranges = {{-3, 3}, {-3, 3}};
  const auto r = compute_bound(sys, 3, opt);
  ASSERT_TRUE(r.usable()) << r.message;
  ASSERT_TRUE(r.certificate_internal.has_value());
  const auto& c = *r.certificate_internal;
  EXPECT_FALSE(c.alpha.has_value());
  EXPECT_NEAR(c.gamma, r.bound, 1e-4 * std::max(1.0, std::abs(r.bound)));
  const auto chk = check_certificate(c, r.internal, 10000);
  EXPECT_EQ(chk.samples, 10000);
  EXPECT_LT(chk.worst(), 1e-3);
  // v in original coordinates reproduces the internal one
  const std::vector<double> orig = {2.5, -1.0, -1.0, 0.2, 0.0};
  const auto inner = r.scaling.point_to_internal(orig);
  EXPECT_NEAR(r.certificate->v.eval(orig), c.v.eval(inner), 1e-9 * std::max(1.0, std::abs(c.v.eval(inner))));
}

TEST(Certificate, DiscreteDuality) {
  UncertainSystem s;
  s.mode = Mode::discrete;
  s.layout = {1, 0, 0};
  s.horizon = 6;
  const VarLayout L = s.layout;
  const Polynomial x = Polynomial::variable(L, {Block::x, 0});
  const double xl[] = {-2}, xh[] = {2}, il[] = {0.1}, ih[] = {0.3};
  s.X = interval_box_set(L, xl, xh, SetLabel::X);
  s.X0 = interval_box_set(L, il, ih, SetLabel::X0);
  s.subsystems = {{{1.2 * x}, {SetLabel::Xk, 0, {}}}};
  s.objectives = {x};
  const auto r = compute_bound(s, 2);
  ASSERT_TRUE(r.usable()) << r.message;
  ASSERT_TRUE(r.certificate.has_value());
  const auto& c = *r.certificate;
  ASSERT_TRUE(c.alpha.has_value());
  EXPECT_GE(*c.alpha, -1e-8);
  EXPECT_NEAR(c.dual_bound(s.horizon), r.bound, 1e-5);
  // 0.3 * 1.2^6
  EXPECT_GE(r.bound, 0.3 * std::pow(1.2, 6) - 1e-6);
}
