#include "peakbound/recovery.hpp"

#include <algorithm>
#include <limits>

namespace peakbound {

double rank_ratio(const Eigen::MatrixXd& M) {
  if (M.rows() < 2) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double s1 = std::abs(ev[ev.size() - 1]);
  const double s2 = std::abs(ev[ev.size() - 2]);
  if (s1 == 0.0) return 1.0;
  return s2 / s1;
}

double objective_at(const UncertainSystem& sys, std::span<const double> full_point) {
  if (sys.objective_mode == ObjectiveMode::max) return sys.objectives.front().eval(full_point);
  double v = std::numeric_limits<double>::infinity();
  for (const auto& p : sys.objectives) v = std::min(v, p.eval(full_point));
  return v;
}

namespace {

Eigen::VectorXd measure_values(const ConicProgram& prog, const SolveResult& res, const std::string& name) {
  const auto& m = prog.measure(name);
  return res.scalars.segment(m.offset, m.size());
}

double first_moment(const MeasureLayout& m, const Eigen::VectorXd& y, const VarLayout& layout, VarRef v) {
  MultiIndex idx(layout.size());
  idx[layout.offset(v.block) + v.index] = 1;
  const auto k = m.basis->find(idx);
  return k ? y[*k] : 0.0;
}

}  // namespace

RecoveredPoint recover(const ConicProgram& prog, const SolveResult& res, const UncertainSystem& sys,
                       double rank_tol) {
  RecoveredPoint out;
  if (res.scalars.size() != prog.num_scalars) return out;
  const VarLayout& L = sys.layout;
  const auto& mp = prog.measure("yp");
  const auto& m0 = prog.measure("y0");
  const Eigen::VectorXd yp = measure_values(prog, res, "yp");
  const Eigen::VectorXd y0 = measure_values(prog, res, "y0");
  const double mass = yp[0];
  if (!(mass > 0.0)) return out;

  // Rank of the (x, theta) marginal: the peak time may be non-unique (e.g.
  // stationary dynamics) without affecting the extremizer.
  const Eigen::MatrixXd Mp = moment_matrix_spec(*mp.basis, 1).instantiate(yp);
  std::vector<int> keep;
  for (int i = 0; i < mp.basis->count_up_to(1); ++i) {
    if (mp.basis->at(i).block_degree(L, Block::t) == 0) keep.push_back(i);
  }
  out.rank_indicator = rank_ratio(Mp(keep, keep));
  out.rank_indicator_initial = rank_ratio(moment_matrix_spec(*m0.basis, 1).instantiate(y0));

  std::vector<double> point(static_cast<std::size_t>(L.size()), 0.0);
  if (prog.mode == Mode::continuous) {
    out.t_star = first_moment(mp, yp, L, {Block::t, 0}) / mass;
    point[0] = *out.t_star;
  }
  for (int i = 0; i < L.nx; ++i) {
    out.x_star.push_back(first_moment(mp, yp, L, {Block::x, i}) / mass);
    out.x0_star.push_back(first_moment(m0, y0, L, {Block::x, i}) / y0[0]);
    point[static_cast<std::size_t>(1 + i)] = out.x_star.back();
  }
  for (int l = 0; l < L.ntheta; ++l) {
    out.theta_star.push_back(first_moment(mp, yp, L, {Block::theta, l}) / mass);
    point[static_cast<std::size_t>(L.offset(Block::theta) + l)] = out.theta_star.back();
  }
  out.objective_value = objective_at(sys, point);

  const bool in_x = membership(sys.X, L, out.x_star, 1e-6);
  const bool in_theta = L.ntheta == 0 || membership(sys.Theta, L, out.theta_star, 1e-6);
  out.accepted = out.rank_indicator <= rank_tol && in_x && in_theta;
  if (out.accepted) out.gap = std::abs(out.objective_value - res.primal_value);
  return out;
}

}  // namespace peakbound
