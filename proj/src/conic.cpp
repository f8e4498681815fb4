#include "peakbound/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>

#include "peakbound/kernels.hpp"

namespace peakbound {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

SolveResult solve(const ConicProgram& prog, const SolverSettings& settings) {
  if (settings.backend == "external") return solve_external(prog, settings);
  if (settings.backend != "embedded") {
    SolveResult r;
    r.message = "unknown backend " + settings.backend;
    return r;
  }
  return solve_embedded(prog, settings);
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct BlockData {
  HankelBlock hb;
  int offset = 0;  // global offset of the measure
  int size = 0;    // measure size
  int group = 0;
  int goff = 0;    // offset of the measure inside its group
};

struct Group {
  int size = 0;
  std::vector<int> rows;  // second-level rows touching the group
  Mat C;                  // rows.size() x size
  std::vector<int> local_ineq;
  Mat H;
  Eigen::LLT<Mat> llt;
};

// NT scaling of one block: R^T S R = diag(lam) = R^-1 Z R^-T, W = R R^T.
struct Scaled {
  Mat R;
  Mat W;
  Vec lam;
};

struct Direction {
  Vec dy, du, dlam, ds;
  std::vector<Mat> dS, dZ, dSt, dGt;
};

bool robust_llt(const Mat& A, Eigen::LLT<Mat>& llt, Mat& L) {
  llt.compute(A);
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
    return true;
  }
  const double scale = std::max(1e-300, A.diagonal().cwiseAbs().maxCoeff());
  for (double eps = 1e-14; eps < 1e-4; eps *= 100) {
    llt.compute(A + eps * scale * Mat::Identity(A.rows(), A.cols()));
    if (llt.info() == Eigen::Success) {
      L = llt.matrixL();
      return true;
    }
  }
  return false;
}

Scaled nt_scaling(const Mat& S, const Mat& Z, bool& ok) {
  Eigen::LLT<Mat> ls, lz;
  Mat Ls, Lz;
  ok = robust_llt(S, ls, Ls) && robust_llt(Z, lz, Lz);
  Scaled sc;
  if (!ok) return sc;
  Eigen::BDCSVD<Mat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU);
  sc.lam = svd.singularValues().cwiseMax(1e-300);
  sc.R = Lz * svd.matrixU() * sc.lam.cwiseSqrt().cwiseInverse().asDiagonal();
  sc.W = sc.R * sc.R.transpose();
  return sc;
}

// Largest alpha in (0, 1/tau-ish] with diag(lam) + alpha * D >= 0.
double max_step_psd(const Vec& lam, const Mat& D) {
  const Vec is = lam.cwiseSqrt().cwiseInverse();
  Mat T = is.asDiagonal() * D * is.asDiagonal();
  T = 0.5 * (T + T.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(T, Eigen::EigenvaluesOnly);
  const double mn = es.eigenvalues().minCoeff();
  return mn < 0 ? -1.0 / mn : std::numeric_limits<double>::infinity();
}

double max_step_lp(const Vec& v, const Vec& dv) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < v.size(); ++i) {
    if (dv[i] < 0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

class Ipm {
 public:
  Ipm(const ConicProgram& prog, const SolverSettings& st) : prog_(prog), st_(st) { setup(); }
  SolveResult run();

 private:
  void setup();
  void residuals();
  bool factor();
  Direction direction(const std::vector<Mat>& rhs, const Vec& rc);
  void apply_schur(const std::vector<Vec>& dyg, std::vector<Vec>& out) const;
  void apply_reduced(const std::vector<Vec>& dyg, const Vec& z, std::vector<Vec>& oy, Vec& oz) const;
  void refine(const std::vector<Vec>& r1g, const Vec& rz, std::vector<Vec>& dyg, Vec& z) const;
  void solve_reduced(const std::vector<Vec>& r1g, const Vec& rz, std::vector<Vec>& dyg, Vec& z) const;

  const ConicProgram& prog_;
  const SolverSettings& st_;
  int n_ = 0, me_ = 0, mi_ = 0, m2_ = 0;
  Vec c_, b_, h_;
  std::vector<BlockData> blocks_;
  std::vector<Group> groups_;
  std::vector<int> var_group_, var_local_;
  std::vector<int> ineq_group_;  // -1 for coupling rows
  std::vector<int> coupling_;    // inequality indices on the second level
  std::vector<int> second_pos_;  // inequality -> second-level row, or -1
  Eigen::LLT<Mat> kfact_;
  std::vector<double> dual_slack_;  // s/lam of the coupling rows
  double nu_ = 0.0;

  // iterate
  Vec y_, u_, lam_, s_;
  std::vector<Mat> S_, Z_;
  std::vector<Scaled> sc_;
  // residuals
  std::vector<Mat> PS_;
  Vec Ps_, Pe_, Pd_;
  double pobj_ = 0, dobj_ = 0, pres_ = 0, dres_ = 0, gap_ = 0, mu_ = 0;
};

void Ipm::setup() {
  n_ = prog_.num_scalars;
  me_ = static_cast<int>(prog_.equalities.size());
  mi_ = static_cast<int>(prog_.inequalities.size());
  c_ = Vec::Zero(n_);
  for (const auto& t : prog_.objective) c_[t.var] += t.coef;
  b_.resize(me_);
  for (int i = 0; i < me_; ++i) b_[i] = prog_.equalities[static_cast<std::size_t>(i)].rhs;
  h_.resize(mi_);
  for (int j = 0; j < mi_; ++j) h_[j] = prog_.inequalities[static_cast<std::size_t>(j)].rhs;

  // Units: one per measure, plus one per bare scalar (q).
  const int nm = static_cast<int>(prog_.measures.size());
  std::vector<int> unit_of(static_cast<std::size_t>(n_), -1);
  std::vector<std::pair<int, int>> unit_range;
  for (int m = 0; m < nm; ++m) {
    const auto& ms = prog_.measures[static_cast<std::size_t>(m)];
    for (int i = 0; i < ms.size(); ++i) unit_of[static_cast<std::size_t>(ms.offset + i)] = m;
    unit_range.push_back({ms.offset, ms.size()});
  }
  for (int v = 0; v < n_; ++v) {
    if (unit_of[static_cast<std::size_t>(v)] < 0) {
      unit_of[static_cast<std::size_t>(v)] = static_cast<int>(unit_range.size());
      unit_range.push_back({v, 1});
    }
  }
  const int nu = static_cast<int>(unit_range.size());
  std::vector<int> parent(static_cast<std::size_t>(nu));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  std::vector<bool> anchored(static_cast<std::size_t>(nu), false);
  for (const auto& blk : prog_.psd_blocks) anchored[static_cast<std::size_t>(blk.measure)] = true;
  // Rows touching a scalar without any PSD block are merged into one group.
  for (const auto& row : prog_.inequalities) {
    bool bare = false;
    for (const auto& t : row.form) bare |= !anchored[static_cast<std::size_t>(unit_of[static_cast<std::size_t>(t.var)])];
    if (!bare) continue;
    const int r0 = find(unit_of[static_cast<std::size_t>(row.form.front().var)]);
    for (const auto& t : row.form) parent[static_cast<std::size_t>(find(unit_of[static_cast<std::size_t>(t.var)]))] = r0;
  }
  std::vector<int> group_of_root(static_cast<std::size_t>(nu), -1);
  std::vector<int> unit_group(static_cast<std::size_t>(nu)), unit_goff(static_cast<std::size_t>(nu));
  for (int u = 0; u < nu; ++u) {
    const int r = find(u);
    if (group_of_root[static_cast<std::size_t>(r)] < 0) {
      group_of_root[static_cast<std::size_t>(r)] = static_cast<int>(groups_.size());
      groups_.emplace_back();
    }
    const int g = group_of_root[static_cast<std::size_t>(r)];
    unit_group[static_cast<std::size_t>(u)] = g;
    unit_goff[static_cast<std::size_t>(u)] = groups_[static_cast<std::size_t>(g)].size;
    groups_[static_cast<std::size_t>(g)].size += unit_range[static_cast<std::size_t>(u)].second;
  }
  var_group_.resize(static_cast<std::size_t>(n_));
  var_local_.resize(static_cast<std::size_t>(n_));
  for (int v = 0; v < n_; ++v) {
    const int u = unit_of[static_cast<std::size_t>(v)];
    var_group_[static_cast<std::size_t>(v)] = unit_group[static_cast<std::size_t>(u)];
    var_local_[static_cast<std::size_t>(v)] = unit_goff[static_cast<std::size_t>(u)] + v - unit_range[static_cast<std::size_t>(u)].first;
  }

  for (const auto& blk : prog_.psd_blocks) {
    const auto& ms = prog_.measures[static_cast<std::size_t>(blk.measure)];
    BlockData bd;
    bd.hb = make_hankel_block(blk, *ms.basis);
    bd.offset = ms.offset;
    bd.size = ms.size();
    bd.group = unit_group[static_cast<std::size_t>(blk.measure)];
    bd.goff = unit_goff[static_cast<std::size_t>(blk.measure)];
    nu_ += bd.hb.side;
    blocks_.push_back(std::move(bd));
  }
  nu_ += mi_;

  ineq_group_.assign(static_cast<std::size_t>(mi_), -1);
  second_pos_.assign(static_cast<std::size_t>(mi_), -1);
  for (int j = 0; j < mi_; ++j) {
    const auto& row = prog_.inequalities[static_cast<std::size_t>(j)];
    int g = var_group_[static_cast<std::size_t>(row.form.front().var)];
    for (const auto& t : row.form) {
      if (var_group_[static_cast<std::size_t>(t.var)] != g) g = -1;
      if (g < 0) break;
    }
    ineq_group_[static_cast<std::size_t>(j)] = g;
    if (g >= 0) {
      groups_[static_cast<std::size_t>(g)].local_ineq.push_back(j);
    } else {
      second_pos_[static_cast<std::size_t>(j)] = me_ + static_cast<int>(coupling_.size());
      coupling_.push_back(j);
    }
  }
  m2_ = me_ + static_cast<int>(coupling_.size());

  // Dense coupling matrices per group.
  auto row_form = [&](int r) -> const SparseForm& {
    if (r < me_) return prog_.equalities[static_cast<std::size_t>(r)].form;
    return prog_.inequalities[static_cast<std::size_t>(coupling_[static_cast<std::size_t>(r - me_)])].form;
  };
  std::vector<std::vector<int>> pos_in_group(groups_.size(), std::vector<int>(static_cast<std::size_t>(m2_), -1));
  for (int r = 0; r < m2_; ++r) {
    for (const auto& t : row_form(r)) {
      const int g = var_group_[static_cast<std::size_t>(t.var)];
      auto& pg = pos_in_group[static_cast<std::size_t>(g)];
      if (pg[static_cast<std::size_t>(r)] < 0) {
        pg[static_cast<std::size_t>(r)] = static_cast<int>(groups_[static_cast<std::size_t>(g)].rows.size());
        groups_[static_cast<std::size_t>(g)].rows.push_back(r);
      }
    }
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto& G = groups_[g];
    G.C = Mat::Zero(static_cast<Eigen::Index>(G.rows.size()), G.size);
    for (std::size_t k = 0; k < G.rows.size(); ++k) {
      for (const auto& t : row_form(G.rows[k])) {
        if (var_group_[static_cast<std::size_t>(t.var)] != static_cast<int>(g)) continue;
        G.C(static_cast<Eigen::Index>(k), var_local_[static_cast<std::size_t>(t.var)]) += t.coef;
      }
    }
  }
}

void Ipm::residuals() {
  const std::size_t nb = blocks_.size();
  PS_.resize(nb);
  Pd_ = c_;
  double ps_max = 0.0;
  for (std::size_t l = 0; l < nb; ++l) {
    const auto& bd = blocks_[l];
    PS_[l] = S_[l] - hankel_apply(bd.hb, y_.segment(bd.offset, bd.size));
    ps_max = std::max(ps_max, PS_[l].cwiseAbs().maxCoeff());
    hankel_adjoint(bd.hb, Z_[l], Pd_.segment(bd.offset, bd.size));
  }
  Pe_ = b_;
  for (int i = 0; i < me_; ++i) {
    for (const auto& t : prog_.equalities[static_cast<std::size_t>(i)].form) {
      Pe_[i] -= t.coef * y_[t.var];
      Pd_[t.var] -= t.coef * u_[i];
    }
  }
  Ps_ = h_ - s_;
  for (int j = 0; j < mi_; ++j) {
    for (const auto& t : prog_.inequalities[static_cast<std::size_t>(j)].form) {
      Ps_[j] -= t.coef * y_[t.var];
      Pd_[t.var] -= t.coef * lam_[j];
    }
  }
  pobj_ = c_.dot(y_);
  dobj_ = b_.dot(u_) + h_.dot(lam_);
  const double bn = std::max(b_.size() ? b_.cwiseAbs().maxCoeff() : 0.0, h_.size() ? h_.cwiseAbs().maxCoeff() : 0.0);
  double pinf = ps_max;
  if (me_ > 0) pinf = std::max(pinf, Pe_.cwiseAbs().maxCoeff());
  if (mi_ > 0) pinf = std::max(pinf, Ps_.cwiseAbs().maxCoeff());
  pres_ = pinf / (1.0 + bn);
  dres_ = Pd_.cwiseAbs().maxCoeff() / (1.0 + c_.cwiseAbs().maxCoeff());
  gap_ = std::abs(pobj_ - dobj_) / (1.0 + std::abs(pobj_) + std::abs(dobj_));
  double comp = s_.dot(lam_);
  for (std::size_t l = 0; l < nb; ++l) comp += (S_[l].cwiseProduct(Z_[l])).sum();
  mu_ = comp / nu_;
}

bool Ipm::factor() {
  for (auto& G : groups_) G.H = Mat::Zero(G.size, G.size);
  sc_.resize(blocks_.size());
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    bool ok = false;
    sc_[l] = nt_scaling(S_[l], Z_[l], ok);
    if (!ok) return false;
    auto& bd = blocks_[l];
    auto& G = groups_[static_cast<std::size_t>(bd.group)];
    schur_hankel(bd.hb, sc_[l].W, G.H.block(bd.goff, bd.goff, bd.size, bd.size), st_.parallel);
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto& G = groups_[g];
    for (int j : G.local_ineq) {
      const double d = lam_[j] / s_[j];
      const auto& f = prog_.inequalities[static_cast<std::size_t>(j)].form;
      for (const auto& a : f) {
        for (const auto& b : f) {
          G.H(var_local_[static_cast<std::size_t>(a.var)], var_local_[static_cast<std::size_t>(b.var)]) += d * a.coef * b.coef;
        }
      }
    }
    G.H = 0.5 * (G.H + G.H.transpose());
    Mat L;
    if (!robust_llt(G.H, G.llt, L)) return false;
  }
  Mat K = Mat::Zero(m2_, m2_);
  for (const auto& G : groups_) {
    if (G.rows.empty()) continue;
    const Mat Y = G.llt.matrixL().solve(G.C.transpose());
    Mat Ksub = Mat::Zero(Y.cols(), Y.cols());
    Ksub.selfadjointView<Eigen::Lower>().rankUpdate(Y.transpose());
    Ksub = Ksub.selfadjointView<Eigen::Lower>();
    for (std::size_t a = 0; a < G.rows.size(); ++a) {
      for (std::size_t b = 0; b < G.rows.size(); ++b) {
        K(G.rows[a], G.rows[b]) += Ksub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
  dual_slack_.resize(coupling_.size());
  for (std::size_t k = 0; k < coupling_.size(); ++k) {
    const int j = coupling_[k];
    dual_slack_[k] = s_[j] / lam_[j];
    K(me_ + static_cast<int>(k), me_ + static_cast<int>(k)) += dual_slack_[k];
  }
  Mat L;
  return robust_llt(K, kfact_, L);
}

// out_g -= H_g dy_g, evaluated through the block operators rather than the
// assembled H so that refinement sees the exact system.
void Ipm::apply_schur(const std::vector<Vec>& dyg, std::vector<Vec>& out) const {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& bd = blocks_[l];
    const auto& W = sc_[l].W;
    const Mat F = hankel_apply(bd.hb, dyg[static_cast<std::size_t>(bd.group)].segment(bd.goff, bd.size));
    const Mat T = -(W * F * W);
    hankel_adjoint(bd.hb, T, out[static_cast<std::size_t>(bd.group)].segment(bd.goff, bd.size));
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (int j : groups_[g].local_ineq) {
      const auto& f = prog_.inequalities[static_cast<std::size_t>(j)].form;
      double gd = 0.0;
      for (const auto& t : f) gd += t.coef * dyg[g][var_local_[static_cast<std::size_t>(t.var)]];
      gd *= lam_[j] / s_[j];
      for (const auto& t : f) out[g][var_local_[static_cast<std::size_t>(t.var)]] -= gd * t.coef;
    }
  }
}

// Applies the reduced operator [H C'; C -D] to (dy by group, z).
void Ipm::apply_reduced(const std::vector<Vec>& dyg, const Vec& z, std::vector<Vec>& oy,
                        Vec& oz) const {
  oy.resize(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) oy[g] = Vec::Zero(groups_[g].size);
  apply_schur(dyg, oy);
  for (auto& v : oy) v = -v;
  oz = Vec::Zero(m2_);
  for (int k = me_; k < m2_; ++k) oz[k] = -dual_slack_[static_cast<std::size_t>(k - me_)] * z[k];
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& G = groups_[g];
    if (G.rows.empty()) continue;
    Vec zg(static_cast<Eigen::Index>(G.rows.size()));
    for (std::size_t a = 0; a < G.rows.size(); ++a) zg[static_cast<Eigen::Index>(a)] = z[G.rows[a]];
    oy[g].noalias() += G.C.transpose() * zg;
    const Vec cd = G.C * dyg[g];
    for (std::size_t a = 0; a < G.rows.size(); ++a) oz[G.rows[a]] += cd[static_cast<Eigen::Index>(a)];
  }
}

// Iterative refinement against the exact operator. The factorization may
// carry a regularization shift or be nearly singular late in the run; the
// best correction seen is kept.
void Ipm::refine(const std::vector<Vec>& r1g, const Vec& rz, std::vector<Vec>& dyg, Vec& z) const {
  double best = std::numeric_limits<double>::infinity();
  std::vector<Vec> best_dy = dyg;
  Vec best_z = z;
  double scale = rz.size() ? rz.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& r : r1g) {
    if (r.size()) scale = std::max(scale, r.cwiseAbs().maxCoeff());
  }
  for (int pass = 0; pass < 12; ++pass) {
    std::vector<Vec> oy;
    Vec oz;
    apply_reduced(dyg, z, oy, oz);
    double err = 0.0;
    for (std::size_t g = 0; g < oy.size(); ++g) {
      oy[g] = r1g[g] - oy[g];
      if (oy[g].size()) err = std::max(err, oy[g].cwiseAbs().maxCoeff());
    }
    oz = rz - oz;
    if (oz.size()) err = std::max(err, oz.cwiseAbs().maxCoeff());
    if (err < best) {
      best = err;
      best_dy = dyg;
      best_z = z;
    } else if (err > 0.95 * best) {
      break;
    }
    if (err <= 1e-15 * std::max(1.0, scale)) break;
    std::vector<Vec> cy;
    Vec cz;
    solve_reduced(oy, oz, cy, cz);
    for (std::size_t g = 0; g < dyg.size(); ++g) dyg[g] += cy[g];
    z += cz;
  }
  dyg = std::move(best_dy);
  z = std::move(best_z);
}

// Solves H_g dy_g + C_g' z = r_g for every group together with
// sum_g C_g dy_g - D z = rz, by eliminating dy and factoring K.
void Ipm::solve_reduced(const std::vector<Vec>& r1g, const Vec& rz, std::vector<Vec>& dyg,
                        Vec& z) const {
  Vec rhs_z = -rz;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& G = groups_[g];
    if (G.rows.empty()) continue;
    const Vec w = G.llt.solve(r1g[g]);
    const Vec cw = G.C * w;
    for (std::size_t a = 0; a < G.rows.size(); ++a) rhs_z[G.rows[a]] += cw[static_cast<Eigen::Index>(a)];
  }
  z = kfact_.solve(rhs_z);
  dyg.resize(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const auto& G = groups_[g];
    Vec rg = r1g[g];
    if (!G.rows.empty()) {
      Vec zg(static_cast<Eigen::Index>(G.rows.size()));
      for (std::size_t a = 0; a < G.rows.size(); ++a) zg[static_cast<Eigen::Index>(a)] = z[G.rows[a]];
      rg -= G.C.transpose() * zg;
    }
    dyg[g] = G.llt.solve(rg);
  }
}

Direction Ipm::direction(const std::vector<Mat>& rhs, const Vec& rc) {
  const std::size_t nb = blocks_.size();
  Direction d;
  Vec r1 = Pd_;
  std::vector<Mat> T(nb);
  for (std::size_t l = 0; l < nb; ++l) {
    const auto& sc = sc_[l];
    const int k = static_cast<int>(sc.lam.size());
    Mat Delta(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) Delta(i, j) = 2.0 * rhs[l](i, j) / (sc.lam[i] + sc.lam[j]);
    }
    T[l] = sc.R * Delta * sc.R.transpose() + sc.W * PS_[l] * sc.W;
    hankel_adjoint(blocks_[l].hb, T[l], r1.segment(blocks_[l].offset, blocks_[l].size));
  }
  for (int j = 0; j < mi_; ++j) {
    if (ineq_group_[static_cast<std::size_t>(j)] < 0) continue;
    const double coef = (rc[j] - lam_[j] * Ps_[j]) / s_[j];
    for (const auto& t : prog_.inequalities[static_cast<std::size_t>(j)].form) r1[t.var] -= coef * t.coef;
  }
  Vec rz(m2_);
  rz.head(me_) = Pe_;
  for (std::size_t k = 0; k < coupling_.size(); ++k) {
    const int j = coupling_[k];
    rz[me_ + static_cast<int>(k)] = Ps_[j] - rc[j] / lam_[j];
  }
  std::vector<Vec> r1g(groups_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g) r1g[g] = Vec::Zero(groups_[g].size);
  for (int v = 0; v < n_; ++v) r1g[static_cast<std::size_t>(var_group_[static_cast<std::size_t>(v)])][var_local_[static_cast<std::size_t>(v)]] = r1[v];
  std::vector<Vec> dyg;
  Vec z;
  solve_reduced(r1g, rz, dyg, z);
  refine(r1g, rz, dyg, z);
  d.dy.resize(n_);
  for (int v = 0; v < n_; ++v) d.dy[v] = dyg[static_cast<std::size_t>(var_group_[static_cast<std::size_t>(v)])][var_local_[static_cast<std::size_t>(v)]];
  d.du = z.head(me_);
  d.dlam.resize(mi_);
  d.ds.resize(mi_);
  for (int j = 0; j < mi_; ++j) {
    double gdy = 0.0;
    for (const auto& t : prog_.inequalities[static_cast<std::size_t>(j)].form) gdy += t.coef * d.dy[t.var];
    d.ds[j] = Ps_[j] - gdy;
    if (ineq_group_[static_cast<std::size_t>(j)] >= 0) {
      d.dlam[j] = (rc[j] - lam_[j] * Ps_[j]) / s_[j] + lam_[j] / s_[j] * gdy;
    } else {
      d.dlam[j] = z[second_pos_[static_cast<std::size_t>(j)]];
    }
  }
  d.dS.resize(nb);
  d.dZ.resize(nb);
  d.dSt.resize(nb);
  d.dGt.resize(nb);
  for (std::size_t l = 0; l < nb; ++l) {
    const auto& sc = sc_[l];
    const auto& bd = blocks_[l];
    const Mat Fdy = hankel_apply(bd.hb, d.dy.segment(bd.offset, bd.size));
    d.dS[l] = Fdy - PS_[l];
    d.dZ[l] = T[l] - sc.W * Fdy * sc.W;
    d.dZ[l] = 0.5 * (d.dZ[l] + d.dZ[l].transpose());
    d.dSt[l] = sc.R.transpose() * d.dS[l] * sc.R;
    d.dSt[l] = 0.5 * (d.dSt[l] + d.dSt[l].transpose());
    const int k = static_cast<int>(sc.lam.size());
    Mat Delta(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) Delta(i, j) = 2.0 * rhs[l](i, j) / (sc.lam[i] + sc.lam[j]);
    }
    d.dGt[l] = Delta - d.dSt[l];
  }
  return d;
}

SolveResult Ipm::run() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t nb = blocks_.size();
  y_ = Vec::Zero(n_);
  u_ = Vec::Zero(me_);
  lam_ = Vec::Ones(mi_);
  s_ = Vec::Ones(mi_);
  S_.clear();
  Z_.clear();
  for (const auto& bd : blocks_) {
    S_.push_back(Mat::Identity(bd.hb.side, bd.hb.side));
    Z_.push_back(Mat::Identity(bd.hb.side, bd.hb.side));
  }
  SolveResult res;
  res.stats.backend = "embedded";
  int stall = 0;
  int it = 0;
  double best_merit = std::numeric_limits<double>::infinity();
  double best_mu = std::numeric_limits<double>::infinity();
  struct Snapshot {
    Vec y, u, lam, s;
    std::vector<Mat> S, Z;
    double merit = std::numeric_limits<double>::infinity();
  } best;
  for (; it <= st_.max_iter; ++it) {
    residuals();
    const double merit_now = std::max({pres_, dres_, gap_});
    if (std::isfinite(merit_now) && merit_now < best.merit) best = {y_, u_, lam_, s_, S_, Z_, merit_now};
    if (st_.verbose) {
      std::fprintf(stderr, "%3d pobj % .9e dobj % .9e pres %.2e dres %.2e gap %.2e mu %.2e\n", it,
                   pobj_, dobj_, pres_, dres_, gap_, mu_);
    }
    if (!std::isfinite(merit_now) || !(mu_ > 0.0)) {
      res.status = SolveStatus::numerical_failure;
      res.message = "iterate left the cone";
      break;
    }
    if (pres_ <= st_.feas_tol && dres_ <= st_.feas_tol && gap_ <= st_.gap_tol) {
      res.status = SolveStatus::optimal;
      break;
    }
    const double ynorm = y_.cwiseAbs().maxCoeff();
    const double unorm = std::max(u_.size() ? u_.cwiseAbs().maxCoeff() : 0.0,
                                  lam_.size() ? lam_.cwiseAbs().maxCoeff() : 0.0);
    if (ynorm > 1e12 && dres_ > st_.near_tol) {
      res.status = SolveStatus::unbounded;
      res.message = "primal iterates diverge";
      break;
    }
    if (unorm > 1e12 && pres_ > st_.near_tol) {
      res.status = SolveStatus::infeasible;
      res.message = "dual iterates diverge";
      break;
    }
    if (it == st_.max_iter || stall >= 8) {
      const double worst = std::max({pres_, dres_, gap_});
      res.status = worst <= st_.near_tol ? SolveStatus::near_optimal : SolveStatus::numerical_failure;
      res.message = it == st_.max_iter ? "iteration limit reached" : "no further progress";
      break;
    }
    if (!factor()) {
      const double worst = std::max({pres_, dres_, gap_});
      res.status = worst <= st_.near_tol ? SolveStatus::near_optimal : SolveStatus::numerical_failure;
      res.message = "factorization failed";
      break;
    }
    // Predictor.
    std::vector<Mat> rhs(nb);
    for (std::size_t l = 0; l < nb; ++l) {
      rhs[l] = Mat::Zero(sc_[l].lam.size(), sc_[l].lam.size());
      rhs[l].diagonal() = -sc_[l].lam.cwiseAbs2();
    }
    Vec rc = -lam_.cwiseProduct(s_);
    Direction a = direction(rhs, rc);
    double ap = std::min(1.0, max_step_lp(s_, a.ds));
    double ad = std::min(1.0, max_step_lp(lam_, a.dlam));
    for (std::size_t l = 0; l < nb; ++l) {
      ap = std::min(ap, max_step_psd(sc_[l].lam, a.dSt[l]));
      ad = std::min(ad, max_step_psd(sc_[l].lam, a.dGt[l]));
    }
    double comp_aff = (s_ + ap * a.ds).dot(lam_ + ad * a.dlam);
    for (std::size_t l = 0; l < nb; ++l) {
      comp_aff += ((sc_[l].lam.asDiagonal().toDenseMatrix() + ap * a.dSt[l])
                       .cwiseProduct(sc_[l].lam.asDiagonal().toDenseMatrix() + ad * a.dGt[l]))
                      .sum();
    }
    const double mu_aff = comp_aff / nu_;
    const double sigma = std::clamp(std::pow(mu_aff / mu_, 3.0), 0.0, 1.0);
    // Corrector.
    for (std::size_t l = 0; l < nb; ++l) {
      Mat cross = a.dSt[l] * a.dGt[l];
      rhs[l] = -0.5 * (cross + cross.transpose());
      rhs[l].diagonal().array() += sigma * mu_ - sc_[l].lam.cwiseAbs2().array();
    }
    rc = Vec::Constant(mi_, sigma * mu_) - lam_.cwiseProduct(s_) - a.ds.cwiseProduct(a.dlam);
    Direction d = direction(rhs, rc);
    ap = max_step_lp(s_, d.ds);
    ad = max_step_lp(lam_, d.dlam);
    for (std::size_t l = 0; l < nb; ++l) {
      ap = std::min(ap, max_step_psd(sc_[l].lam, d.dSt[l]));
      ad = std::min(ad, max_step_psd(sc_[l].lam, d.dGt[l]));
    }
    const double tau = 0.98;
    ap = std::min(1.0, tau * ap);
    ad = std::min(1.0, tau * ad);
    if (st_.verbose) std::fprintf(stderr, "    sigma %.2e step %.3f %.3f\n", sigma, ap, ad);
    y_ += ap * d.dy;
    s_ += ap * d.ds;
    u_ += ad * d.du;
    lam_ += ad * d.dlam;
    for (std::size_t l = 0; l < nb; ++l) {
      S_[l] += ap * d.dS[l];
      Z_[l] += ad * d.dZ[l];
      S_[l] = 0.5 * (S_[l] + S_[l].transpose());
      Z_[l] = 0.5 * (Z_[l] + Z_[l].transpose());
    }
    // Progress is a 10% drop of either the residual merit or mu.
    const double merit = std::max({pres_, dres_, gap_});
    bool progress = false;
    if (merit < 0.9 * best_merit) {
      best_merit = merit;
      progress = true;
    }
    if (mu_ < 0.9 * best_mu) {
      best_mu = mu_;
      progress = merit < 10.0 * best_merit;
    }
    stall = progress && std::max(ap, ad) >= 1e-3 ? 0 : stall + 1;
  }
  if (res.status != SolveStatus::optimal && best.merit < std::max({pres_, dres_, gap_})) {
    // Late iterations can lose accuracy; fall back to the best point seen.
    y_ = best.y;
    u_ = best.u;
    lam_ = best.lam;
    s_ = best.s;
    S_ = best.S;
    Z_ = best.Z;
    residuals();
    if (res.status == SolveStatus::numerical_failure && best.merit <= st_.near_tol) {
      res.status = SolveStatus::near_optimal;
    }
  }
  res.stats.iterations = it;
  res.stats.primal_residual = pres_;
  res.stats.dual_residual = dres_;
  res.stats.gap = gap_;
  res.primal_value = pobj_;
  res.dual_value = dobj_;
  res.scalars = y_;
  res.equality_duals = u_;
  res.inequality_duals = lam_;
  res.psd_duals = Z_;
  res.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace

SolveResult solve_embedded(const ConicProgram& prog, const SolverSettings& settings) {
  prog.check();
  Ipm ipm(prog, settings);
  return ipm.run();
}

KktReport kkt_report(const ConicProgram& prog, const SolveResult& res) {
  KktReport r;
  const int n = prog.num_scalars;
  Vec c = Vec::Zero(n);
  for (const auto& t : prog.objective) c[t.var] += t.coef;
  Vec pd = c;
  double pinf = 0.0, bn = 0.0;
  double dobj = 0.0;
  for (std::size_t i = 0; i < prog.equalities.size(); ++i) {
    const auto& e = prog.equalities[i];
    double ay = 0.0;
    for (const auto& t : e.form) {
      ay += t.coef * res.scalars[t.var];
      pd[t.var] -= t.coef * res.equality_duals[static_cast<Eigen::Index>(i)];
    }
    pinf = std::max(pinf, std::abs(ay - e.rhs));
    bn = std::max(bn, std::abs(e.rhs));
    dobj += e.rhs * res.equality_duals[static_cast<Eigen::Index>(i)];
  }
  for (std::size_t j = 0; j < prog.inequalities.size(); ++j) {
    const auto& e = prog.inequalities[j];
    double gy = 0.0;
    for (const auto& t : e.form) {
      gy += t.coef * res.scalars[t.var];
      pd[t.var] -= t.coef * res.inequality_duals[static_cast<Eigen::Index>(j)];
    }
    pinf = std::max(pinf, gy - e.rhs);
    bn = std::max(bn, std::abs(e.rhs));
    dobj += e.rhs * res.inequality_duals[static_cast<Eigen::Index>(j)];
  }
  r.min_psd_eig = std::numeric_limits<double>::infinity();
  r.min_dual_psd_eig = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < prog.psd_blocks.size(); ++l) {
    const auto& blk = prog.psd_blocks[l];
    const auto& ms = prog.measures[static_cast<std::size_t>(blk.measure)];
    const Mat F = blk.spec.instantiate(res.scalars.segment(ms.offset, ms.size()));
    Eigen::SelfAdjointEigenSolver<Mat> es(F, Eigen::EigenvaluesOnly);
    r.min_psd_eig = std::min(r.min_psd_eig, es.eigenvalues().minCoeff());
    const Mat& Z = res.psd_duals[l];
    Eigen::SelfAdjointEigenSolver<Mat> ez(Z, Eigen::EigenvaluesOnly);
    r.min_dual_psd_eig = std::min(r.min_dual_psd_eig, ez.eigenvalues().minCoeff());
    for (int a = 0; a < blk.side(); ++a) {
      for (int b = 0; b < blk.side(); ++b) {
        for (const auto& t : blk.spec.entry(a, b)) pd[ms.offset + t.index] += t.coef * Z(a, b);
      }
    }
  }
  r.primal_residual = pinf / (1.0 + bn);
  r.dual_residual = pd.cwiseAbs().maxCoeff() / (1.0 + c.cwiseAbs().maxCoeff());
  const double pobj = c.dot(res.scalars);
  r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return r;
}

Certificate extract_certificate(const ConicProgram& prog, const SolveResult& res,
                                const UncertainSystem& sys) {
  if (res.equality_duals.size() != static_cast<Eigen::Index>(prog.equalities.size()) ||
      res.inequality_duals.size() != static_cast<Eigen::Index>(prog.inequalities.size())) {
    throw std::runtime_error("solve result carries no duals for this program");
  }
  Certificate cert;
  cert.gamma = res.equality_duals[prog.mass_row];
  if (prog.time_row >= 0) cert.alpha = res.inequality_duals[prog.time_row] / prog.occupation_scale;
  for (int j : prog.objective_rows) cert.beta.push_back(res.inequality_duals[j]);
  cert.v = Polynomial(sys.layout);
  for (std::size_t k = 0; k < prog.liouville_rows.size(); ++k) {
    const auto& row = prog.equalities[static_cast<std::size_t>(prog.liouville_rows[k])];
    const double u = res.equality_duals[prog.liouville_rows[k]] / row.row_scale;
    cert.v.add_term(prog.test_monomials[k], -u);
  }
  return cert;
}

}  // namespace peakbound
