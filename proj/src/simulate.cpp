#include "peakbound/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

#include "peakbound/moments.hpp"
#include "peakbound/recovery.hpp"
#include "peakbound/relaxation.hpp"

namespace peakbound {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// r2 - a * sum (z_i - c_i)^2 with a > 0 and no cross terms, over the whole block.
std::optional<std::pair<std::vector<double>, double>> infer_ball(const SemialgebraicSet& set,
                                                                  const VarLayout& L) {
  const Block b = block_of(set.label);
  const int n = L.block_size(b);
  const int off = L.offset(b);
  for (const auto& g : set.constraints) {
    if (g.degree() != 2) continue;
    bool ok = true;
    double a = 0.0;
    for (const auto& [m, c] : g.terms()) {
      if (m.degree() == 2) {
        int var = -1;
        for (int i = 0; i < m.size(); ++i) {
          if (m[i] == 2) var = i;
        }
        if (var < 0) { ok = false; break; }
        if (a == 0.0) a = -c;
        else if (std::abs(-c - a) > 1e-12 * std::abs(a)) ok = false;
      }
      for (int i = 0; i < m.size(); ++i) {
        if (m[i] != 0 && (i < off || i >= off + n)) ok = false;
      }
    }
    if (!ok || a <= 0.0) continue;
    std::vector<double> center(static_cast<std::size_t>(n));
    double sum = 0.0;
    int squares = 0;
    for (int i = 0; i < n; ++i) {
      MultiIndex sq(L.size()), lin(L.size());
      sq[off + i] = 2;
      lin[off + i] = 1;
      if (g.coefficient(sq) != 0.0) ++squares;
      center[static_cast<std::size_t>(i)] = g.coefficient(lin) / (2 * a);
      sum += center[static_cast<std::size_t>(i)] * center[static_cast<std::size_t>(i)];
    }
    if (squares != n) continue;
    const double r2 = (g.coefficient(MultiIndex(L.size())) + a * sum) / a;
    if (r2 < 0.0) continue;
    return std::pair{center, std::sqrt(r2)};
  }
  return std::nullopt;
}

std::vector<double> full_point(const VarLayout& L, double t, std::span<const double> x,
                               std::span<const double> theta, std::span<const double> w) {
  std::vector<double> p(static_cast<std::size_t>(L.size()), 0.0);
  p[0] = t;
  std::copy(x.begin(), x.end(), p.begin() + L.offset(Block::x));
  std::copy(theta.begin(), theta.end(), p.begin() + L.offset(Block::theta));
  std::copy(w.begin(), w.end(), p.begin() + L.offset(Block::w));
  return p;
}

std::vector<double> eval_field(const std::vector<Polynomial>& f, const std::vector<double>& point) {
  std::vector<double> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].eval(point);
  return out;
}

void record_point(const UncertainSystem& sys, TrajectoryRecord& rec, double t, const std::vector<double>& x) {
  const auto p = full_point(sys.layout, t, x, rec.theta, {});
  std::vector<double> obj;
  obj.reserve(sys.objectives.size());
  for (const auto& pi : sys.objectives) obj.push_back(pi.eval(p));
  const double v = objective_at(sys, p);
  rec.times.push_back(t);
  rec.states.push_back(x);
  rec.objectives.push_back(std::move(obj));
  rec.values.push_back(v);
  if (v > rec.peak) {
    rec.peak = v;
    rec.peak_time = t;
  }
}

std::vector<int> admissible(const UncertainSystem& sys, const std::vector<double>& x, double tol) {
  std::vector<int> out;
  for (std::size_t k = 0; k < sys.subsystems.size(); ++k) {
    const auto& region = sys.subsystems[k].region;
    if (region.is_full() || membership(region, sys.layout, x, tol)) out.push_back(static_cast<int>(k));
  }
  return out;
}

std::string fmt_state(const std::vector<double>& x) {
  std::string s = "(";
  char buf[32];
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6g", i ? ", " : "", x[i]);
    s += buf;
  }
  return s + ")";
}

}  // namespace

TrajectoryRecord integrate(const UncertainSystem& sys, std::span<const double> x0,
                           std::span<const double> theta, const TrajectoryControl& control,
                           double step, double hold, double tol) {
  const VarLayout& L = sys.layout;
  if (static_cast<int>(x0.size()) != L.nx || static_cast<int>(theta.size()) != L.ntheta) {
    throw std::invalid_argument("integrate: initial state or parameter has the wrong length");
  }
  TrajectoryRecord rec;
  rec.x0.assign(x0.begin(), x0.end());
  rec.theta.assign(theta.begin(), theta.end());
  std::vector<double> x = rec.x0;
  record_point(sys, rec, 0.0, x);

  const bool discrete = sys.mode == Mode::discrete;
  int nsteps = 0;
  double h = 1.0;
  if (discrete) {
    nsteps = static_cast<int>(std::lround(sys.horizon));
  } else {
    if (!(hold > 0.0)) hold = sys.horizon / 200.0;
    if (!(step > 0.0) || step > hold) step = hold;
    nsteps = static_cast<int>(std::ceil(sys.horizon / step - 1e-9));
    h = sys.horizon / nsteps;
  }

  std::vector<double> w;
  int interval = -1;
  for (int j = 0; j < nsteps; ++j) {
    const double t = discrete ? j : j * h;
    const int iv = discrete ? j : static_cast<int>(std::floor(t / hold + 1e-9));
    if (iv != interval) {
      interval = iv;
      w = L.nw > 0 && control.disturbance ? control.disturbance(iv) : std::vector<double>(static_cast<std::size_t>(L.nw), 0.0);
    }
    const auto adm = admissible(sys, x, tol);
    if (adm.empty()) {
      rec.complete = false;
      rec.diagnostic = "no admissible subsystem at t = " + std::to_string(t) + ", x = " + fmt_state(x);
      break;
    }
    const int k = adm.size() == 1 || !control.pick ? adm.front() : control.pick(adm);
    const auto& f = sys.subsystems[static_cast<std::size_t>(k)].f;
    std::vector<double> next(x.size());
    if (discrete) {
      next = eval_field(f, full_point(L, t, x, rec.theta, w));
    } else {
      auto stage = [&](double ts, const std::vector<double>& xs) {
        return eval_field(f, full_point(L, ts, xs, rec.theta, w));
      };
      std::vector<double> tmp(x.size());
      const auto k1 = stage(t, x);
      for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
      const auto k2 = stage(t + 0.5 * h, tmp);
      for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
      const auto k3 = stage(t + 0.5 * h, tmp);
      for (std::size_t i = 0; i < x.size(); ++i) tmp[i] = x[i] + h * k3[i];
      const auto k4 = stage(t + h, tmp);
      for (std::size_t i = 0; i < x.size(); ++i) {
        next[i] = x[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
      }
    }
    rec.disturbances.push_back(w);
    rec.subsystem.push_back(k);
    const double tn = discrete ? j + 1 : (j + 1 == nsteps ? sys.horizon : (j + 1) * h);
    if (!std::all_of(next.begin(), next.end(), [](double v) { return std::isfinite(v); }) ||
        !membership(sys.X, L, next, tol)) {
      rec.complete = false;
      rec.diagnostic = "left X at t = " + std::to_string(tn) + ", x = " + fmt_state(next);
      break;
    }
    x = std::move(next);
    record_point(sys, rec, tn, x);
  }
  // Pad the per-step data so every point has a row.
  while (rec.disturbances.size() < rec.states.size()) {
    rec.disturbances.push_back(rec.disturbances.empty() ? std::vector<double>(static_cast<std::size_t>(L.nw), 0.0)
                                                        : rec.disturbances.back());
    rec.subsystem.push_back(rec.subsystem.empty() ? -1 : rec.subsystem.back());
  }
  return rec;
}

SetSampler::SetSampler(const SemialgebraicSet& set, const VarLayout& layout,
                       std::optional<std::vector<std::pair<double, double>>> bounding)
    : set_(set), layout_(layout), dim_(layout.block_size(block_of(set.label))) {
  if (dim_ == 0) return;
  if (auto ball = infer_ball(set, layout)) {
    ball_ = true;
    center_ = ball->first;
    radius_ = ball->second;
    return;
  }
  if (auto box = infer_box(set, layout)) {
    box_ = *box;
    return;
  }
  if (!bounding || static_cast<int>(bounding->size()) != dim_) {
    throw std::invalid_argument("cannot sample " + to_string(set.label) +
                                ": not a ball or box and no bounding box given");
  }
  box_ = *bounding;
}

std::vector<double> SetSampler::draw(std::mt19937_64& rng, double boundary_fraction) const {
  std::vector<double> z(static_cast<std::size_t>(dim_));
  if (dim_ == 0) return z;
  std::normal_distribution<double> normal;
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    const bool boundary = boundary_fraction > 0.0 && uniform(rng, 0.0, 1.0) < boundary_fraction;
    if (ball_) {
      double norm = 0.0;
      for (auto& v : z) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      const double r = boundary ? radius_ : radius_ * std::pow(uniform(rng, 0.0, 1.0), 1.0 / dim_);
      for (int i = 0; i < dim_; ++i) {
        z[static_cast<std::size_t>(i)] = center_[static_cast<std::size_t>(i)] + r * z[static_cast<std::size_t>(i)] / norm;
      }
    } else {
      for (int i = 0; i < dim_; ++i) {
        const auto [lo, hi] = box_[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(i)] = hi > lo ? uniform(rng, lo, hi) : lo;
      }
      if (boundary) {
        const int i = std::uniform_int_distribution<int>(0, dim_ - 1)(rng);
        const auto [lo, hi] = box_[static_cast<std::size_t>(i)];
        z[static_cast<std::size_t>(i)] = uniform(rng, 0.0, 1.0) < 0.5 ? lo : hi;
      }
    }
    if (membership(set_, layout_, z, 1e-9)) return z;
  }
  throw std::runtime_error("rejection sampling of " + to_string(set_.label) + " failed");
}

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed;
  const std::uint64_t a = splitmix64(s);
  s = a ^ (index * 0xd1b54a32d192ed03ULL);
  std::seed_seq seq{splitmix64(s), splitmix64(s), splitmix64(s), splitmix64(s)};
  return std::mt19937_64(seq);
}

std::vector<TrajectoryRecord> sample_trajectories(const UncertainSystem& sys, const SamplePolicy& policy) {
  const VarLayout& L = sys.layout;
  const auto xbox = infer_box(sys.X, L);
  const SetSampler x0s(sys.X0, L, xbox);
  const SetSampler ths = policy.theta_grid.empty() ? SetSampler(sys.Theta, L) : SetSampler();
  std::vector<std::pair<double, double>> wbox;
  if (L.nw > 0) {
    auto b = infer_box(sys.W, L);
    if (!b) throw std::invalid_argument("disturbance set W must be a box to be sampled");
    wbox = *b;
  }
  const double hold = policy.hold > 0.0 ? policy.hold : sys.horizon / 200.0;
  const int n = policy.num_trajectories;
  std::vector<TrajectoryRecord> out(static_cast<std::size_t>(std::max(n, 0)));

  auto run_one = [&](int i) {
    auto rng = trajectory_rng(policy.seed, static_cast<std::uint64_t>(i));
    const auto x0 = x0s.draw(rng, policy.boundary_fraction);
    std::vector<double> theta;
    if (!policy.theta_grid.empty()) theta = policy.theta_grid[static_cast<std::size_t>(i) % policy.theta_grid.size()];
    else theta = ths.draw(rng);
    TrajectoryControl ctl;
    ctl.disturbance = [&](int) {
      std::vector<double> w(wbox.size());
      for (std::size_t j = 0; j < wbox.size(); ++j) {
        w[j] = wbox[j].second > wbox[j].first ? uniform(rng, wbox[j].first, wbox[j].second) : wbox[j].first;
      }
      return w;
    };
    ctl.pick = [&](const std::vector<int>& adm) {
      return adm[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, static_cast<int>(adm.size()) - 1)(rng))];
    };
    out[static_cast<std::size_t>(i)] = integrate(sys, x0, theta, ctl, policy.step, hold, policy.tol);
  };

  if (policy.parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) run_one(i);
  } else {
    for (int i = 0; i < n; ++i) run_one(i);
  }
  return out;
}

EmpiricalPeak empirical_peak(const std::vector<TrajectoryRecord>& records) {
  EmpiricalPeak e;
  e.num = static_cast<int>(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].complete) ++e.incomplete;
    if (records[i].peak > e.value) {
      e.value = records[i].peak;
      e.argmax = static_cast<int>(i);
    }
  }
  return e;
}

EmpiricalPeak empirical_peak(const UncertainSystem& sys, const SamplePolicy& policy) {
  return empirical_peak(sample_trajectories(sys, policy));
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  // Golub-Welsch on the Jacobi matrix of the Legendre recurrence.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double v = es.eigenvectors()(0, k);
    nodes[static_cast<std::size_t>(k)] = 0.5 * (es.eigenvalues()[k] + 1.0);
    weights[static_cast<std::size_t>(k)] = v * v;  // sums to 1 on [0, 1]
  }
}

double liouville_residual(const UncertainSystem& sys, const TrajectoryRecord& record, int d,
                          const Scaling* scaling) {
  const Scaling sc = scaling ? *scaling : Scaling::time_only(sys);
  const UncertainSystem in = sc.apply(sys);
  const ConicProgram prog = assemble(in, plan(in, d));
  const VarLayout& L = in.layout;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(prog.num_scalars);

  auto internal = [&](double t, const std::vector<double>& x, const std::vector<double>& w) {
    return sc.point_to_internal(full_point(L, t, x, record.theta, w));
  };
  auto add = [&](const MeasureLayout& m, const std::vector<double>& full, double weight) {
    std::vector<double> active;
    for (int pos : m.basis->active_positions()) active.push_back(full[static_cast<std::size_t>(pos)]);
    Eigen::VectorXd seg = y.segment(m.offset, m.size());
    accumulate_dirac(seg, *m.basis, active, weight);
    y.segment(m.offset, m.size()) = seg;
  };

  const std::size_t npts = record.states.size();
  const std::vector<double> zero_w(static_cast<std::size_t>(L.nw), 0.0);
  add(prog.measure("y0"), internal(0.0, record.states.front(), zero_w), 1.0);
  add(prog.measure("yp"), internal(record.times.back(), record.states.back(), zero_w), 1.0);

  int max_order = 0;
  for (const auto& m : prog.measures) max_order = std::max(max_order, m.order);
  std::vector<double> gn, gw;
  gauss_legendre(max_order + 1, gn, gw);
  for (std::size_t j = 0; j + 1 < npts; ++j) {
    const int k = record.subsystem[j];
    const MeasureLayout& m = prog.measures[static_cast<std::size_t>(2 + k)];
    const auto& w = record.disturbances[j];
    if (sys.mode == Mode::discrete) {
      add(m, internal(0.0, record.states[j], w), 1.0 / prog.occupation_scale);
      continue;
    }
    const auto a = internal(record.times[j], record.states[j], w);
    const double tau0 = a[0];
    const double tau1 = internal(record.times[j + 1], record.states[j], w)[0];
    for (std::size_t q = 0; q < gn.size(); ++q) {
      auto p = a;
      p[0] = tau0 + gn[q] * (tau1 - tau0);
      add(m, p, gw[q] * (tau1 - tau0));
    }
  }

  double worst = 0.0;
  for (int r : prog.liouville_rows) {
    const auto& row = prog.equalities[static_cast<std::size_t>(r)];
    double v = -row.rhs;
    for (const auto& t : row.form) v += t.coef * y[t.var];
    worst = std::max(worst, std::abs(v));
  }
  return worst;
}

void write_csv(std::ostream& os, const UncertainSystem& sys, const std::vector<TrajectoryRecord>& records) {
  const VarLayout& L = sys.layout;
  os << "traj,t";
  for (int i = 0; i < L.nx; ++i) os << ",x" << i + 1;
  for (int i = 0; i < L.ntheta; ++i) os << ",th" << i + 1;
  for (int i = 0; i < L.nw; ++i) os << ",w" << i + 1;
  os << ",subsystem";
  for (std::size_t i = 0; i < sys.objectives.size(); ++i) os << ",p" << i + 1;
  os << '\n';
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.12g", v);
    os << buf;
  };
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    for (std::size_t j = 0; j < rec.states.size(); ++j) {
      os << r;
      num(rec.times[j]);
      for (double v : rec.states[j]) num(v);
      for (double v : rec.theta) num(v);
      for (double v : rec.disturbances[j]) num(v);
      os << ',' << rec.subsystem[j];
      for (double v : rec.objectives[j]) num(v);
      os << '\n';
    }
  }
}

}  // namespace peakbound
