#include "peakbound/bound.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "peakbound/simulate.hpp"

namespace peakbound {

BoundResult compute_bound(const UncertainSystem& sys, int d, const BoundOptions& opt) {
  const auto diags = validate(sys);
  if (has_errors(diags)) {
    std::string msg = "invalid system:";
    for (const auto& dg : diags) {
      if (dg.severity == Severity::error) msg += " [" + dg.code + "] " + dg.message + ";";
    }
    throw std::invalid_argument(msg);
  }
  const auto t0 = std::chrono::steady_clock::now();
  BoundResult out;
  out.order = d;
  out.scaling = opt.ranges.empty() ? Scaling::time_only(sys) : Scaling::from_ranges(sys, opt.ranges);
  out.internal = out.scaling.apply(sys);
  out.plan = plan(out.internal, d);
  const ConicProgram prog = assemble(out.internal, out.plan);
  out.setup_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out.solve = solve(prog, opt.solver);
  out.status = out.solve.status;
  // A primal-feasible moment point only bounds p*_d from below; the dual
  // objective is the side that bounds the peak from above.
  out.bound = std::max(out.solve.primal_value, out.solve.dual_value);
  out.message = out.solve.message;
  if (!out.solve.usable()) return out;

  Certificate c = extract_certificate(prog, out.solve, out.internal);
  Certificate orig = c;
  orig.v = out.scaling.to_original(c.v);
  out.certificate_internal = std::move(c);
  out.certificate = std::move(orig);

  RecoveredPoint rp = recover(prog, out.solve, out.internal, opt.rank_tol);
  if (!rp.x_star.empty()) {
    const VarLayout& L = sys.layout;
    auto to_orig = [&](const std::vector<double>& x, const std::vector<double>& th, double t) {
      std::vector<double> p(static_cast<std::size_t>(L.size()), 0.0);
      p[0] = t;
      std::copy(x.begin(), x.end(), p.begin() + 1);
      std::copy(th.begin(), th.end(), p.begin() + L.offset(Block::theta));
      return out.scaling.point_to_original(p);
    };
    const auto pk = to_orig(rp.x_star, rp.theta_star, rp.t_star.value_or(0.0));
    const auto p0 = to_orig(rp.x0_star, rp.theta_star, 0.0);
    if (rp.t_star) rp.t_star = pk[0];
    rp.x_star.assign(pk.begin() + 1, pk.begin() + 1 + L.nx);
    rp.x0_star.assign(p0.begin() + 1, p0.begin() + 1 + L.nx);
    rp.theta_star.assign(pk.begin() + L.offset(Block::theta), pk.begin() + L.offset(Block::theta) + L.ntheta);
  }
  out.recovered = std::move(rp);
  return out;
}

namespace {

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

std::vector<double> assemble_point(const VarLayout& L, double t, const std::vector<double>& x,
                                   const std::vector<double>& th, const std::vector<double>& w) {
  std::vector<double> p(static_cast<std::size_t>(L.size()), 0.0);
  p[0] = t;
  std::copy(x.begin(), x.end(), p.begin() + L.offset(Block::x));
  std::copy(th.begin(), th.end(), p.begin() + L.offset(Block::theta));
  std::copy(w.begin(), w.end(), p.begin() + L.offset(Block::w));
  return p;
}

}  // namespace

CertificateCheck check_certificate(const Certificate& cert, const UncertainSystem& internal, int samples,
                                   std::uint64_t seed) {
  const VarLayout& L = internal.layout;
  const bool continuous = internal.mode == Mode::continuous;
  const auto xbox = infer_box(internal.X, L);
  const SetSampler xs(internal.X, L, xbox);
  const SetSampler x0s(internal.X0, L, xbox);
  const SetSampler ths(internal.Theta, L);
  const SetSampler ws(internal.W, L);
  std::vector<Polynomial> lie;
  for (const auto& sub : internal.subsystems) {
    if (continuous) lie.push_back(lie_derivative(cert.v, sub.f));
  }
  Polynomial weighted(L);
  if (internal.objective_mode == ObjectiveMode::max) {
    weighted = internal.objectives.front();
  } else {
    for (std::size_t i = 0; i < internal.objectives.size() && i < cert.beta.size(); ++i) {
      weighted += scale(internal.objectives[i], cert.beta[i]);
    }
  }
  const double alpha = cert.alpha.value_or(0.0);

  CertificateCheck chk;
  chk.initial = chk.flow = chk.objective = -std::numeric_limits<double>::infinity();
  chk.samples = samples;
  auto rng = trajectory_rng(seed, 0);
  for (int s = 0; s < samples; ++s) {
    const auto th = ths.draw(rng);
    const auto x0 = x0s.draw(rng);
    chk.initial = std::max(chk.initial, cert.v.eval(assemble_point(L, 0.0, x0, th, {})) - cert.gamma);

    const double t = continuous ? uniform01(rng) : 0.0;
    const auto x = xs.draw(rng);
    const auto px = assemble_point(L, t, x, th, {});
    chk.objective = std::max(chk.objective, weighted.eval(px) - cert.v.eval(px));

    const std::size_t k = std::uniform_int_distribution<std::size_t>(0, internal.subsystems.size() - 1)(rng);
    const auto& sub = internal.subsystems[k];
    std::vector<double> xk = x;
    for (int tries = 0; !sub.region.is_full() && !membership(sub.region, L, xk) && tries < 10000; ++tries) {
      xk = xs.draw(rng);
    }
    if (!sub.region.is_full() && !membership(sub.region, L, xk)) continue;
    const auto w = ws.draw(rng);
    const auto pk = assemble_point(L, t, xk, th, w);
    if (continuous) {
      chk.flow = std::max(chk.flow, lie[k].eval(pk));
    } else {
      std::vector<double> next(static_cast<std::size_t>(L.nx));
      for (int i = 0; i < L.nx; ++i) next[static_cast<std::size_t>(i)] = sub.f[static_cast<std::size_t>(i)].eval(pk);
      const double vn = cert.v.eval(assemble_point(L, 0.0, next, th, {}));
      chk.flow = std::max(chk.flow, vn - cert.v.eval(pk) - alpha);
    }
  }
  return chk;
}

}  // namespace peakbound
