#pragma once

#include <random>
#include <vector>

#include "peakbound/model.hpp"
#include "peakbound/polycore.hpp"

namespace peakbound::testing {

/// Random polynomial with up to `terms` terms of total degree <= deg.
/// Blocks flagged false in `use` get zero exponents.
inline Polynomial random_poly(std::mt19937_64& rng, VarLayout lay, int deg, int terms,
                              std::vector<bool> use = {}) {
  if (use.empty()) use.assign(static_cast<std::size_t>(lay.size()), true);
  std::uniform_int_distribution<int> pick(0, lay.size() - 1);
  std::uniform_int_distribution<int> tdeg(0, deg);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Polynomial p(lay);
  for (int k = 0; k < terms; ++k) {
    MultiIndex idx(lay.size());
    const int target = tdeg(rng);
    for (int s = 0; s < target; ++s) {
      const int v = pick(rng);
      if (use[static_cast<std::size_t>(v)]) idx[v] += 1;
    }
    p.add_term(idx, coef(rng));
  }
  return p;
}

inline std::vector<double> random_point(std::mt19937_64& rng, int n, double lo = -1.0,
                                        double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> z(static_cast<std::size_t>(n));
  for (auto& v : z) v = u(rng);
  return z;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

/// x1' = -0.5 x1 - (0.5 + w) x2 + 0.5, x2' = -0.5 x2 + 1 + th on [-3,3]^2,
/// started in the ball of radius 0.5 about (-1,-1), objective x1.
inline UncertainSystem flow_system(double theta_half, double horizon = 10.0) {
  UncertainSystem s;
  s.name = "flow";
  s.layout = {2, theta_half > 0 ? 1 : 0, 1};
  const VarLayout L = s.layout;
  auto x = [&](int i) { return Polynomial::variable(L, {Block::x, i}); };
  auto c = [&](double v) { return Polynomial::constant(L, v); };
  const Polynomial w = Polynomial::variable(L, {Block::w, 0});
  s.horizon = horizon;
  const double lo[] = {-3, -3}, hi[] = {3, 3}, ctr[] = {-1, -1};
  s.X = interval_box_set(L, lo, hi, SetLabel::X);
  s.X0 = ball_set(L, ctr, 0.25, SetLabel::X0);
  const double wl[] = {-0.2}, wh[] = {0.2};
  s.W = interval_box_set(L, wl, wh, SetLabel::W);
  Polynomial f2 = c(-0.5) * x(1) + c(1.0);
  if (L.ntheta > 0) {
    const double tl[] = {-theta_half}, th[] = {theta_half};
    s.Theta = interval_box_set(L, tl, th, SetLabel::Theta);
    f2 += Polynomial::variable(L, {Block::theta, 0});
  }
  Subsystem sub;
  sub.f = {c(-0.5) * x(0) - (c(0.5) + w) * x(1) + c(0.5), f2};
  sub.region = {SetLabel::Xk, 0, {}};
  s.subsystems = {sub};
  s.objectives = {x(0)};
  return s;
}

}  // namespace peakbound::testing
