#include "peakbound/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace peakbound {

Block block_of(SetLabel label) {
  switch (label) {
    case SetLabel::X:
    case SetLabel::X0:
    case SetLabel::Xk: return Block::x;
    case SetLabel::Theta: return Block::theta;
    case SetLabel::W: return Block::w;
  }
  return Block::x;
}

std::string to_string(SetLabel label) {
  switch (label) {
    case SetLabel::X: return "X";
    case SetLabel::X0: return "X0";
    case SetLabel::Xk: return "Xk";
    case SetLabel::Theta: return "Theta";
    case SetLabel::W: return "W";
  }
  return "?";
}

std::vector<int> SemialgebraicSet::degrees() const {
  std::vector<int> d;
  d.reserve(constraints.size());
  for (const auto& g : constraints) d.push_back(g.degree());
  return d;
}

bool membership(const SemialgebraicSet& set, const VarLayout& layout,
                std::span<const double> point, double tol) {
  const Block b = block_of(set.label);
  if (static_cast<int>(point.size()) != layout.block_size(b)) {
    throw PolyError("membership point dimension does not match set block");
  }
  std::vector<double> full(static_cast<std::size_t>(layout.size()), 0.0);
  for (std::size_t i = 0; i < point.size(); ++i) {
    full[static_cast<std::size_t>(layout.offset(b)) + i] = point[i];
  }
  for (const auto& g : set.constraints) {
    if (g.eval(full) < -tol) return false;
  }
  return true;
}

SemialgebraicSet interval_box_set(const VarLayout& layout, std::span<const double> lo,
                                  std::span<const double> hi, SetLabel label) {
  const Block b = block_of(label);
  if (lo.size() != hi.size() || static_cast<int>(lo.size()) != layout.block_size(b)) {
    throw PolyError("box bounds do not match block size");
  }
  SemialgebraicSet s{label, -1, {}};
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] > hi[i]) throw PolyError("box lower bound exceeds upper bound");
    const Polynomial z = Polynomial::variable(layout, {b, static_cast<int>(i)});
    const Polynomial one = Polynomial::constant(layout, 1.0);
    s.constraints.push_back(mul(z - lo[i] * one, hi[i] * one - z));
  }
  return s;
}

SemialgebraicSet ball_set(const VarLayout& layout, std::span<const double> center, double r2,
                          SetLabel label) {
  const Block b = block_of(label);
  if (static_cast<int>(center.size()) != layout.block_size(b)) {
    throw PolyError("ball center does not match block size");
  }
  Polynomial g = Polynomial::constant(layout, r2);
  for (std::size_t i = 0; i < center.size(); ++i) {
    const Polynomial z = Polynomial::variable(layout, {b, static_cast<int>(i)}) -
                         Polynomial::constant(layout, center[i]);
    g -= mul(z, z);
  }
  return SemialgebraicSet{label, -1, {g}};
}

std::optional<std::vector<std::pair<double, double>>> infer_box(const SemialgebraicSet& set,
                                                                const VarLayout& layout) {
  const Block b = block_of(set.label);
  const int n = layout.block_size(b);
  std::vector<std::optional<std::pair<double, double>>> found(static_cast<std::size_t>(n));
  for (const auto& g : set.constraints) {
    // Looking for -z^2 + (lo+hi) z - lo*hi with a single variable.
    int var = -1;
    bool ok = g.degree() == 2;
    for (const auto& [m, c] : g.terms()) {
      for (int i = 0; i < m.size() && ok; ++i) {
        if (m[i] == 0) continue;
        const int local = i - layout.offset(b);
        if (local < 0 || local >= n) ok = false;
        else if (var == -1) var = local;
        else if (var != local) ok = false;
      }
    }
    if (!ok || var < 0) continue;
    MultiIndex sq(layout.size()), lin(layout.size());
    sq[layout.offset(b) + var] = 2;
    lin[layout.offset(b) + var] = 1;
    const double a = -g.coefficient(sq);
    if (a <= 0) continue;
    const double s = g.coefficient(lin) / a;
    const double p = -g.coefficient(MultiIndex(layout.size())) / a;
    const double disc = s * s - 4 * p;
    if (disc < -1e-12) continue;
    const double r = std::sqrt(std::max(0.0, disc));
    const std::pair<double, double> iv{(s - r) / 2, (s + r) / 2};
    auto& slot = found[static_cast<std::size_t>(var)];
    if (!slot) slot = iv;
    else slot = std::pair{std::max(slot->first, iv.first), std::min(slot->second, iv.second)};
  }
  std::vector<std::pair<double, double>> box;
  for (const auto& f : found) {
    if (!f) return std::nullopt;
    box.push_back(*f);
  }
  return box;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags) {
    if (d.severity == Severity::error) return true;
  }
  return false;
}

namespace {

void check_set(const SemialgebraicSet& s, const VarLayout& L, std::vector<Diagnostic>& out) {
  const Block own = block_of(s.label);
  const std::string name = s.label == SetLabel::Xk
                               ? "X" + std::to_string(s.subsystem + 1)
                               : to_string(s.label);
  for (std::size_t i = 0; i < s.constraints.size(); ++i) {
    const auto& g = s.constraints[i];
    const std::string where = name + " constraint " + std::to_string(i + 1);
    if (!(g.layout() == L)) {
      out.push_back({Severity::error, "layout", where + " has a different variable layout"});
      continue;
    }
    if (g.is_zero()) out.push_back({Severity::error, "zero_constraint", where + " is zero"});
    for (Block b : {Block::t, Block::x, Block::theta, Block::w}) {
      if (b != own && g.depends_on(b)) {
        out.push_back({Severity::error, "block_usage", where + " uses a foreign variable block"});
        break;
      }
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate(const UncertainSystem& sys) {
  std::vector<Diagnostic> out;
  const VarLayout& L = sys.layout;
  if (L.nx <= 0) out.push_back({Severity::error, "dims", "nx must be positive"});
  if (L.ntheta < 0 || L.nw < 0) out.push_back({Severity::error, "dims", "negative block size"});
  if (!(sys.horizon > 0) || !std::isfinite(sys.horizon)) {
    out.push_back({Severity::error, "horizon", "horizon must be positive and finite"});
  } else if (sys.mode == Mode::discrete && std::floor(sys.horizon) != sys.horizon) {
    out.push_back({Severity::error, "horizon", "discrete horizon must be an integer"});
  }
  if (!out.empty()) return out;

  check_set(sys.X, L, out);
  check_set(sys.X0, L, out);
  check_set(sys.Theta, L, out);
  check_set(sys.W, L, out);
  if (L.ntheta == 0 && !sys.Theta.is_full()) {
    out.push_back({Severity::error, "theta", "Theta has constraints but ntheta = 0"});
  }
  if (L.nw == 0 && !sys.W.is_full()) {
    out.push_back({Severity::error, "w", "W has constraints but nw = 0"});
  }
  if (sys.X0.is_full()) {
    out.push_back({Severity::warning, "x0_unbounded", "X0 has no constraints"});
  }

  if (sys.subsystems.empty()) out.push_back({Severity::error, "subsystems", "no subsystems"});
  for (std::size_t k = 0; k < sys.subsystems.size(); ++k) {
    const auto& s = sys.subsystems[k];
    const std::string where = "subsystem " + std::to_string(k + 1);
    if (static_cast<int>(s.f.size()) != L.nx) {
      out.push_back({Severity::error, "f_length", where + " has wrong number of components"});
      continue;
    }
    for (const auto& fi : s.f) {
      if (!(fi.layout() == L)) {
        out.push_back({Severity::error, "layout", where + " has a different variable layout"});
        break;
      }
      if (sys.mode == Mode::discrete && fi.depends_on(Block::t)) {
        out.push_back({Severity::error, "discrete_time", where + " depends on t in discrete mode"});
        break;
      }
    }
    if (s.region.label != SetLabel::Xk) {
      out.push_back({Severity::error, "region_label", where + " region must be labelled Xk"});
    }
    check_set(s.region, L, out);
  }

  if (sys.objectives.empty()) out.push_back({Severity::error, "objectives", "no objectives"});
  if (sys.objective_mode == ObjectiveMode::max && sys.objectives.size() > 1) {
    out.push_back({Severity::error, "objectives", "max mode takes exactly one objective"});
  }
  for (std::size_t i = 0; i < sys.objectives.size(); ++i) {
    const auto& p = sys.objectives[i];
    const std::string where = "objective " + std::to_string(i + 1);
    if (!(p.layout() == L)) {
      out.push_back({Severity::error, "layout", where + " has a different variable layout"});
      continue;
    }
    if (p.depends_on(Block::t) || p.depends_on(Block::theta) || p.depends_on(Block::w)) {
      out.push_back({Severity::error, "objective_block", where + " must depend on x only"});
    }
  }
  return out;
}

Scaling::Scaling(const UncertainSystem& sys, std::vector<double> center,
                 std::vector<double> halfwidth)
    : layout_(sys.layout),
      continuous_(sys.mode == Mode::continuous),
      time_factor_(sys.mode == Mode::continuous ? sys.horizon : 1.0),
      center_(std::move(center)),
      halfwidth_(std::move(halfwidth)) {
  if (static_cast<int>(center_.size()) != layout_.nx ||
      static_cast<int>(halfwidth_.size()) != layout_.nx) {
    throw PolyError("scaling vectors must have length nx");
  }
  for (double h : halfwidth_) {
    if (!(h > 0)) throw PolyError("scaling half-widths must be positive");
  }
  const auto np = static_cast<std::size_t>(layout_.ntheta + layout_.nw);
  param_center_.assign(np, 0.0);
  param_half_.assign(np, 1.0);
}

Scaling Scaling::time_only(const UncertainSystem& sys) {
  return Scaling(sys, std::vector<double>(static_cast<std::size_t>(sys.layout.nx), 0.0),
                 std::vector<double>(static_cast<std::size_t>(sys.layout.nx), 1.0));
}

Scaling Scaling::from_ranges(const UncertainSystem& sys,
                             std::span<const std::pair<double, double>> ranges) {
  if (static_cast<int>(ranges.size()) != sys.layout.nx) {
    throw PolyError("state ranges must have length nx");
  }
  std::vector<double> c, h;
  for (const auto& [lo, hi] : ranges) {
    if (!(hi > lo)) throw PolyError("empty state range");
    c.push_back(0.5 * (lo + hi));
    h.push_back(0.5 * (hi - lo));
  }
  Scaling out(sys, std::move(c), std::move(h));
  std::size_t k = 0;
  for (const auto* set : {&sys.Theta, &sys.W}) {
    const int n = set == &sys.Theta ? sys.layout.ntheta : sys.layout.nw;
    if (const auto box = infer_box(*set, sys.layout)) {
      for (int i = 0; i < n; ++i) {
        const auto [lo, hi] = (*box)[static_cast<std::size_t>(i)];
        if (hi > lo) {
          out.param_center_[k + static_cast<std::size_t>(i)] = 0.5 * (lo + hi);
          out.param_half_[k + static_cast<std::size_t>(i)] = 0.5 * (hi - lo);
        }
      }
    }
    k += static_cast<std::size_t>(n);
  }
  return out;
}

Polynomial Scaling::to_internal(const Polynomial& p) const {
  const VarLayout& L = layout_;
  std::vector<Polynomial> images;
  images.reserve(static_cast<std::size_t>(L.size()));
  images.push_back(scale(Polynomial::variable(L, {Block::t, 0}), time_factor_));
  for (int i = 0; i < L.nx; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    images.push_back(Polynomial::constant(L, center_[ui]) +
                     halfwidth_[ui] * Polynomial::variable(L, {Block::x, i}));
  }
  for (int k = 0; k < L.ntheta + L.nw; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const VarRef v = k < L.ntheta ? VarRef{Block::theta, k} : VarRef{Block::w, k - L.ntheta};
    images.push_back(Polynomial::constant(L, param_center_[uk]) +
                     param_half_[uk] * Polynomial::variable(L, v));
  }
  return substitute(p, images);
}

Polynomial Scaling::to_original(const Polynomial& p) const {
  const VarLayout& L = layout_;
  std::vector<Polynomial> images;
  images.reserve(static_cast<std::size_t>(L.size()));
  images.push_back(scale(Polynomial::variable(L, {Block::t, 0}), 1.0 / time_factor_));
  for (int i = 0; i < L.nx; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    images.push_back((1.0 / halfwidth_[ui]) *
                     (Polynomial::variable(L, {Block::x, i}) -
                      Polynomial::constant(L, center_[ui])));
  }
  for (int k = 0; k < L.ntheta + L.nw; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const VarRef v = k < L.ntheta ? VarRef{Block::theta, k} : VarRef{Block::w, k - L.ntheta};
    images.push_back((1.0 / param_half_[uk]) *
                     (Polynomial::variable(L, v) - Polynomial::constant(L, param_center_[uk])));
  }
  return substitute(p, images);
}

std::vector<double> Scaling::point_to_internal(std::span<const double> point) const {
  std::vector<double> r(point.begin(), point.end());
  r[0] /= time_factor_;
  for (int i = 0; i < layout_.nx; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    r[ui + 1] = (r[ui + 1] - center_[ui]) / halfwidth_[ui];
  }
  const auto off = static_cast<std::size_t>(layout_.nx + 1);
  for (std::size_t k = 0; k < param_half_.size(); ++k) {
    r[off + k] = (r[off + k] - param_center_[k]) / param_half_[k];
  }
  return r;
}

std::vector<double> Scaling::point_to_original(std::span<const double> point) const {
  std::vector<double> r(point.begin(), point.end());
  r[0] *= time_factor_;
  for (int i = 0; i < layout_.nx; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    r[ui + 1] = center_[ui] + halfwidth_[ui] * r[ui + 1];
  }
  const auto off = static_cast<std::size_t>(layout_.nx + 1);
  for (std::size_t k = 0; k < param_half_.size(); ++k) {
    r[off + k] = param_center_[k] + param_half_[k] * r[off + k];
  }
  return r;
}

UncertainSystem Scaling::apply(const UncertainSystem& sys) const {
  UncertainSystem out = sys;
  // Positive rescaling of a constraint leaves its set unchanged and keeps
  // localizing matrices well scaled.
  auto map_set = [&](SemialgebraicSet& s) {
    for (auto& g : s.constraints) {
      g = to_internal(g);
      double mx = 0.0;
      for (const auto& [m, c] : g.terms()) mx = std::max(mx, std::abs(c));
      if (mx > 0.0) g = scale(g, 1.0 / mx);
    }
  };
  map_set(out.X);
  map_set(out.X0);
  map_set(out.Theta);
  map_set(out.W);
  for (auto& p : out.objectives) p = to_internal(p);
  for (auto& sub : out.subsystems) {
    map_set(sub.region);
    for (int i = 0; i < layout_.nx; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Polynomial fi = to_internal(sub.f[ui]);
      if (continuous_) {
        fi = scale(fi, time_factor_ / halfwidth_[ui]);
      } else {
        fi = scale(fi - Polynomial::constant(layout_, center_[ui]), 1.0 / halfwidth_[ui]);
      }
      sub.f[ui] = std::move(fi);
    }
  }
  if (continuous_) out.horizon = 1.0;
  return out;
}

}  // namespace peakbound
