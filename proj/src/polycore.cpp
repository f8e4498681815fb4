#include "peakbound/polycore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace peakbound {

int VarLayout::block_size(Block b) const {
  switch (b) {
    case Block::t: return 1;
    case Block::x: return nx;
    case Block::theta: return ntheta;
    case Block::w: return nw;
  }
  return 0;
}

int VarLayout::offset(Block b) const {
  switch (b) {
    case Block::t: return 0;
    case Block::x: return 1;
    case Block::theta: return 1 + nx;
    case Block::w: return 1 + nx + ntheta;
  }
  return 0;
}

MultiIndex::MultiIndex(std::vector<int> exps) : e_(std::move(exps)) {
  for (int v : e_) {
    if (v < 0) throw PolyError("negative exponent in multi-index");
  }
}

int MultiIndex::degree() const { return std::accumulate(e_.begin(), e_.end(), 0); }

int MultiIndex::block_degree(const VarLayout& layout, Block b) const {
  const int off = layout.offset(b);
  int s = 0;
  for (int i = 0; i < layout.block_size(b); ++i) s += e_[static_cast<std::size_t>(off + i)];
  return s;
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const {
  if (o.size() != size()) throw PolyError("multi-index length mismatch");
  MultiIndex r(*this);
  for (std::size_t i = 0; i < e_.size(); ++i) r.e_[i] += o.e_[i];
  return r;
}

bool GradedLexLess::operator()(const MultiIndex& a, const MultiIndex& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return false;
}

std::size_t MultiIndexHash::operator()(const MultiIndex& m) const {
  std::size_t h = 1469598103934665603ull;
  for (int v : m.exponents()) {
    h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

Polynomial Polynomial::constant(VarLayout layout, double c) {
  Polynomial p(layout);
  p.add_term(MultiIndex(layout.size()), c);
  return p;
}

Polynomial Polynomial::variable(VarLayout layout, VarRef v) {
  if (v.index < 0 || v.index >= layout.block_size(v.block)) {
    throw PolyError("variable address out of range");
  }
  MultiIndex idx(layout.size());
  idx[layout.offset(v.block) + v.index] = 1;
  return monomial(layout, idx);
}

Polynomial Polynomial::monomial(VarLayout layout, const MultiIndex& idx, double c) {
  if (idx.size() != layout.size()) throw PolyError("monomial does not match layout");
  Polynomial p(layout);
  p.add_term(idx, c);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
  return d;
}

int Polynomial::block_degree(Block b) const {
  int d = 0;
  for (const auto& [m, c] : terms_) d = std::max(d, m.block_degree(layout_, b));
  return d;
}

double Polynomial::coefficient(const MultiIndex& idx) const {
  auto it = terms_.find(idx);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const MultiIndex& idx, double c) {
  if (idx.size() != layout_.size()) throw PolyError("term does not match layout");
  auto [it, inserted] = terms_.try_emplace(idx, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) < kPruneTol) terms_.erase(it);
}

double Polynomial::eval(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != layout_.size()) {
    throw PolyError("evaluation point has wrong dimension");
  }
  double s = 0.0;
  for (const auto& [m, c] : terms_) {
    double v = c;
    for (int i = 0; i < m.size(); ++i) {
      for (int k = 0; k < m[i]; ++k) v *= point[static_cast<std::size_t>(i)];
    }
    s += v;
  }
  return s;
}

Polynomial Polynomial::operator-() const { return scale(*this, -1.0); }

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (!(o.layout_ == layout_)) throw PolyError("dimension mismatch in add");
  for (const auto& [m, c] : o.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (!(o.layout_ == layout_)) throw PolyError("dimension mismatch in sub");
  for (const auto& [m, c] : o.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double c) {
  *this = scale(*this, c);
  return *this;
}

Polynomial add(const Polynomial& p, const Polynomial& q) {
  Polynomial r(p);
  r += q;
  return r;
}

Polynomial sub(const Polynomial& p, const Polynomial& q) {
  Polynomial r(p);
  r -= q;
  return r;
}

Polynomial mul(const Polynomial& p, const Polynomial& q) {
  if (!(p.layout() == q.layout())) throw PolyError("dimension mismatch in mul");
  Polynomial r(p.layout());
  for (const auto& [mp, cp] : p.terms()) {
    for (const auto& [mq, cq] : q.terms()) r.add_term(mp + mq, cp * cq);
  }
  return r;
}

Polynomial scale(const Polynomial& p, double c) {
  Polynomial r(p.layout());
  for (const auto& [m, v] : p.terms()) r.add_term(m, v * c);
  return r;
}

Polynomial pow(const Polynomial& p, int n) {
  if (n < 0) throw PolyError("negative polynomial power");
  Polynomial result = Polynomial::constant(p.layout(), 1.0);
  Polynomial base = p;
  while (n > 0) {
    if (n & 1) result = mul(result, base);
    n >>= 1;
    if (n > 0) base = mul(base, base);
  }
  return result;
}

Polynomial partial(const Polynomial& p, VarRef var) {
  const VarLayout& L = p.layout();
  if (var.index < 0 || var.index >= L.block_size(var.block)) {
    throw PolyError("invalid variable address for partial derivative");
  }
  const int pos = L.offset(var.block) + var.index;
  Polynomial r(L);
  for (const auto& [m, c] : p.terms()) {
    if (m[pos] == 0) continue;
    MultiIndex d = m;
    d[pos] -= 1;
    r.add_term(d, c * m[pos]);
  }
  return r;
}

Polynomial lie_derivative(const Polynomial& v, std::span<const Polynomial> f) {
  const VarLayout& L = v.layout();
  if (v.depends_on(Block::w)) throw PolyError("test function depends on w");
  if (static_cast<int>(f.size()) != L.nx) throw PolyError("vector field length differs from nx");
  Polynomial r = partial(v, {Block::t, 0});
  for (int i = 0; i < L.nx; ++i) {
    Polynomial dv = partial(v, {Block::x, i});
    if (dv.is_zero()) continue;
    r += mul(f[static_cast<std::size_t>(i)], dv);
  }
  return r;
}

Polynomial compose_monomial(const MultiIndex& idx, std::span<const Polynomial> f,
                            bool keep_theta) {
  if (f.empty()) throw PolyError("empty map in compose_monomial");
  const VarLayout& L = f[0].layout();
  if (static_cast<int>(f.size()) != L.nx) throw PolyError("map length differs from nx");
  if (idx.size() != L.size()) throw PolyError("multi-index does not match layout");
  if (idx.block_degree(L, Block::t) != 0 || idx.block_degree(L, Block::w) != 0) {
    throw PolyError("compose_monomial needs t and w exponents equal to zero");
  }
  Polynomial r = Polynomial::constant(L, 1.0);
  for (int i = 0; i < L.nx; ++i) {
    const int a = idx[L.offset(Block::x) + i];
    if (a > 0) r = mul(r, pow(f[static_cast<std::size_t>(i)], a));
  }
  if (keep_theta) {
    MultiIndex th(L.size());
    for (int l = 0; l < L.ntheta; ++l) {
      th[L.offset(Block::theta) + l] = idx[L.offset(Block::theta) + l];
    }
    r = mul(r, Polynomial::monomial(L, th));
  }
  return r;
}

Polynomial substitute(const Polynomial& p, std::span<const Polynomial> images) {
  if (static_cast<int>(images.size()) != p.layout().size()) {
    throw PolyError("substitute needs one image per variable");
  }
  const VarLayout target = images[0].layout();
  // Cache powers per variable; compositions are reused across many terms.
  std::vector<std::vector<Polynomial>> powers(images.size());
  auto power_of = [&](std::size_t var, int k) -> const Polynomial& {
    auto& cache = powers[var];
    if (cache.empty()) cache.push_back(Polynomial::constant(target, 1.0));
    while (static_cast<int>(cache.size()) <= k) cache.push_back(mul(cache.back(), images[var]));
    return cache[static_cast<std::size_t>(k)];
  };
  Polynomial r(target);
  for (const auto& [m, c] : p.terms()) {
    Polynomial term = Polynomial::constant(target, c);
    for (int i = 0; i < m.size(); ++i) {
      if (m[i] > 0) term = mul(term, power_of(static_cast<std::size_t>(i), m[i]));
    }
    r += term;
  }
  return r;
}

Polynomial embed(const Polynomial& p, VarLayout target) {
  const VarLayout& s = p.layout();
  if (target.nx < s.nx || target.ntheta < s.ntheta || target.nw < s.nw) {
    throw PolyError("embed target layout is smaller than source");
  }
  Polynomial r(target);
  for (const auto& [m, c] : p.terms()) {
    MultiIndex e(target.size());
    for (Block b : {Block::t, Block::x, Block::theta, Block::w}) {
      for (int i = 0; i < s.block_size(b); ++i) {
        e[target.offset(b) + i] = m[s.offset(b) + i];
      }
    }
    r.add_term(e, c);
  }
  return r;
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  const VarLayout& L = p.layout();
  auto name = [&](int pos) {
    if (pos == 0) return std::string("t");
    if (pos < L.offset(Block::theta)) return "x" + std::to_string(pos - L.offset(Block::x) + 1);
    if (pos < L.offset(Block::w)) return "th" + std::to_string(pos - L.offset(Block::theta) + 1);
    return "w" + std::to_string(pos - L.offset(Block::w) + 1);
  };
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << "-";
    first = false;
    const double a = std::abs(c);
    bool wrote = false;
    if (a != 1.0 || m.is_zero()) {
      os << a;
      wrote = true;
    }
    for (int i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      if (wrote) os << "*";
      os << name(i);
      if (m[i] > 1) os << "^" << m[i];
      wrote = true;
    }
  }
  return os.str();
}

}  // namespace peakbound
