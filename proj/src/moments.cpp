#include "peakbound/moments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace peakbound {

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

MonomialBasis::MonomialBasis(VarLayout layout, std::vector<Block> blocks, int max_degree)
    : layout_(layout), blocks_(std::move(blocks)), max_degree_(max_degree) {
  if (max_degree < 0) throw PolyError("negative basis degree");
  for (Block b : {Block::t, Block::x, Block::theta, Block::w}) {
    if (std::find(blocks_.begin(), blocks_.end(), b) == blocks_.end()) continue;
    for (int i = 0; i < layout_.block_size(b); ++i) active_.push_back(layout_.offset(b) + i);
  }
  const int n = num_vars();
  monomials_.reserve(binomial(n + max_degree, max_degree));
  std::vector<int> local(static_cast<std::size_t>(n), 0);
  // Within a degree, larger leading exponents first.
  std::function<void(int, int)> gen = [&](int pos, int remaining) {
    if (pos == n - 1 || n == 0) {
      if (n > 0) local[static_cast<std::size_t>(pos)] = remaining;
      else if (remaining != 0) return;
      MultiIndex m(layout_.size());
      for (int i = 0; i < n; ++i) m[active_[static_cast<std::size_t>(i)]] = local[static_cast<std::size_t>(i)];
      monomials_.push_back(std::move(m));
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      local[static_cast<std::size_t>(pos)] = e;
      gen(pos + 1, remaining - e);
    }
  };
  for (int d = 0; d <= max_degree; ++d) {
    if (n == 0 && d > 0) break;
    gen(0, d);
  }
  for (int i = 0; i < size(); ++i) index_.emplace(monomials_[static_cast<std::size_t>(i)], i);
}

std::optional<int> MonomialBasis::find(const MultiIndex& m) const {
  auto it = index_.find(m);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int MonomialBasis::index_of(const MultiIndex& m) const {
  auto it = index_.find(m);
  if (it == index_.end()) throw PolyError("monomial outside the moment basis");
  return it->second;
}

int MonomialBasis::count_up_to(int degree) const {
  if (degree < 0) return 0;
  return static_cast<int>(binomial(num_vars() + std::min(degree, max_degree_), std::min(degree, max_degree_)));
}

bool MonomialBasis::has_block(Block b) const {
  return std::find(blocks_.begin(), blocks_.end(), b) != blocks_.end();
}

bool MonomialBasis::uses_only_active(const Polynomial& p) const {
  for (Block b : {Block::t, Block::x, Block::theta, Block::w}) {
    if (!has_block(b) && p.depends_on(b)) return false;
  }
  return true;
}

Eigen::MatrixXd MatrixSpec::instantiate(const Eigen::VectorXd& moments) const {
  Eigen::MatrixXd M(side, side);
  for (int a = 0; a < side; ++a) {
    for (int b = 0; b < side; ++b) {
      double s = 0.0;
      for (const auto& t : entry(a, b)) s += t.coef * moments[t.index];
      M(a, b) = s;
    }
  }
  return M;
}

LinearForm riesz_form(const Polynomial& p, const MonomialBasis& basis) {
  if (!basis.uses_only_active(p)) throw PolyError("polynomial uses blocks outside the measure");
  if (p.degree() > basis.max_degree()) throw PolyError("polynomial degree exceeds moment truncation");
  LinearForm f;
  f.reserve(p.num_terms());
  for (const auto& [m, c] : p.terms()) f.push_back({basis.index_of(m), c});
  return f;
}

double riesz(const Polynomial& p, const MomentVector& y) {
  double s = 0.0;
  for (const auto& t : riesz_form(p, *y.basis)) s += t.coef * y.values[t.index];
  return s;
}

namespace {

MatrixSpec build_spec(const Polynomial* g, const MonomialBasis& basis, int order) {
  MatrixSpec spec;
  spec.kind = g ? MatrixSpec::Kind::localizing : MatrixSpec::Kind::moment;
  spec.order = order;
  spec.side = basis.count_up_to(order);
  const int gdeg = g ? g->degree() : 0;
  if (2 * order + gdeg > basis.max_degree()) {
    throw PolyError("matrix order exceeds the moment truncation");
  }
  spec.entries.resize(static_cast<std::size_t>(spec.side) * static_cast<std::size_t>(spec.side));
  for (int a = 0; a < spec.side; ++a) {
    for (int b = a; b < spec.side; ++b) {
      const MultiIndex ab = basis.at(a) + basis.at(b);
      LinearForm form;
      if (g) {
        for (const auto& [m, c] : g->terms()) form.push_back({basis.index_of(ab + m), c});
      } else {
        form.push_back({basis.index_of(ab), 1.0});
      }
      const std::size_t s = static_cast<std::size_t>(spec.side);
      spec.entries[static_cast<std::size_t>(a) * s + static_cast<std::size_t>(b)] = form;
      spec.entries[static_cast<std::size_t>(b) * s + static_cast<std::size_t>(a)] = std::move(form);
    }
  }
  return spec;
}

}  // namespace

MatrixSpec moment_matrix_spec(const MonomialBasis& basis, int order) {
  if (order < 0) throw PolyError("negative moment matrix order");
  return build_spec(nullptr, basis, order);
}

std::optional<MatrixSpec> localizing_matrix_at_order(const Polynomial& g,
                                                     const MonomialBasis& basis, int order) {
  if (order < 0) return std::nullopt;
  if (!basis.uses_only_active(g)) throw PolyError("localizing polynomial uses inactive blocks");
  return build_spec(&g, basis, order);
}

MatrixSpec localizing_matrix_spec(const Polynomial& g, const MonomialBasis& basis,
                                  int parent_order) {
  const int reduced = parent_order - (g.degree() + 1) / 2;
  if (reduced < 0) throw PolyError("constraint degree exceeds relaxation order");
  return *localizing_matrix_at_order(g, basis, reduced);
}

void accumulate_dirac(Eigen::VectorXd& values, const MonomialBasis& basis,
                      std::span<const double> point, double weight) {
  if (static_cast<int>(point.size()) != basis.num_vars()) {
    throw PolyError("point dimension does not match measure blocks");
  }
  const auto& act = basis.active_positions();
  // Each monomial is a lower-degree monomial times one variable; graded order
  // guarantees the parent is already filled in.
  std::vector<double> pw(static_cast<std::size_t>(basis.size()));
  pw[0] = 1.0;
  for (int i = 1; i < basis.size(); ++i) {
    MultiIndex m = basis.at(i);
    int var = 0;
    while (m[act[static_cast<std::size_t>(var)]] == 0) ++var;
    m[act[static_cast<std::size_t>(var)]] -= 1;
    pw[static_cast<std::size_t>(i)] =
        pw[static_cast<std::size_t>(basis.index_of(m))] * point[static_cast<std::size_t>(var)];
  }
  for (int i = 0; i < basis.size(); ++i) values[i] += weight * pw[static_cast<std::size_t>(i)];
}

MomentVector dirac_moments(std::span<const double> point,
                           std::shared_ptr<const MonomialBasis> basis) {
  MomentVector y{basis, Eigen::VectorXd::Zero(basis->size())};
  accumulate_dirac(y.values, *basis, point, 1.0);
  return y;
}

MomentVector empirical_occupation_moments(std::span<const std::vector<double>> samples,
                                          std::span<const double> weights,
                                          std::shared_ptr<const MonomialBasis> basis) {
  if (samples.size() != weights.size()) throw PolyError("samples and weights differ in length");
  MomentVector y{basis, Eigen::VectorXd::Zero(basis->size())};
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (weights[j] < 0) throw PolyError("negative quadrature weight");
    accumulate_dirac(y.values, *basis, samples[j], weights[j]);
  }
  return y;
}

}  // namespace peakbound
