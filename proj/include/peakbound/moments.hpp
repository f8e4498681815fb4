#pragma once

#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "peakbound/polycore.hpp"

namespace peakbound {

/// All monomials over the active blocks with total degree <= max_degree, in
/// graded-lex order. Because the order is graded, the monomials of degree
/// <= r form a prefix of length binom(n + r, r).
class MonomialBasis {
 public:
  MonomialBasis(VarLayout layout, std::vector<Block> blocks, int max_degree);

  const VarLayout& layout() const { return layout_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  int max_degree() const { return max_degree_; }
  int num_vars() const { return static_cast<int>(active_.size()); }
  /// Flat layout positions of the active variables, in order.
  const std::vector<int>& active_positions() const { return active_; }

  int size() const { return static_cast<int>(monomials_.size()); }
  const MultiIndex& at(int i) const { return monomials_[static_cast<std::size_t>(i)]; }
  std::optional<int> find(const MultiIndex& m) const;
  /// Throws if m is outside the basis.
  int index_of(const MultiIndex& m) const;
  int count_up_to(int degree) const;

  bool uses_only_active(const Polynomial& p) const;
  bool has_block(Block b) const;

 private:
  VarLayout layout_;
  std::vector<Block> blocks_;
  int max_degree_ = 0;
  std::vector<int> active_;
  std::vector<MultiIndex> monomials_;
  std::unordered_map<MultiIndex, int, MultiIndexHash> index_;
};

std::size_t binomial(int n, int k);

/// Truncated moment sequence of one measure.
struct MomentVector {
  std::shared_ptr<const MonomialBasis> basis;
  Eigen::VectorXd values;

  int truncation_degree() const { return basis->max_degree(); }
  double operator[](const MultiIndex& m) const { return values[basis->index_of(m)]; }
};

struct LinearTerm {
  int index = 0;  // moment index within the measure's basis
  double coef = 0.0;
};
using LinearForm = std::vector<LinearTerm>;

/// Symmetric matrix whose entries are linear forms in one measure's moments.
struct MatrixSpec {
  enum class Kind { moment, localizing };
  Kind kind = Kind::moment;
  int order = 0;
  int side = 0;
  std::vector<LinearForm> entries;  // row-major, side * side

  const LinearForm& entry(int a, int b) const {
    return entries[static_cast<std::size_t>(a) * static_cast<std::size_t>(side) +
                   static_cast<std::size_t>(b)];
  }
  Eigen::MatrixXd instantiate(const Eigen::VectorXd& moments) const;
};

/// sum_alpha p_alpha y_alpha.
double riesz(const Polynomial& p, const MomentVector& y);
/// The same functional as a sparse linear form on the basis.
LinearForm riesz_form(const Polynomial& p, const MonomialBasis& basis);

/// M_r(y): entry (a, b) = y_{a+b} over basis monomials of degree <= r.
MatrixSpec moment_matrix_spec(const MonomialBasis& basis, int order);

/// M_{r - ceil(deg g / 2)}(g y). Throws if the reduced order is negative.
MatrixSpec localizing_matrix_spec(const Polynomial& g, const MonomialBasis& basis,
                                  int parent_order);
/// Localizing matrix at an explicitly chosen order; returns nullopt when the
/// order is negative.
std::optional<MatrixSpec> localizing_matrix_at_order(const Polynomial& g,
                                                     const MonomialBasis& basis, int order);

/// Moments of the Dirac measure at `point` (one value per active variable).
MomentVector dirac_moments(std::span<const double> point,
                           std::shared_ptr<const MonomialBasis> basis);

/// Weighted sum of Dirac moments: y_alpha = sum_j w_j z_j^alpha. Each sample
/// holds one value per active variable.
MomentVector empirical_occupation_moments(std::span<const std::vector<double>> samples,
                                          std::span<const double> weights,
                                          std::shared_ptr<const MonomialBasis> basis);

/// Accumulates w * z^alpha into an existing moment vector (z over active vars).
void accumulate_dirac(Eigen::VectorXd& values, const MonomialBasis& basis,
                      std::span<const double> point, double weight);

}  // namespace peakbound
