#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace peakbound {

/// Variable blocks of every polynomial in the toolkit, in storage order:
/// time t, state x, time-independent parameters theta, disturbances w.
enum class Block { t, x, theta, w };

struct VarLayout {
  int nx = 0;
  int ntheta = 0;
  int nw = 0;

  int size() const { return 1 + nx + ntheta + nw; }
  int block_size(Block b) const;
  /// Flat position of the first variable of a block.
  int offset(Block b) const;
  friend bool operator==(const VarLayout&, const VarLayout&) = default;
};

/// Address of one scalar variable, e.g. {Block::x, 1} is x2.
struct VarRef {
  Block block;
  int index = 0;
};

class PolyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exponent vector over the flat variable list of a VarLayout.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(int nvars) : e_(static_cast<std::size_t>(nvars), 0) {}
  explicit MultiIndex(std::vector<int> exps);

  int size() const { return static_cast<int>(e_.size()); }
  int operator[](int i) const { return e_[static_cast<std::size_t>(i)]; }
  int& operator[](int i) { return e_[static_cast<std::size_t>(i)]; }
  int degree() const;
  bool is_zero() const { return degree() == 0; }
  const std::vector<int>& exponents() const { return e_; }

  /// Total degree restricted to one block.
  int block_degree(const VarLayout& layout, Block b) const;

  MultiIndex operator+(const MultiIndex& o) const;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

 private:
  std::vector<int> e_;
};

/// Graded lexicographic order: lower total degree first; within a degree
/// the index with the larger leading exponent comes first, so 1 < t < x1 < x2.
struct GradedLexLess {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const;
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const;
};

/// Sparse polynomial with real coefficients over a fixed VarLayout.
///
/// Stored coefficients are never zero: anything with magnitude below
/// kPruneTol after an arithmetic operation is dropped.
class Polynomial {
 public:
  static constexpr double kPruneTol = 1e-14;
  using TermMap = std::map<MultiIndex, double, GradedLexLess>;

  Polynomial() = default;
  explicit Polynomial(VarLayout layout) : layout_(layout) {}

  static Polynomial constant(VarLayout layout, double c);
  static Polynomial variable(VarLayout layout, VarRef v);
  static Polynomial monomial(VarLayout layout, const MultiIndex& idx,
                             double c = 1.0);

  const VarLayout& layout() const { return layout_; }
  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t num_terms() const { return terms_.size(); }
  int degree() const;
  /// Degree restricted to a block (max over terms).
  int block_degree(Block b) const;
  bool depends_on(Block b) const { return block_degree(b) > 0; }
  double coefficient(const MultiIndex& idx) const;

  /// Adds c to the coefficient of idx, pruning the term if it cancels.
  void add_term(const MultiIndex& idx, double c);

  /// Evaluates at a full point of length layout().size().
  double eval(std::span<const double> point) const;

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double c);

  friend bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.layout_ == b.layout_ && a.terms_ == b.terms_;
  }

 private:
  VarLayout layout_;
  TermMap terms_;
};

Polynomial add(const Polynomial& p, const Polynomial& q);
Polynomial sub(const Polynomial& p, const Polynomial& q);
Polynomial mul(const Polynomial& p, const Polynomial& q);
Polynomial scale(const Polynomial& p, double c);
Polynomial pow(const Polynomial& p, int n);

inline Polynomial operator+(const Polynomial& p, const Polynomial& q) { return add(p, q); }
inline Polynomial operator-(const Polynomial& p, const Polynomial& q) { return sub(p, q); }
inline Polynomial operator*(const Polynomial& p, const Polynomial& q) { return mul(p, q); }
inline Polynomial operator*(double c, const Polynomial& p) { return scale(p, c); }
inline Polynomial operator*(const Polynomial& p, double c) { return scale(p, c); }

/// Formal partial derivative.
Polynomial partial(const Polynomial& p, VarRef var);

/// d/dt v + sum_i f_i d/dx_i v. v must not depend on w.
Polynomial lie_derivative(const Polynomial& v, std::span<const Polynomial> f);

/// prod_i f_i^alpha_i (times theta^gamma when keep_theta), the image of the
/// test monomial x^alpha theta^gamma under the map x -> f(x, theta, w).
/// The t and w exponents of idx must be zero.
Polynomial compose_monomial(const MultiIndex& idx, std::span<const Polynomial> f,
                            bool keep_theta);

/// Substitutes every variable: variable j is replaced by images[j]. All
/// images share one target layout, which becomes the layout of the result.
Polynomial substitute(const Polynomial& p, std::span<const Polynomial> images);

/// Re-expresses p over a layout with larger (or equal) blocks by zero padding.
Polynomial embed(const Polynomial& p, VarLayout target);

std::string to_string(const Polynomial& p);

}  // namespace peakbound
