#include "peakbound/kernels.hpp"

#include <omp.h>

namespace peakbound {

HankelBlock make_hankel_block(const PsdBlock& blk, const MonomialBasis& basis) {
  HankelBlock hb;
  hb.side = blk.side();
  hb.base_size = basis.count_up_to(2 * blk.order);
  const int n = hb.side;
  hb.sum_index.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      const int idx = basis.index_of(basis.at(a) + basis.at(b));
      hb.sum_index[static_cast<std::size_t>(a * n + b)] = idx;
      hb.sum_index[static_cast<std::size_t>(b * n + a)] = idx;
    }
  }
  for (std::size_t j = 0; j < blk.loc_monomials.size(); ++j) {
    std::vector<int> shift(static_cast<std::size_t>(hb.base_size));
    for (int i = 0; i < hb.base_size; ++i) {
      shift[static_cast<std::size_t>(i)] = basis.index_of(basis.at(i) + blk.loc_monomials[j]);
    }
    hb.shifts.push_back(std::move(shift));
    hb.coefs.push_back(blk.loc_coefs[j]);
  }
  std::vector<int> count(static_cast<std::size_t>(hb.base_size) + 1, 0);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) ++count[static_cast<std::size_t>(hb.sum_index[static_cast<std::size_t>(a * n + b)]) + 1];
  }
  for (int i = 0; i < hb.base_size; ++i) count[static_cast<std::size_t>(i) + 1] += count[static_cast<std::size_t>(i)];
  hb.pair_start = count;
  hb.pair_a.resize(static_cast<std::size_t>(count.back()));
  hb.pair_b.resize(static_cast<std::size_t>(count.back()));
  std::vector<int> fill(count.begin(), count.end() - 1);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      const int i = hb.sum_index[static_cast<std::size_t>(a * n + b)];
      const int at = fill[static_cast<std::size_t>(i)]++;
      hb.pair_a[static_cast<std::size_t>(at)] = a;
      hb.pair_b[static_cast<std::size_t>(at)] = b;
    }
  }
  return hb;
}

Eigen::MatrixXd hankel_apply(const HankelBlock& hb, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const int n = hb.side;
  Eigen::VectorXd base = Eigen::VectorXd::Zero(hb.base_size);
  for (std::size_t j = 0; j < hb.coefs.size(); ++j) {
    const auto& sh = hb.shifts[j];
    for (int i = 0; i < hb.base_size; ++i) base[i] += hb.coefs[j] * y[sh[static_cast<std::size_t>(i)]];
  }
  Eigen::MatrixXd F(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) F(a, b) = base[hb.sum_index[static_cast<std::size_t>(a * n + b)]];
  }
  return F;
}

void hankel_adjoint(const HankelBlock& hb, const Eigen::MatrixXd& X,
                    Eigen::Ref<Eigen::VectorXd> out) {
  const int n = hb.side;
  Eigen::VectorXd base = Eigen::VectorXd::Zero(hb.base_size);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) base[hb.sum_index[static_cast<std::size_t>(a * n + b)]] += X(a, b);
  }
  for (std::size_t j = 0; j < hb.coefs.size(); ++j) {
    const auto& sh = hb.shifts[j];
    for (int i = 0; i < hb.base_size; ++i) out[sh[static_cast<std::size_t>(i)]] += hb.coefs[j] * base[i];
  }
}

void schur_reference(const PsdBlock& blk, const Eigen::MatrixXd& W, Eigen::Ref<Eigen::MatrixXd> H) {
  struct Pos {
    int r, c, idx;
    double coef;
  };
  std::vector<Pos> pos;
  const int n = blk.side();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (const auto& t : blk.spec.entry(r, c)) pos.push_back({r, c, t.index, t.coef});
    }
  }
  for (const auto& p : pos) {
    for (const auto& q : pos) {
      H(p.idx, q.idx) += p.coef * q.coef * W(p.r, q.r) * W(q.c, p.c);
    }
  }
}

namespace {

// N_ij = sum over a+b = i, c+d = j of W_ac W_bd, for one output row i.
void contract_row(const HankelBlock& hb, const Eigen::MatrixXd& W, int i, double* row) {
  const int n = hb.side;
  for (int p = hb.pair_start[static_cast<std::size_t>(i)]; p < hb.pair_start[static_cast<std::size_t>(i) + 1]; ++p) {
    const int a = hb.pair_a[static_cast<std::size_t>(p)];
    const int b = hb.pair_b[static_cast<std::size_t>(p)];
    const double fa = a == b ? 0.5 : 1.0;
    const double* Wa = W.col(a).data();
    const double* Wb = W.col(b).data();
    for (int c = 0; c < n; ++c) {
      const int* srow = hb.sum_index.data() + static_cast<std::ptrdiff_t>(c) * n;
      const double wac = Wa[c];
      const double wbc = Wb[c];
      row[srow[c]] += fa * (wac * Wb[c] + Wa[c] * wbc);
      for (int d = c + 1; d < n; ++d) {
        row[srow[d]] += 2.0 * fa * (wac * Wb[d] + Wa[d] * wbc);
      }
    }
  }
}

}  // namespace

void schur_hankel(const HankelBlock& hb, const Eigen::MatrixXd& W, Eigen::Ref<Eigen::MatrixXd> H,
                  bool parallel) {
  const int m = hb.base_size;
  // Column-major N: column i holds contraction row i (N is symmetric).
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(m, m);
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (int i = 0; i < m; ++i) contract_row(hb, W, i, N.col(i).data());
  } else {
    for (int i = 0; i < m; ++i) contract_row(hb, W, i, N.col(i).data());
  }
  const std::size_t T = hb.coefs.size();
  if (T == 1 && hb.coefs[0] == 1.0) {
    const auto& sh = hb.shifts[0];
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) H(sh[static_cast<std::size_t>(i)], sh[static_cast<std::size_t>(j)]) += N(i, j);
    }
    return;
  }
  for (std::size_t s = 0; s < T; ++s) {
    for (std::size_t t = 0; t < T; ++t) {
      const double g = hb.coefs[s] * hb.coefs[t];
      const auto& si = hb.shifts[s];
      const auto& tj = hb.shifts[t];
      for (int j = 0; j < m; ++j) {
        const int col = tj[static_cast<std::size_t>(j)];
        for (int i = 0; i < m; ++i) H(si[static_cast<std::size_t>(i)], col) += g * N(i, j);
      }
    }
  }
}

}  // namespace peakbound
