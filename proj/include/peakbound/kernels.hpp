#pragma once

#include <vector>

#include <Eigen/Dense>

#include "peakbound/relaxation.hpp"

namespace peakbound {

/// Index tables of a moment or localizing block M_r(g y) over one measure.
/// Every entry is sum_j g_j y[shift_j[sum_index(a, b)]], where sum_index
/// maps a pair of order-r basis monomials to the index of their product.
struct HankelBlock {
  int side = 0;
  int base_size = 0;              // moments of degree <= 2r
  std::vector<int> sum_index;     // side * side
  std::vector<std::vector<int>> shifts;  // one table of length base_size per term of g
  std::vector<double> coefs;
  /// Pairs a <= b grouped by sum_index, CSR layout.
  std::vector<int> pair_start;
  std::vector<int> pair_a;
  std::vector<int> pair_b;
};

HankelBlock make_hankel_block(const PsdBlock& blk, const MonomialBasis& basis);

/// F(y) for the block; y holds the measure's moments.
Eigen::MatrixXd hankel_apply(const HankelBlock& hb, const Eigen::Ref<const Eigen::VectorXd>& y);
/// Adjoint: out_i += <A_i, X>.
void hankel_adjoint(const HankelBlock& hb, const Eigen::MatrixXd& X,
                    Eigen::Ref<Eigen::VectorXd> out);

/// Adds the Schur contribution H_ij += <A_i, W A_j W> over the measure's
/// moments. Reference version straight from the MatrixSpec entry lists;
/// O(nnz^2) and kept for testing.
void schur_reference(const PsdBlock& blk, const Eigen::MatrixXd& W, Eigen::Ref<Eigen::MatrixXd> H);

/// Same result using the Hankel structure: one O(side^4 / 4) pass builds the
/// contraction on degree <= 2r moments, then each pair of terms of g shifts
/// it into H. Rows are independent, so the OpenMP version is deterministic.
void schur_hankel(const HankelBlock& hb, const Eigen::MatrixXd& W, Eigen::Ref<Eigen::MatrixXd> H,
                  bool parallel);

}  // namespace peakbound
