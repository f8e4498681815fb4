#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "peakbound/model.hpp"
#include "peakbound/moments.hpp"

namespace peakbound {

/// One measure's slice of the stacked scalar vector.
struct MeasureLayout {
  std::string name;  // "y0", "yp", "y1", "y2", ...
  int subsystem = -1;
  int offset = 0;
  int order = 0;  // relaxation order r; moments are stored up to degree 2r
  std::shared_ptr<const MonomialBasis> basis;

  int size() const { return basis->size(); }
};

struct SparseTerm {
  int var = 0;  // global scalar index
  double coef = 0.0;
};
using SparseForm = std::vector<SparseTerm>;

/// form . y (== or <=) rhs. Liouville rows are stored divided by row_scale,
/// their largest absolute coefficient.
struct LinearConstraint {
  SparseForm form;
  double rhs = 0.0;
  std::string tag;
  double row_scale = 1.0;
};

/// M_order(g * y_measure) with g = sum_j loc_coefs[j] * loc_monomials[j].
/// A plain moment matrix has g = 1.
struct PsdBlock {
  int measure = 0;
  int order = 0;
  std::string tag;
  MatrixSpec spec;  // entries reference indices local to the measure
  std::vector<MultiIndex> loc_monomials;
  std::vector<double> loc_coefs;

  int side() const { return spec.side; }
};

/// Sign conventions, shared by every backend:
///   maximize objective . y
///   subject to  equalities[i]:   a_i . y == b_i      dual u_i (free)
///               inequalities[j]: g_j . y <= h_j      dual lambda_j >= 0
///               psd_blocks[l]:   F_l(y) >= 0 (PSD)   dual Z_l >= 0 (PSD)
/// with dual feasibility E^T u + G^T lambda - sum_l F_l^*(Z_l) = objective.
struct ConicProgram {
  Mode mode = Mode::continuous;
  VarLayout layout;
  int order = 0;
  double horizon = 1.0;
  int num_scalars = 0;
  std::vector<MeasureLayout> measures;
  std::vector<LinearConstraint> equalities;
  std::vector<LinearConstraint> inequalities;
  std::vector<PsdBlock> psd_blocks;
  SparseForm objective;

  int q_index = -1;      // maximin scalar, -1 in max mode
  int mass_row = -1;     // equality index of y0_0 == 1
  int time_row = -1;     // inequality index of sum_k yk_0 <= 1 (discrete)
  /// Occupation measures are stored divided by this factor: the horizon T in
  /// discrete mode, so that every measure has mass at most one; 1 otherwise.
  double occupation_scale = 1.0;
  std::vector<int> objective_rows;  // inequality indices of q <= L(p_i, yp)
  /// Liouville equality index -> test monomial (full layout, zero w).
  std::vector<int> liouville_rows;
  std::vector<MultiIndex> test_monomials;

  int measure_index(const std::string& name) const;
  const MeasureLayout& measure(const std::string& name) const;
  /// Global index of moment m in the named measure.
  int global_index(const std::string& name, const MultiIndex& m) const;
  /// Throws PolyError if any constraint references an index outside the
  /// layout or the measures do not partition the scalar range.
  void check() const;
};

/// Measures, orders and Liouville test set of one relaxation.
struct RelaxationPlan {
  Mode mode = Mode::continuous;
  int order = 0;
  /// d + ceil(deg f_k / 2) - 1 (continuous) or ceil(d * max(1, deg f_k)) (discrete).
  std::vector<int> nominal_occupation_orders;
  /// Order actually used: raised when needed so every moment in a Liouville
  /// row is covered by the occupation moment matrix.
  std::vector<int> occupation_orders;
  std::vector<MultiIndex> test_monomials;
  int num_liouville_rows = 0;
  int num_scalars = 0;
  std::vector<int> block_sides;
  std::vector<std::string> block_tags;
};

RelaxationPlan plan(const UncertainSystem& sys, int d);

ConicProgram assemble_continuous(const UncertainSystem& sys, const RelaxationPlan& p);
ConicProgram assemble_discrete(const UncertainSystem& sys, const RelaxationPlan& p);
/// Dispatches on sys.mode.
ConicProgram assemble(const UncertainSystem& sys, const RelaxationPlan& p);

/// Debug/interop dump. PSD blocks are expanded to explicit upper-triangle
/// entries so external tools need no knowledge of the moment structure.
nlohmann::json to_json(const ConicProgram& prog);

/// SDPA sparse format: minimize -objective.y s.t. sum_i y_i F_i - F_0 >= 0.
/// Linear rows go into one diagonal block; each equality becomes two
/// opposite inequalities.
void write_sdpa(const ConicProgram& prog, std::ostream& os);

}  // namespace peakbound
