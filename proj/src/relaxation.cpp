#include "peakbound/relaxation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace peakbound {

int ConicProgram::measure_index(const std::string& name) const {
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (measures[i].name == name) return static_cast<int>(i);
  }
  throw PolyError("no measure named " + name);
}

const MeasureLayout& ConicProgram::measure(const std::string& name) const {
  return measures[static_cast<std::size_t>(measure_index(name))];
}

int ConicProgram::global_index(const std::string& name, const MultiIndex& m) const {
  const MeasureLayout& ms = measure(name);
  return ms.offset + ms.basis->index_of(m);
}

void ConicProgram::check() const {
  int next = 0;
  for (const auto& m : measures) {
    if (m.offset != next) throw PolyError("measure layout has a gap at " + m.name);
    next += m.size();
  }
  if (q_index >= 0) {
    if (q_index != next) throw PolyError("maximin scalar is not after the measures");
    ++next;
  }
  if (next != num_scalars) throw PolyError("measures do not partition the scalar range");
  auto check_form = [&](const SparseForm& f, const std::string& what) {
    for (const auto& t : f) {
      if (t.var < 0 || t.var >= num_scalars) throw PolyError(what + " references a bad scalar");
    }
  };
  for (const auto& c : equalities) check_form(c.form, "equality " + c.tag);
  for (const auto& c : inequalities) check_form(c.form, "inequality " + c.tag);
  check_form(objective, "objective");
  for (const auto& b : psd_blocks) {
    if (b.measure < 0 || b.measure >= static_cast<int>(measures.size())) {
      throw PolyError("psd block " + b.tag + " has a bad measure");
    }
    const int n = measures[static_cast<std::size_t>(b.measure)].size();
    for (const auto& e : b.spec.entries) {
      for (const auto& t : e) {
        if (t.index < 0 || t.index >= n) throw PolyError("psd block " + b.tag + " exceeds truncation");
      }
    }
  }
}

namespace {

int half_up(int k) { return (k + 1) / 2; }

int max_degree(const std::vector<Polynomial>& ps) {
  int d = 0;
  for (const auto& p : ps) d = std::max(d, p.degree());
  return d;
}

int max_half_degree(const SemialgebraicSet& s) {
  int d = 0;
  for (const auto& g : s.constraints) d = std::max(d, half_up(g.degree()));
  return d;
}

std::vector<Block> initial_blocks() { return {Block::x, Block::theta}; }

std::vector<Block> peak_blocks(Mode mode) {
  if (mode == Mode::continuous) return {Block::t, Block::x, Block::theta};
  return {Block::x, Block::theta};
}

std::vector<Block> occupation_blocks(Mode mode) {
  if (mode == Mode::continuous) return {Block::t, Block::x, Block::theta, Block::w};
  return {Block::x, Block::theta, Block::w};
}

struct BlockRequest {
  int measure = 0;  // 0 = y0, 1 = yp, 2 + k = yk
  std::optional<Polynomial> g;
  int order = 0;
  std::string tag;
};

std::string measure_name(int m) {
  if (m == 0) return "y0";
  if (m == 1) return "yp";
  return "y" + std::to_string(m - 1);
}

Polynomial time_support(const UncertainSystem& sys) {
  const VarLayout& L = sys.layout;
  const Polynomial t = Polynomial::variable(L, {Block::t, 0});
  return mul(t, Polynomial::constant(L, sys.horizon) - t);
}

std::vector<BlockRequest> enumerate_blocks(const UncertainSystem& sys, const RelaxationPlan& p) {
  std::vector<BlockRequest> out;
  const int d = p.order;
  auto add_set = [&](int measure, const SemialgebraicSet& s, int parent, const std::string& name) {
    for (std::size_t i = 0; i < s.constraints.size(); ++i) {
      const Polynomial& g = s.constraints[i];
      const int r = parent - half_up(g.degree());
      if (r < 0) throw PolyError("constraint degree exceeds relaxation order in " + name);
      out.push_back({measure, g, r, measure_name(measure) + ":" + name + "[" + std::to_string(i) + "]"});
    }
  };
  out.push_back({0, std::nullopt, d, "y0:moment"});
  add_set(0, sys.X0, d, "X0");
  add_set(0, sys.Theta, d, "Theta");
  out.push_back({1, std::nullopt, d, "yp:moment"});
  add_set(1, sys.X, d, "X");
  add_set(1, sys.Theta, d, "Theta");
  if (p.mode == Mode::continuous && d - 2 >= 0) {
    out.push_back({1, time_support(sys), d - 2, "yp:time"});
  }
  for (std::size_t k = 0; k < sys.subsystems.size(); ++k) {
    const int m = 2 + static_cast<int>(k);
    const int dk = p.occupation_orders[k];
    out.push_back({m, std::nullopt, dk, measure_name(m) + ":moment"});
    add_set(m, sys.X, dk, "X");
    add_set(m, sys.subsystems[k].region, dk, "X" + std::to_string(k + 1));
    add_set(m, sys.Theta, dk, "Theta");
    add_set(m, sys.W, dk, "W");
    if (p.mode == Mode::continuous && dk - 2 >= 0) {
      out.push_back({m, time_support(sys), dk - 2, measure_name(m) + ":time"});
    }
  }
  return out;
}

std::vector<Block> blocks_for(Mode mode, int measure) {
  if (measure == 0) return initial_blocks();
  if (measure == 1) return peak_blocks(mode);
  return occupation_blocks(mode);
}

int active_vars(const VarLayout& L, const std::vector<Block>& blocks) {
  int n = 0;
  for (Block b : blocks) n += L.block_size(b);
  return n;
}

void normalize_row(LinearConstraint& row) {
  // Merge repeated variables, then scale by the largest magnitude.
  std::map<int, double> acc;
  for (const auto& t : row.form) acc[t.var] += t.coef;
  row.form.clear();
  double mx = 0.0;
  for (const auto& [v, c] : acc) {
    if (std::abs(c) < Polynomial::kPruneTol) continue;
    row.form.push_back({v, c});
    mx = std::max(mx, std::abs(c));
  }
  if (mx > 0.0) {
    for (auto& t : row.form) t.coef /= mx;
    row.rhs /= mx;
    row.row_scale = mx;
  }
}

void append_form(SparseForm& out, const LinearForm& f, int offset, double factor) {
  for (const auto& t : f) out.push_back({offset + t.index, factor * t.coef});
}

std::string monomial_tag(const VarLayout& L, const MultiIndex& m) {
  std::string s = to_string(Polynomial::monomial(L, m));
  return s;
}

ConicProgram skeleton(const UncertainSystem& sys, const RelaxationPlan& p) {
  ConicProgram prog;
  prog.mode = p.mode;
  prog.layout = sys.layout;
  prog.order = p.order;
  prog.horizon = sys.horizon;
  const VarLayout& L = sys.layout;
  std::map<std::pair<int, int>, std::shared_ptr<const MonomialBasis>> cache;
  auto basis_for = [&](int measure, int order) {
    const auto blocks = blocks_for(p.mode, measure);
    const int kind = measure < 2 ? measure : 2;
    auto key = std::make_pair(kind, order);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto b = std::make_shared<const MonomialBasis>(L, blocks, 2 * order);
    cache.emplace(key, b);
    return std::shared_ptr<const MonomialBasis>(b);
  };
  int offset = 0;
  const int nmeasures = 2 + static_cast<int>(sys.subsystems.size());
  for (int m = 0; m < nmeasures; ++m) {
    MeasureLayout ml;
    ml.name = measure_name(m);
    ml.subsystem = m >= 2 ? m - 2 : -1;
    ml.order = m < 2 ? p.order : p.occupation_orders[static_cast<std::size_t>(m - 2)];
    ml.basis = basis_for(m, ml.order);
    ml.offset = offset;
    offset += ml.size();
    prog.measures.push_back(std::move(ml));
  }
  prog.num_scalars = offset;

  for (const auto& req : enumerate_blocks(sys, p)) {
    const MeasureLayout& ml = prog.measures[static_cast<std::size_t>(req.measure)];
    PsdBlock blk;
    blk.measure = req.measure;
    blk.order = req.order;
    blk.tag = req.tag;
    if (req.g) {
      blk.spec = *localizing_matrix_at_order(*req.g, *ml.basis, req.order);
      for (const auto& [mono, c] : req.g->terms()) {
        blk.loc_monomials.push_back(mono);
        blk.loc_coefs.push_back(c);
      }
    } else {
      blk.spec = moment_matrix_spec(*ml.basis, req.order);
      blk.loc_monomials.push_back(MultiIndex(L.size()));
      blk.loc_coefs.push_back(1.0);
    }
    prog.psd_blocks.push_back(std::move(blk));
  }

  // Mass of the initial measure.
  LinearConstraint mass;
  mass.form.push_back({prog.measures[0].offset, 1.0});
  mass.rhs = 1.0;
  mass.tag = "mass";
  prog.mass_row = static_cast<int>(prog.equalities.size());
  prog.equalities.push_back(std::move(mass));
  return prog;
}

void add_objective(const UncertainSystem& sys, ConicProgram& prog) {
  const MeasureLayout& yp = prog.measures[1];
  if (sys.objective_mode == ObjectiveMode::max) {
    append_form(prog.objective, riesz_form(sys.objectives.front(), *yp.basis), yp.offset, 1.0);
    return;
  }
  prog.q_index = prog.num_scalars++;
  prog.objective.push_back({prog.q_index, 1.0});
  for (std::size_t i = 0; i < sys.objectives.size(); ++i) {
    LinearConstraint row;
    row.form.push_back({prog.q_index, 1.0});
    append_form(row.form, riesz_form(sys.objectives[i], *yp.basis), yp.offset, -1.0);
    row.rhs = 0.0;
    row.tag = "maximin[" + std::to_string(i) + "]";
    prog.objective_rows.push_back(static_cast<int>(prog.inequalities.size()));
    prog.inequalities.push_back(std::move(row));
  }
}

void check_plan(const UncertainSystem& sys, const RelaxationPlan& p, Mode expected) {
  if (sys.mode != expected || p.mode != expected) {
    throw PolyError("relaxation plan and system disagree on the time mode");
  }
  if (p.occupation_orders.size() != sys.subsystems.size()) {
    throw PolyError("relaxation plan and system disagree on the subsystem count");
  }
}

}  // namespace

RelaxationPlan plan(const UncertainSystem& sys, int d) {
  if (sys.subsystems.empty()) throw PolyError("system has no subsystems");
  if (sys.objectives.empty()) throw PolyError("system has no objectives");
  const int need = std::max({max_half_degree(sys.X0), max_half_degree(sys.X),
                             max_half_degree(sys.Theta), half_up(max_degree(sys.objectives)), 1});
  if (d < need) {
    throw PolyError("relaxation order " + std::to_string(d) + " is below the minimum " +
                    std::to_string(need));
  }
  RelaxationPlan p;
  p.mode = sys.mode;
  p.order = d;
  const VarLayout& L = sys.layout;
  for (const auto& sub : sys.subsystems) {
    const int deg = max_degree(sub.f);
    int nominal = 0;
    int needed = 0;
    if (sys.mode == Mode::continuous) {
      nominal = d + half_up(deg) - 1;
      needed = half_up(2 * d - 1 + std::max(deg, 0));
    } else {
      nominal = d * std::max(1, deg);
      needed = nominal;
    }
    const int sets = std::max({max_half_degree(sys.X), max_half_degree(sub.region),
                               max_half_degree(sys.Theta), max_half_degree(sys.W)});
    p.nominal_occupation_orders.push_back(nominal);
    p.occupation_orders.push_back(std::max({nominal, needed, sets, d}));
  }
  const std::vector<Block> test_blocks =
      sys.mode == Mode::continuous ? std::vector<Block>{Block::t, Block::x, Block::theta}
                                   : std::vector<Block>{Block::x, Block::theta};
  MonomialBasis tests(L, test_blocks, 2 * d);
  for (int i = 0; i < tests.size(); ++i) p.test_monomials.push_back(tests.at(i));
  p.num_liouville_rows = static_cast<int>(p.test_monomials.size());

  p.num_scalars = static_cast<int>(binomial(active_vars(L, initial_blocks()) + 2 * d, 2 * d)) +
                  static_cast<int>(binomial(active_vars(L, peak_blocks(sys.mode)) + 2 * d, 2 * d));
  for (int dk : p.occupation_orders) {
    p.num_scalars +=
        static_cast<int>(binomial(active_vars(L, occupation_blocks(sys.mode)) + 2 * dk, 2 * dk));
  }
  if (sys.objective_mode == ObjectiveMode::maximin) ++p.num_scalars;
  for (const auto& req : enumerate_blocks(sys, p)) {
    const int n = active_vars(L, blocks_for(sys.mode, req.measure));
    p.block_sides.push_back(static_cast<int>(binomial(n + req.order, req.order)));
    p.block_tags.push_back(req.tag);
  }
  return p;
}

ConicProgram assemble_continuous(const UncertainSystem& sys, const RelaxationPlan& p) {
  check_plan(sys, p, Mode::continuous);
  ConicProgram prog = skeleton(sys, p);
  const VarLayout& L = sys.layout;
  const MeasureLayout& y0 = prog.measures[0];
  const MeasureLayout& yp = prog.measures[1];
  for (const MultiIndex& m : p.test_monomials) {
    LinearConstraint row;
    row.tag = "liouville:" + monomial_tag(L, m);
    if (m.block_degree(L, Block::t) == 0) row.form.push_back({y0.offset + y0.basis->index_of(m), 1.0});
    row.form.push_back({yp.offset + yp.basis->index_of(m), -1.0});
    const Polynomial v = Polynomial::monomial(L, m);
    for (std::size_t k = 0; k < sys.subsystems.size(); ++k) {
      const MeasureLayout& yk = prog.measures[2 + k];
      const Polynomial lie = lie_derivative(v, sys.subsystems[k].f);
      append_form(row.form, riesz_form(lie, *yk.basis), yk.offset, 1.0);
    }
    normalize_row(row);
    prog.liouville_rows.push_back(static_cast<int>(prog.equalities.size()));
    prog.test_monomials.push_back(m);
    prog.equalities.push_back(std::move(row));
  }
  add_objective(sys, prog);
  prog.check();
  return prog;
}

ConicProgram assemble_discrete(const UncertainSystem& sys, const RelaxationPlan& p) {
  check_plan(sys, p, Mode::discrete);
  ConicProgram prog = skeleton(sys, p);
  const VarLayout& L = sys.layout;
  const MeasureLayout& y0 = prog.measures[0];
  const MeasureLayout& yp = prog.measures[1];
  prog.occupation_scale = sys.horizon;
  for (const MultiIndex& m : p.test_monomials) {
    LinearConstraint row;
    row.tag = "liouville:" + monomial_tag(L, m);
    row.form.push_back({y0.offset + y0.basis->index_of(m), 1.0});
    row.form.push_back({yp.offset + yp.basis->index_of(m), -1.0});
    const Polynomial v = Polynomial::monomial(L, m);
    for (std::size_t k = 0; k < sys.subsystems.size(); ++k) {
      const MeasureLayout& yk = prog.measures[2 + k];
      const Polynomial push = compose_monomial(m, sys.subsystems[k].f, true) - v;
      append_form(row.form, riesz_form(push, *yk.basis), yk.offset, prog.occupation_scale);
    }
    normalize_row(row);
    prog.liouville_rows.push_back(static_cast<int>(prog.equalities.size()));
    prog.test_monomials.push_back(m);
    prog.equalities.push_back(std::move(row));
  }
  LinearConstraint time;
  for (std::size_t k = 0; k < sys.subsystems.size(); ++k) {
    time.form.push_back({prog.measures[2 + k].offset, 1.0});
  }
  time.rhs = 1.0;
  time.tag = "time";
  prog.time_row = static_cast<int>(prog.inequalities.size());
  prog.inequalities.push_back(std::move(time));
  add_objective(sys, prog);
  prog.check();
  return prog;
}

ConicProgram assemble(const UncertainSystem& sys, const RelaxationPlan& p) {
  return sys.mode == Mode::continuous ? assemble_continuous(sys, p) : assemble_discrete(sys, p);
}

namespace {

nlohmann::json form_json(const SparseForm& f) {
  nlohmann::json vars = nlohmann::json::array();
  nlohmann::json coefs = nlohmann::json::array();
  for (const auto& t : f) {
    vars.push_back(t.var);
    coefs.push_back(t.coef);
  }
  return {{"vars", vars}, {"coefs", coefs}};
}

nlohmann::json constraint_json(const LinearConstraint& c) {
  nlohmann::json j = form_json(c.form);
  j["rhs"] = c.rhs;
  j["tag"] = c.tag;
  j["row_scale"] = c.row_scale;
  return j;
}

std::string block_name(Block b) {
  switch (b) {
    case Block::t: return "t";
    case Block::x: return "x";
    case Block::theta: return "th";
    case Block::w: return "w";
  }
  return "?";
}

}  // namespace

nlohmann::json to_json(const ConicProgram& prog) {
  nlohmann::json j;
  j["schema"] = "peakbound/1";
  j["kind"] = "conic_program";
  j["sense"] = "max";
  j["mode"] = prog.mode == Mode::continuous ? "continuous" : "discrete";
  j["order"] = prog.order;
  j["horizon"] = prog.horizon;
  j["num_scalars"] = prog.num_scalars;
  j["q_index"] = prog.q_index;
  j["mass_row"] = prog.mass_row;
  j["time_row"] = prog.time_row;
  j["occupation_scale"] = prog.occupation_scale;
  j["objective"] = form_json(prog.objective);
  auto& ms = j["measures"] = nlohmann::json::array();
  for (const auto& m : prog.measures) {
    nlohmann::json mj;
    mj["name"] = m.name;
    mj["offset"] = m.offset;
    mj["size"] = m.size();
    mj["order"] = m.order;
    mj["subsystem"] = m.subsystem;
    for (Block b : m.basis->blocks()) mj["blocks"].push_back(block_name(b));
    nlohmann::json monos = nlohmann::json::array();
    for (int i = 0; i < m.size(); ++i) {
      nlohmann::json e = nlohmann::json::array();
      for (int pos : m.basis->active_positions()) e.push_back(m.basis->at(i)[pos]);
      monos.push_back(std::move(e));
    }
    mj["monomials"] = std::move(monos);
    ms.push_back(std::move(mj));
  }
  auto& eq = j["equalities"] = nlohmann::json::array();
  for (const auto& c : prog.equalities) eq.push_back(constraint_json(c));
  auto& in = j["inequalities"] = nlohmann::json::array();
  for (const auto& c : prog.inequalities) in.push_back(constraint_json(c));
  auto& psd = j["psd_blocks"] = nlohmann::json::array();
  for (const auto& b : prog.psd_blocks) {
    const int off = prog.measures[static_cast<std::size_t>(b.measure)].offset;
    nlohmann::json bj;
    bj["tag"] = b.tag;
    bj["measure"] = b.measure;
    bj["order"] = b.order;
    bj["side"] = b.side();
    nlohmann::json entries = nlohmann::json::array();
    for (int r = 0; r < b.side(); ++r) {
      for (int c = r; c < b.side(); ++c) {
        nlohmann::json vars = nlohmann::json::array();
        nlohmann::json coefs = nlohmann::json::array();
        for (const auto& t : b.spec.entry(r, c)) {
          vars.push_back(off + t.index);
          coefs.push_back(t.coef);
        }
        entries.push_back({r, c, vars, coefs});
      }
    }
    bj["entries"] = std::move(entries);
    psd.push_back(std::move(bj));
  }
  j["liouville_rows"] = prog.liouville_rows;
  return j;
}

void write_sdpa(const ConicProgram& prog, std::ostream& os) {
  const int nlin = 2 * static_cast<int>(prog.equalities.size()) +
                   static_cast<int>(prog.inequalities.size());
  const int nblocks = static_cast<int>(prog.psd_blocks.size()) + (nlin > 0 ? 1 : 0);
  os << "\"peakbound conic program, " << prog.num_scalars << " scalars\"\n";
  os << prog.num_scalars << "\n" << nblocks << "\n";
  for (const auto& b : prog.psd_blocks) os << b.side() << " ";
  if (nlin > 0) os << -nlin;
  os << "\n";
  std::vector<double> c(static_cast<std::size_t>(prog.num_scalars), 0.0);
  for (const auto& t : prog.objective) c[static_cast<std::size_t>(t.var)] -= t.coef;
  os.precision(17);
  for (double v : c) os << v << " ";
  os << "\n";
  // (matno, block, row, col) -> value
  std::map<std::tuple<int, int, int, int>, double> entries;
  for (std::size_t l = 0; l < prog.psd_blocks.size(); ++l) {
    const auto& b = prog.psd_blocks[l];
    const int off = prog.measures[static_cast<std::size_t>(b.measure)].offset;
    for (int r = 0; r < b.side(); ++r) {
      for (int cc = r; cc < b.side(); ++cc) {
        for (const auto& t : b.spec.entry(r, cc)) {
          entries[{off + t.index + 1, static_cast<int>(l) + 1, r + 1, cc + 1}] += t.coef;
        }
      }
    }
  }
  const int lb = static_cast<int>(prog.psd_blocks.size()) + 1;
  int row = 1;
  for (const auto& e : prog.equalities) {
    for (double sign : {1.0, -1.0}) {
      for (const auto& t : e.form) entries[{t.var + 1, lb, row, row}] += sign * t.coef;
      entries[{0, lb, row, row}] += sign * e.rhs;
      ++row;
    }
  }
  for (const auto& e : prog.inequalities) {
    for (const auto& t : e.form) entries[{t.var + 1, lb, row, row}] -= t.coef;
    entries[{0, lb, row, row}] -= e.rhs;
    ++row;
  }
  for (const auto& [key, v] : entries) {
    if (v == 0.0) continue;
    const auto& [mat, blk, r, cc] = key;
    os << mat << " " << blk << " " << r << " " << cc << " " << v << "\n";
  }
}

}  // namespace peakbound
