#include "peakbound/problem_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace peakbound {

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing \"" + key + "\"");
  return j.at(key);
}

int get_int(const json& j, const std::string& what) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ParseError(what + " must be a nonnegative integer");
  return j.get<int>();
}

double get_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ParseError(what + " must be a number");
  return j.get<double>();
}

void read_block(const json& e, const char* key, int size, int offset, MultiIndex& idx, const std::string& where) {
  if (!e.contains(key)) return;
  const json& v = e.at(key);
  if (!v.is_array() || static_cast<int>(v.size()) != size) {
    throw ParseError(where + ": exponent block \"" + key + "\" must have " + std::to_string(size) + " entries");
  }
  for (int i = 0; i < size; ++i) idx[offset + i] = get_int(v[static_cast<std::size_t>(i)], where + " exponent");
}

std::vector<Polynomial> poly_list(const json& j, const VarLayout& L, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + " must be an array of polynomials");
  std::vector<Polynomial> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    try {
      out.push_back(poly_from_json(j[i], L));
    } catch (const ParseError& e) {
      throw ParseError(where + "[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return out;
}

json poly_list_json(const std::vector<Polynomial>& ps) {
  json a = json::array();
  for (const auto& p : ps) a.push_back(poly_to_json(p));
  return a;
}

}  // namespace

Polynomial poly_from_json(const json& j, const VarLayout& L) {
  if (!j.is_array()) throw ParseError("polynomial must be an array of terms");
  Polynomial p(L);
  for (const auto& term : j) {
    const double c = get_number(require(term, "c", "term"), "coefficient");
    MultiIndex idx(L.size());
    if (term.contains("e")) {
      const json& e = term.at("e");
      if (!e.is_object()) throw ParseError("term exponents \"e\" must be an object");
      for (const auto& [k, v] : e.items()) {
        if (k != "t" && k != "x" && k != "th" && k != "w") throw ParseError("unknown exponent block \"" + k + "\"");
      }
      if (e.contains("t")) idx[0] = get_int(e.at("t"), "t exponent");
      read_block(e, "x", L.nx, L.offset(Block::x), idx, "term");
      read_block(e, "th", L.ntheta, L.offset(Block::theta), idx, "term");
      read_block(e, "w", L.nw, L.offset(Block::w), idx, "term");
    }
    p.add_term(idx, c);
  }
  return p;
}

json poly_to_json(const Polynomial& p) {
  const VarLayout& L = p.layout();
  json out = json::array();
  for (const auto& [m, c] : p.terms()) {
    json e = json::object();
    if (m[0] != 0) e["t"] = m[0];
    auto block = [&](const char* key, Block b) {
      const int n = L.block_size(b);
      bool any = false;
      json v = json::array();
      for (int i = 0; i < n; ++i) {
        v.push_back(m[L.offset(b) + i]);
        any = any || m[L.offset(b) + i] != 0;
      }
      if (any) e[key] = v;
    };
    block("x", Block::x);
    block("th", Block::theta);
    block("w", Block::w);
    json term = {{"c", c}};
    if (!e.empty()) term["e"] = e;
    out.push_back(term);
  }
  return out;
}

ProblemFile problem_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("problem file must be a JSON object");
  if (j.contains("schema") && j.at("schema") != kSchema) {
    throw ParseError("unsupported schema " + j.at("schema").dump());
  }
  ProblemFile pf;
  UncertainSystem& sys = pf.sys;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw ParseError("name must be a string");
    sys.name = j.at("name").get<std::string>();
  }
  const json& mode = require(j, "mode", "problem");
  if (mode == "continuous") sys.mode = Mode::continuous;
  else if (mode == "discrete") sys.mode = Mode::discrete;
  else throw ParseError("mode must be \"continuous\" or \"discrete\"");

  const json& dims = require(j, "dims", "problem");
  sys.layout.nx = get_int(require(dims, "nx", "dims"), "dims.nx");
  if (dims.contains("ntheta")) sys.layout.ntheta = get_int(dims.at("ntheta"), "dims.ntheta");
  if (dims.contains("nw")) sys.layout.nw = get_int(dims.at("nw"), "dims.nw");
  const VarLayout& L = sys.layout;

  sys.horizon = get_number(require(j, "horizon", "problem"), "horizon");

  if (j.contains("sets")) {
    const json& sets = j.at("sets");
    if (!sets.is_object()) throw ParseError("sets must be an object");
    for (const auto& [k, v] : sets.items()) {
      if (k == "X") sys.X.constraints = poly_list(v, L, "sets.X");
      else if (k == "X0") sys.X0.constraints = poly_list(v, L, "sets.X0");
      else if (k == "Theta") sys.Theta.constraints = poly_list(v, L, "sets.Theta");
      else if (k == "W") sys.W.constraints = poly_list(v, L, "sets.W");
      else throw ParseError("unknown set \"" + k + "\"");
    }
  }

  const json& subs = require(j, "subsystems", "problem");
  if (!subs.is_array()) throw ParseError("subsystems must be an array");
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const std::string where = "subsystems[" + std::to_string(k) + "]";
    Subsystem s;
    s.f = poly_list(require(subs[k], "f", where), L, where + ".f");
    s.region = {SetLabel::Xk, static_cast<int>(k), {}};
    if (subs[k].contains("region")) s.region.constraints = poly_list(subs[k].at("region"), L, where + ".region");
    sys.subsystems.push_back(std::move(s));
  }
  sys.objectives = poly_list(require(j, "objectives", "problem"), L, "objectives");
  if (j.contains("objective_mode")) {
    const json& om = j.at("objective_mode");
    if (om == "max") sys.objective_mode = ObjectiveMode::max;
    else if (om == "maximin") sys.objective_mode = ObjectiveMode::maximin;
    else throw ParseError("objective_mode must be \"max\" or \"maximin\"");
  }

  if (j.contains("options")) {
    const json& o = j.at("options");
    if (!o.is_object()) throw ParseError("options must be an object");
    ProblemOptions& opt = pf.options;
    if (o.contains("order")) opt.order = get_int(o.at("order"), "options.order");
    if (o.contains("scale")) {
      const json& sc = o.at("scale");
      if (!sc.is_array()) throw ParseError("options.scale must be an array of [lo, hi] pairs");
      for (const auto& r : sc) {
        if (!r.is_array() || r.size() != 2) throw ParseError("options.scale entries must be [lo, hi]");
        opt.scale.emplace_back(get_number(r[0], "scale bound"), get_number(r[1], "scale bound"));
      }
    }
    if (o.contains("sqrt_report")) {
      if (!o.at("sqrt_report").is_boolean()) throw ParseError("options.sqrt_report must be a boolean");
      opt.sqrt_report = o.at("sqrt_report").get<bool>();
    }
    if (o.contains("unit")) {
      if (!o.at("unit").is_string()) throw ParseError("options.unit must be a string");
      opt.unit = o.at("unit").get<std::string>();
    }
    if (o.contains("seed")) opt.seed = static_cast<std::uint64_t>(get_int(o.at("seed"), "options.seed"));
    if (o.contains("samples")) opt.samples = get_int(o.at("samples"), "options.samples");
    if (o.contains("hold")) opt.hold = get_number(o.at("hold"), "options.hold");
  }
  return pf;
}

json problem_to_json(const ProblemFile& pf) {
  const UncertainSystem& sys = pf.sys;
  json j;
  j["schema"] = kSchema;
  j["name"] = sys.name;
  j["mode"] = sys.mode == Mode::continuous ? "continuous" : "discrete";
  j["dims"] = {{"nx", sys.layout.nx}, {"ntheta", sys.layout.ntheta}, {"nw", sys.layout.nw}};
  j["horizon"] = sys.horizon;
  j["sets"] = {{"X", poly_list_json(sys.X.constraints)},
               {"X0", poly_list_json(sys.X0.constraints)},
               {"Theta", poly_list_json(sys.Theta.constraints)},
               {"W", poly_list_json(sys.W.constraints)}};
  json subs = json::array();
  for (const auto& s : sys.subsystems) {
    subs.push_back({{"f", poly_list_json(s.f)}, {"region", poly_list_json(s.region.constraints)}});
  }
  j["subsystems"] = subs;
  j["objectives"] = poly_list_json(sys.objectives);
  j["objective_mode"] = sys.objective_mode == ObjectiveMode::max ? "max" : "maximin";
  const ProblemOptions& o = pf.options;
  json opt = json::object();
  if (o.order) opt["order"] = *o.order;
  if (!o.scale.empty()) {
    json sc = json::array();
    for (const auto& [lo, hi] : o.scale) sc.push_back({lo, hi});
    opt["scale"] = sc;
  }
  opt["sqrt_report"] = o.sqrt_report;
  if (!o.unit.empty()) opt["unit"] = o.unit;
  opt["seed"] = o.seed;
  opt["samples"] = o.samples;
  opt["hold"] = o.hold;
  j["options"] = opt;
  return j;
}

ProblemFile load_problem(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    return problem_from_json(j);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  } catch (const PolyError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

SamplingSummary summarize(const std::vector<TrajectoryRecord>& records) {
  SamplingSummary s;
  const EmpiricalPeak e = empirical_peak(records);
  s.num = e.num;
  s.incomplete = e.incomplete;
  s.empirical_max = e.value;
  if (e.argmax >= 0) {
    const auto& r = records[static_cast<std::size_t>(e.argmax)];
    s.argmax_x0 = r.x0;
    s.argmax_theta = r.theta;
    s.argmax_time = r.peak_time;
  }
  return s;
}

json to_json(const SamplingSummary& s) {
  return {{"num", s.num},
          {"incomplete", s.incomplete},
          {"empirical_max", s.empirical_max},
          {"argmax", {{"x0", s.argmax_x0}, {"theta", s.argmax_theta}, {"time", s.argmax_time}}}};
}

double sqrt_report_value(double value, const ProblemOptions& opt) {
  const double r = std::sqrt(std::max(value, 0.0));
  return opt.unit == "deg" ? r * 180.0 / std::numbers::pi : r;
}

json make_report(const ProblemFile& pf, const BoundResult& res, const std::optional<SamplingSummary>& sampling,
                 std::optional<double> liouville) {
  json r;
  r["schema"] = kSchema;
  r["problem"] = pf.sys.name;
  r["order"] = res.order;
  r["status"] = to_string(res.status);
  r["bound"] = res.bound;
  if (pf.options.sqrt_report) {
    r["sqrt_bound"] = sqrt_report_value(res.bound, pf.options);
    if (!pf.options.unit.empty()) r["sqrt_unit"] = pf.options.unit;
  }
  const SolverStats& st = res.solve.stats;
  r["solve_stats"] = {{"backend", st.backend},
                      {"iterations", st.iterations},
                      {"primal_residual", st.primal_residual},
                      {"dual_residual", st.dual_residual},
                      {"gap", st.gap},
                      {"dual_value", res.solve.dual_value},
                      {"wall_seconds", st.wall_seconds},
                      {"setup_seconds", res.setup_seconds},
                      {"message", res.solve.message},
                      {"liouville_rows", res.plan.num_liouville_rows},
                      {"num_scalars", res.plan.num_scalars},
                      {"occupation_orders", res.plan.occupation_orders}};
  if (res.certificate) {
    const Certificate& c = *res.certificate;
    json cj = {{"gamma", c.gamma}, {"v", poly_to_json(c.v)}};
    if (c.alpha) cj["alpha"] = *c.alpha;
    if (!c.beta.empty()) cj["beta"] = c.beta;
    cj["dual_bound"] = c.dual_bound(pf.sys.horizon);
    r["certificate"] = cj;
  }
  if (res.recovered) {
    const RecoveredPoint& p = *res.recovered;
    json rj = {{"x_star", p.x_star},
               {"theta_star", p.theta_star},
               {"x0_star", p.x0_star},
               {"rank_indicator", p.rank_indicator},
               {"accepted", p.accepted},
               {"objective_value", p.objective_value}};
    if (p.t_star) rj["t_star"] = *p.t_star;
    if (p.gap) rj["gap"] = *p.gap;
    r["recovered"] = rj;
  }
  if (pf.sys.objective_mode == ObjectiveMode::maximin) {
    r["safety"] = res.usable() && res.bound < 0.0 ? "certified safe" : "not certified";
  }
  if (sampling) {
    json sj = to_json(*sampling);
    sj["gap"] = res.bound - sampling->empirical_max;
    r["sampling"] = sj;
  }
  if (liouville) r["liouville_residual"] = *liouville;
  return r;
}

SamplePolicy policy_from(const ProblemOptions& opt) {
  SamplePolicy p;
  p.num_trajectories = opt.samples;
  p.seed = opt.seed;
  p.hold = opt.hold;
  return p;
}

}  // namespace peakbound
