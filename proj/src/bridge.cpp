#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "peakbound/conic.hpp"

namespace peakbound {

namespace {

SolveStatus map_status(const std::string& s) {
  if (s == "Solved") return SolveStatus::optimal;
  if (s == "AlmostSolved") return SolveStatus::near_optimal;
  if (s == "PrimalInfeasible" || s == "AlmostPrimalInfeasible") return SolveStatus::infeasible;
  if (s == "DualInfeasible" || s == "AlmostDualInfeasible") return SolveStatus::unbounded;
  return SolveStatus::numerical_failure;
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') out += "'\\''";
    else out += ch;
  }
  return out + "'";
}

}  // namespace

SolveResult solve_external(const ConicProgram& prog, const SolverSettings& settings) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult res;
  res.stats.backend = "external";
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path();
  const std::string stem = "peakbound_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
  const fs::path in = dir / (stem + "_prog.json");
  const fs::path out = dir / (stem + "_sol.json");
  {
    std::ofstream f(in);
    f << to_json(prog).dump();
  }
  const std::string script =
      settings.bridge_script.empty() ? std::string(PEAKBOUND_BRIDGE_SCRIPT) : settings.bridge_script;
  std::ostringstream cmd;
  cmd << quote(settings.python) << " " << quote(script) << " " << quote(in.string()) << " "
      << quote(out.string()) << " " << settings.feas_tol << " " << settings.gap_tol;
  const int rc = std::system(cmd.str().c_str());
  std::error_code ec;
  fs::remove(in, ec);
  if (rc != 0 || !fs::exists(out)) {
    res.status = SolveStatus::numerical_failure;
    res.message = "external solver bridge failed (exit " + std::to_string(rc) + ")";
    return res;
  }
  nlohmann::json sol;
  {
    std::ifstream f(out);
    f >> sol;
  }
  fs::remove(out, ec);
  res.status = map_status(sol["status"].get<std::string>());
  res.message = "clarabel: " + sol["status"].get<std::string>();
  auto vec = [](const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
  };
  res.scalars = vec(sol["x"]);
  res.equality_duals = vec(sol["z_eq"]);
  res.inequality_duals = vec(sol["z_ineq"]);
  for (std::size_t l = 0; l < prog.psd_blocks.size(); ++l) {
    const int side = prog.psd_blocks[l].side();
    const auto& flat = sol["psd"][l];
    Eigen::MatrixXd Z(side, side);
    for (int a = 0; a < side; ++a) {
      for (int b = 0; b < side; ++b) Z(a, b) = flat[static_cast<std::size_t>(a * side + b)].get<double>();
    }
    res.psd_duals.push_back(std::move(Z));
  }
  double pobj = 0.0;
  for (const auto& t : prog.objective) pobj += t.coef * res.scalars[t.var];
  double dobj = 0.0;
  for (std::size_t i = 0; i < prog.equalities.size(); ++i) {
    dobj += prog.equalities[i].rhs * res.equality_duals[static_cast<Eigen::Index>(i)];
  }
  for (std::size_t j = 0; j < prog.inequalities.size(); ++j) {
    dobj += prog.inequalities[j].rhs * res.inequality_duals[static_cast<Eigen::Index>(j)];
  }
  res.primal_value = pobj;
  res.dual_value = dobj;
  const KktReport k = kkt_report(prog, res);
  res.stats.iterations = sol["iterations"].get<int>();
  res.stats.primal_residual = k.primal_residual;
  res.stats.dual_residual = k.dual_residual;
  res.stats.gap = k.gap;
  res.stats.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace peakbound
