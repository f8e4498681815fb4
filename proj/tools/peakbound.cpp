// peakbound: certified peak bounds for uncertain polynomial systems.
//
//   peakbound bound    problem.json [--order d] [--backend embedded|external] [--out report.json]
//   peakbound safety   problem.json [--order d] ...
//   peakbound sample   problem.json [--samples N] [--seed s] [--out prefix]
//   peakbound plotdata report.json... [--out dir]
//   peakbound export   problem.json --order d [--format json|sdpa] --out file
//
// Exit codes: 0 success, 2 parse error, 3 invalid problem, 4 solver failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "peakbound/bound.hpp"
#include "peakbound/problem_io.hpp"
#include "peakbound/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace peakbound;

namespace {

constexpr int kParse = 2;
constexpr int kInvalid = 3;
constexpr int kSolver = 4;

struct CommonArgs {
  std::string problem;
  int order = 0;
  std::string backend = "embedded";
  std::string out;
  bool sqrt = false;
  int samples = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool verbose = false;
};

struct Failure {
  int code;
  std::string message;
};

ProblemFile load_valid(const std::string& path) {
  ProblemFile pf;
  try {
    pf = load_problem(path);
  } catch (const ParseError& e) {
    throw Failure{kParse, e.what()};
  }
  const auto diags = validate(pf.sys);
  for (const auto& d : diags) {
    std::cerr << (d.severity == Severity::error ? "error" : "warning") << " [" << d.code << "] " << d.message << "\n";
  }
  if (has_errors(diags)) throw Failure{kInvalid, "problem failed validation"};
  return pf;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw Failure{kParse, "cannot write " + path};
  f << j.dump(2) << "\n";
}

int resolve_order(const CommonArgs& a, const ProblemFile& pf) {
  if (a.order > 0) return a.order;
  if (pf.options.order) return *pf.options.order;
  throw Failure{kParse, "no relaxation order: pass --order or set options.order"};
}

int run_bound(const CommonArgs& a, bool safety) {
  ProblemFile pf = load_valid(a.problem);
  if (safety && pf.sys.objective_mode != ObjectiveMode::maximin) {
    throw Failure{kInvalid, "safety needs objective_mode \"maximin\""};
  }
  if (a.sqrt) pf.options.sqrt_report = true;
  if (a.seed_set) pf.options.seed = a.seed;
  if (a.samples >= 0) pf.options.samples = a.samples;
  const int d = resolve_order(a, pf);

  BoundOptions opt;
  opt.solver.backend = a.backend;
  opt.solver.verbose = a.verbose;
  opt.ranges = pf.options.scale;
  BoundResult res;
  try {
    res = compute_bound(pf.sys, d, opt);
  } catch (const std::invalid_argument& e) {
    throw Failure{kInvalid, e.what()};
  } catch (const PolyError& e) {
    throw Failure{kInvalid, e.what()};
  }

  std::optional<SamplingSummary> sampling;
  std::optional<double> liouville;
  if (pf.options.samples > 0) {
    const auto records = sample_trajectories(pf.sys, policy_from(pf.options));
    sampling = summarize(records);
    const EmpiricalPeak e = empirical_peak(records);
    if (e.argmax >= 0 && records[static_cast<std::size_t>(e.argmax)].complete) {
      liouville = liouville_residual(pf.sys, records[static_cast<std::size_t>(e.argmax)], d, &res.scaling);
    }
  }
  json report = make_report(pf, res, sampling, liouville);
  report["problem_file"] = fs::absolute(a.problem).string();
  write_json(a.out, report);

  std::cerr << pf.sys.name << ": order " << d << " " << to_string(res.status) << " bound " << res.bound;
  if (pf.options.sqrt_report) std::cerr << " (sqrt " << sqrt_report_value(res.bound, pf.options) << pf.options.unit << ")";
  if (sampling) std::cerr << ", empirical max " << sampling->empirical_max;
  if (safety) std::cerr << ", " << report["safety"].get<std::string>();
  std::cerr << "\n";
  if (!res.usable()) {
    std::cerr << "solver: " << res.message << "\n";
    return kSolver;
  }
  return 0;
}

int run_sample(const CommonArgs& a) {
  ProblemFile pf = load_valid(a.problem);
  if (a.seed_set) pf.options.seed = a.seed;
  if (a.samples >= 0) pf.options.samples = a.samples;
  const auto records = sample_trajectories(pf.sys, policy_from(pf.options));
  const SamplingSummary s = summarize(records);
  json summary = to_json(s);
  summary["schema"] = kSchema;
  summary["problem"] = pf.sys.name;
  summary["seed"] = pf.options.seed;
  if (pf.options.sqrt_report) summary["sqrt_empirical_max"] = sqrt_report_value(s.empirical_max, pf.options);
  json diags = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].complete) diags.push_back({{"traj", i}, {"diagnostic", records[i].diagnostic}});
  }
  summary["diagnostics"] = diags;
  if (a.out.empty()) {
    write_csv(std::cout, pf.sys, records);
  } else {
    std::ofstream csv(a.out + ".csv");
    if (!csv) throw Failure{kParse, "cannot write " + a.out + ".csv"};
    write_csv(csv, pf.sys, records);
    write_json(a.out + ".summary.json", summary);
  }
  std::cerr << pf.sys.name << ": " << s.num << " trajectories, empirical max " << s.empirical_max << " ("
            << s.incomplete << " incomplete)\n";
  return 0;
}

// Level-set grid of v - gamma over time and the state box, plus trajectory
// overlays with the value of v - gamma along each point.
int run_plotdata(const std::vector<std::string>& reports, const std::string& out_dir, int grid, int samples) {
  if (reports.empty()) throw Failure{kParse, "no reports given"};
  fs::create_directories(out_dir.empty() ? "." : out_dir);
  for (const auto& path : reports) {
    json rep;
    {
      std::ifstream f(path);
      if (!f) throw Failure{kParse, "cannot open " + path};
      try {
        f >> rep;
      } catch (const json::exception& e) {
        throw Failure{kParse, path + ": " + e.what()};
      }
    }
    if (!rep.contains("problem_file")) throw Failure{kParse, path + ": report names no problem file"};
    ProblemFile pf = load_valid(rep["problem_file"].get<std::string>());
    const UncertainSystem& sys = pf.sys;
    const VarLayout& L = sys.layout;
    const std::string stem = (fs::path(out_dir.empty() ? "." : out_dir) / fs::path(path).stem()).string();

    std::optional<Polynomial> v;
    double gamma = 0.0;
    if (rep.contains("certificate")) {
      v = poly_from_json(rep["certificate"]["v"], L);
      gamma = rep["certificate"]["gamma"].get<double>();
    } else {
      std::cerr << "warning: " << path << " has no certificate; writing trajectories only\n";
    }

    SamplePolicy pol = policy_from(pf.options);
    pol.num_trajectories = samples;
    const auto records = sample_trajectories(sys, pol);
    std::vector<double> theta_mid(static_cast<std::size_t>(L.ntheta), 0.0);
    if (auto tb = infer_box(sys.Theta, L)) {
      for (int l = 0; l < L.ntheta; ++l) theta_mid[static_cast<std::size_t>(l)] = 0.5 * ((*tb)[l].first + (*tb)[l].second);
    }

    double worst = -std::numeric_limits<double>::infinity();
    {
      std::ofstream f(stem + "_trajectories.csv");
      f << "traj,t";
      for (int i = 0; i < L.nx; ++i) f << ",x" << i + 1;
      for (int i = 0; i < L.ntheta; ++i) f << ",th" << i + 1;
      f << ",value" << (v ? ",v_minus_gamma" : "") << "\n";
      char buf[40];
      for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        for (std::size_t j = 0; j < rec.states.size(); ++j) {
          std::vector<double> p(static_cast<std::size_t>(L.size()), 0.0);
          p[0] = rec.times[j];
          std::copy(rec.states[j].begin(), rec.states[j].end(), p.begin() + 1);
          std::copy(rec.theta.begin(), rec.theta.end(), p.begin() + L.offset(Block::theta));
          f << r;
          for (int i = 0; i < 1 + L.nx + L.ntheta; ++i) {
            std::snprintf(buf, sizeof buf, ",%.10g", p[static_cast<std::size_t>(i)]);
            f << buf;
          }
          std::snprintf(buf, sizeof buf, ",%.10g", rec.values[j]);
          f << buf;
          if (v) {
            const double g = v->eval(p) - gamma;
            worst = std::max(worst, g);
            std::snprintf(buf, sizeof buf, ",%.10g", g);
            f << buf;
          }
          f << "\n";
        }
      }
    }

    json bundle = {{"report", path}, {"trajectories", stem + "_trajectories.csv"}, {"num_trajectories", records.size()}};
    if (v) {
      const auto xbox = infer_box(sys.X, L);
      std::vector<std::pair<double, double>> box = pf.options.scale;
      if (box.empty() && xbox) box = *xbox;
      if (box.size() != static_cast<std::size_t>(L.nx)) {
        std::cerr << "warning: no state box for the level-set grid\n";
      } else {
        const int nt = sys.mode == Mode::continuous ? grid : 1;
        const int ng = L.nx <= 2 ? grid : std::max(5, static_cast<int>(std::cbrt(grid * grid * 1.0)));
        std::ofstream f(stem + "_levelset.csv");
        f << "t";
        for (int i = 0; i < L.nx; ++i) f << ",x" << i + 1;
        for (int i = 0; i < L.ntheta; ++i) f << ",th" << i + 1;
        f << ",v_minus_gamma\n";
        std::vector<int> idx(static_cast<std::size_t>(L.nx), 0);
        char buf[40];
        for (int it = 0; it < nt; ++it) {
          std::fill(idx.begin(), idx.end(), 0);
          while (true) {
            std::vector<double> p(static_cast<std::size_t>(L.size()), 0.0);
            p[0] = nt > 1 ? sys.horizon * it / (nt - 1) : 0.0;
            for (int i = 0; i < L.nx; ++i) {
              const auto [lo, hi] = box[static_cast<std::size_t>(i)];
              p[static_cast<std::size_t>(1 + i)] = lo + (hi - lo) * idx[static_cast<std::size_t>(i)] / (ng - 1);
            }
            std::copy(theta_mid.begin(), theta_mid.end(), p.begin() + L.offset(Block::theta));
            for (int i = 0; i < 1 + L.nx + L.ntheta; ++i) {
              std::snprintf(buf, sizeof buf, "%s%.8g", i ? "," : "", p[static_cast<std::size_t>(i)]);
              f << buf;
            }
            std::snprintf(buf, sizeof buf, ",%.8g\n", v->eval(p) - gamma);
            f << buf;
            int k = 0;
            while (k < L.nx && ++idx[static_cast<std::size_t>(k)] == ng) idx[static_cast<std::size_t>(k++)] = 0;
            if (k == L.nx) break;
          }
        }
        bundle["levelset"] = stem + "_levelset.csv";
      }
      bundle["max_v_minus_gamma_on_trajectories"] = worst;
      bundle["contained"] = worst <= 1e-6;
    }
    write_json(stem + "_bundle.json", bundle);
    std::cerr << path << " -> " << stem << "_*\n";
  }
  return 0;
}

int run_export(const CommonArgs& a, const std::string& format) {
  const ProblemFile pf = load_valid(a.problem);
  const int d = resolve_order(a, pf);
  const Scaling sc = pf.options.scale.empty() ? Scaling::time_only(pf.sys) : Scaling::from_ranges(pf.sys, pf.options.scale);
  const UncertainSystem in = sc.apply(pf.sys);
  const ConicProgram prog = assemble(in, plan(in, d));
  std::ofstream f(a.out);
  if (!f) throw Failure{kParse, "cannot write " + a.out};
  if (format == "sdpa") write_sdpa(prog, f);
  else f << to_json(prog).dump() << "\n";
  return 0;
}

void add_common(CLI::App* sub, CommonArgs& a, bool solver) {
  sub->add_option("problem", a.problem, "Problem file (JSON)")->required();
  if (solver) {
    sub->add_option("--order,-d", a.order, "Relaxation order d");
    sub->add_option("--backend", a.backend, "embedded or external")->check(CLI::IsMember({"embedded", "external"}));
    sub->add_flag("--sqrt", a.sqrt, "Report sqrt of the bound");
    sub->add_flag("--verbose,-v", a.verbose, "Print solver iterations");
  }
  sub->add_option("--samples", a.samples, "Number of sampled trajectories");
  sub->add_option("--seed", a.seed, "Sampling seed")->each([&](const std::string&) { a.seed_set = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified peak bounds for uncertain polynomial systems"};
  app.require_subcommand(1);
  CommonArgs a;
  std::vector<std::string> reports;
  std::string format = "json";
  int grid = 41;
  int plot_samples = 50;

  auto* bound = app.add_subcommand("bound", "Solve the order-d relaxation and write a report");
  add_common(bound, a, true);
  bound->add_option("--out,-o", a.out, "Report path (stdout if omitted)");
  auto* safety = app.add_subcommand("safety", "Maximin safety margin; certified safe iff the bound is negative");
  add_common(safety, a, true);
  safety->add_option("--out,-o", a.out, "Report path (stdout if omitted)");
  auto* sample = app.add_subcommand("sample", "Sample trajectories to CSV plus a summary");
  add_common(sample, a, false);
  sample->add_option("--out,-o", a.out, "Output prefix: <prefix>.csv and <prefix>.summary.json");
  auto* plot = app.add_subcommand("plotdata", "Level-set grids and trajectory overlays from reports");
  plot->add_option("reports", reports, "Report files");
  plot->add_option("--out,-o", a.out, "Output directory");
  plot->add_option("--grid", grid, "Grid points per axis");
  plot->add_option("--samples", plot_samples, "Trajectories in the overlay");
  auto* exp = app.add_subcommand("export", "Write the assembled program");
  exp->add_option("problem", a.problem, "Problem file (JSON)")->required();
  exp->add_option("--order,-d", a.order, "Relaxation order d");
  exp->add_option("--format", format, "json or sdpa")->check(CLI::IsMember({"json", "sdpa"}));
  exp->add_option("--out,-o", a.out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParse;
  }

  try {
    if (*bound) return run_bound(a, false);
    if (*safety) return run_bound(a, true);
    if (*sample) return run_sample(a);
    if (*plot) return run_plotdata(reports, a.out, grid, plot_samples);
    if (*exp) return run_export(a, format);
  } catch (const Failure& f) {
    std::cerr << "peakbound: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "peakbound: " << e.what() << "\n";
    return kSolver;
  }
  return 0;
}
