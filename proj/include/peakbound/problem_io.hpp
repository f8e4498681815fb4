#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "peakbound/bound.hpp"
#include "peakbound/model.hpp"
#include "peakbound/simulate.hpp"

namespace peakbound {

inline constexpr const char* kSchema = "peakbound/1";

/// Malformed JSON or a document that does not follow the schema.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProblemOptions {
  std::optional<int> order;
  std::vector<std::pair<double, double>> scale;  // state ranges, empty for none
  bool sqrt_report = false;
  /// "deg": the state is in radians and square-rooted values are reported in degrees.
  std::string unit;
  std::uint64_t seed = 1;
  int samples = 2000;
  double hold = 0.0;  // 0 means T/200
};

struct ProblemFile {
  UncertainSystem sys;
  ProblemOptions options;
};

/// Terms {c, e: {t, x: [...], th: [...], w: [...]}}; omitted blocks are zero.
Polynomial poly_from_json(const nlohmann::json& j, const VarLayout& layout);
nlohmann::json poly_to_json(const Polynomial& p);

ProblemFile problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const ProblemFile& pf);
/// Reads and parses a file; throws ParseError on any failure.
ProblemFile load_problem(const std::string& path);

struct SamplingSummary {
  int num = 0;
  int incomplete = 0;
  double empirical_max = 0.0;
  std::vector<double> argmax_x0;
  std::vector<double> argmax_theta;
  double argmax_time = 0.0;
};

SamplingSummary summarize(const std::vector<TrajectoryRecord>& records);
nlohmann::json to_json(const SamplingSummary& s);

/// sqrt(max(bound, 0)), converted to degrees when the unit hint asks for it.
double sqrt_report_value(double value, const ProblemOptions& opt);

/// Report of one bound run. Sampling summary and Liouville check are optional.
nlohmann::json make_report(const ProblemFile& pf, const BoundResult& res,
                           const std::optional<SamplingSummary>& sampling = std::nullopt,
                           std::optional<double> liouville = std::nullopt);

SamplePolicy policy_from(const ProblemOptions& opt);

}  // namespace peakbound
