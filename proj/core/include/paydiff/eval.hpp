#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "paydiff/dataset.hpp"
#include "paydiff/diffusion/sampler.hpp"
#include "paydiff/planners.hpp"

namespace paydiff {

/// A planner under evaluation. `plan` gets the problem, the payload and a
/// per-problem seed. `candidates`, when set, returns n independent samples
/// for best-of-n scoring.
struct PlannerSpec {
  std::string name;
  std::function<PlannerResult(const Problem&, double payload, std::uint64_t seed)> plan;
  std::function<std::vector<Trajectory>(const Problem&, double payload, std::uint64_t seed, int n)> candidates;
};

PlannerSpec diffusion_planner(std::string name, const DiffusionCheckpoint& checkpoint, const RobotModel& model,
                              const CollisionProxySet& proxies, const SamplerConfig& config);
PlannerSpec plan_and_filter_planner(std::string name, const RobotModel& model, const CollisionProxySet& proxies,
                                    const PlanFilterConfig& config);
PlannerSpec kinodynamic_planner(std::string name, const RobotModel& model, const CollisionProxySet& proxies,
                                const KinodynamicConfig& config);
PlannerSpec sqp_planner(std::string name, const RobotModel& model, const CollisionProxySet& proxies, double duration,
                        const SqpConfig& config);

struct BenchConfig {
  std::uint64_t seed = 0;
  std::string reference = "ddim";  // planner the time factors are taken against
  int best_of = 0;                 // > 1 also scores best-of-n for planners with candidates
  Tolerances tolerances;
};

struct BenchEntry {
  std::string planner;
  double payload = 0.0;
  int problems = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_time = 0.0;  // s
  double std_time = 0.0;
  double cv_time = 0.0;    // std / mean
  std::optional<double> time_factor;              // mean_time / reference mean_time
  std::optional<double> relative_success_change;  // (rate - reference rate) / reference rate
  std::optional<double> best_of_rate;
  std::vector<double> times;     // per problem
  std::vector<std::string> outcomes;  // "valid", planner status, or the failing checks
};

struct BenchReport {
  std::uint64_t seed = 0;
  std::string reference;
  int best_of = 0;
  std::vector<BenchEntry> entries;

  /// Throws DomainError when absent.
  const BenchEntry& entry(const std::string& planner, double payload) const;
};

/// Runs every planner on every problem at every payload. Success means the
/// first returned trajectory passes the validity gate at that payload. Time is
/// wall clock around the planner call. Problem i uses seed derive_seed(seed, i).
BenchReport benchmark(const RobotModel& model, const CollisionProxySet& proxies,
                      const std::vector<PlannerSpec>& planners, const std::vector<Problem>& problems,
                      const std::vector<double>& payloads, const BenchConfig& config = {},
                      const std::function<void(const std::string&, double, int)>& progress = {});

// --------------------------------------------------------------------------
// Workspace accessibility

/// Cells partition `bounds`; axes with zero extent get one cell.
struct GridSpec {
  Region bounds;
  int nx = 1, ny = 1, nz = 1;

  int cells() const { return nx * ny * nz; }
  Region cell(int index) const;
  /// Bounding box of the pick and place regions.
  static GridSpec defaults(const RobotModel& model);
};

/// Straight up for the planar arms, the middle of the joint ranges otherwise.
Vector home_configuration(const RobotModel& model);

struct AccessibilityConfig {
  GridSpec grid;
  Vector home;  // empty: home_configuration(model)
  int attempts_per_cell = 5;
  int max_rejections = 20000;  // per cell goal sampling
  std::uint64_t seed = 0;
  Tolerances tolerances;
};

struct AccessibilityMap {
  double payload = 0.0;
  std::vector<int> reachable;   // per cell: a collision-free goal configuration exists
  std::vector<int> accessible;  // per cell: some attempt passed the gate
  int accessible_count() const;
};

struct AccessibilityReport {
  GridSpec grid;
  std::vector<AccessibilityMap> maps;  // one per payload, in request order
  std::vector<double> fractions;       // accessible at payload and at 0, over accessible at 0
  std::uint64_t seed = 0;
};

/// Plans from the home state to one goal per cell with `attempts_per_cell`
/// seeds (derive_seed(cell seed, attempt)). Payload 0 is always evaluated and
/// serves as the denominator. Throws DomainError on an empty grid.
AccessibilityReport workspace_accessibility(const RobotModel& model, const CollisionProxySet& proxies,
                                            const Scene& scene, const PlannerSpec& planner,
                                            const std::vector<double>& payloads, const AccessibilityConfig& config);

// --------------------------------------------------------------------------
// Reports

enum class ReportFormat { csv, json, svg };
ReportFormat parse_report_format(const std::string& s);

nlohmann::json bench_to_json(const BenchReport& report);
nlohmann::json accessibility_to_json(const AccessibilityReport& report);

/// Writes one file; the extension is not altered. Throws DomainError on an
/// empty report and Error when the path cannot be written.
void emit_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path);
void emit_report(const AccessibilityReport& report, ReportFormat format, const std::filesystem::path& path);

/// Reads the summary columns written by the csv report.
BenchReport load_bench_csv(const std::filesystem::path& path);

/// Flat "name@payload:metric" view used by criteria files, e.g.
/// "ddim@0:success_rate" or "workspace@6:fraction".
std::map<std::string, double> report_metrics(const BenchReport& report);
std::map<std::string, double> report_metrics(const AccessibilityReport& report);

struct CriterionOutcome {
  std::string metric;
  std::optional<double> value;  // absent when the metric is missing
  bool pass = false;
  std::string rule;
};

/// Criteria file: {"criteria": [{"metric": "...", "min": x, "max": y}, ...]}.
/// A missing metric fails its rule.
std::vector<CriterionOutcome> check_criteria(const std::map<std::string, double>& metrics,
                                             const nlohmann::json& criteria);

}  // namespace paydiff
