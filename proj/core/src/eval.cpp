#include "paydiff/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "paydiff/dynamics.hpp"

namespace paydiff {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PlannerResult timed(const std::function<Trajectory()>& f) {
  PlannerResult r;
  const auto t0 = std::chrono::steady_clock::now();
  r.trajectory = f();
  r.planning_time = seconds_since(t0);
  r.status = PlannerStatus::success;
  return r;
}

std::string payload_str(double p) {
  std::ostringstream s;
  s << p;
  return s.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

// --------------------------------------------------------------------------
// Planner adapters

PlannerSpec diffusion_planner(std::string name, const DiffusionCheckpoint& checkpoint, const RobotModel& model,
                              const CollisionProxySet& proxies, const SamplerConfig& config) {
  PlannerSpec s;
  s.name = std::move(name);
  s.plan = [&checkpoint, &model, &proxies, config](const Problem& p, double payload, std::uint64_t seed) {
    return timed([&] {
      return sample_trajectory(checkpoint, model, proxies, {p.start, p.goal, payload, &p.scene}, config, seed);
    });
  };
  s.candidates = [&checkpoint, &model, &proxies, config](const Problem& p, double payload, std::uint64_t seed, int n) {
    return sample_trajectories(checkpoint, model, proxies, {p.start, p.goal, payload, &p.scene}, config, n, seed);
  };
  return s;
}

PlannerSpec plan_and_filter_planner(std::string name, const RobotModel& model, const CollisionProxySet& proxies,
                                    const PlanFilterConfig& config) {
  PlannerSpec s;
  s.name = std::move(name);
  s.plan = [&model, &proxies, config](const Problem& p, double payload, std::uint64_t seed) {
    PlanFilterConfig c = config;
    c.rrt.seed = seed;
    c.rrt.halton_offset = config.rrt.halton_offset + seed % 100003;
    return plan_and_filter(model, proxies, p, payload, c);
  };
  return s;
}

PlannerSpec kinodynamic_planner(std::string name, const RobotModel& model, const CollisionProxySet& proxies,
                                const KinodynamicConfig& config) {
  PlannerSpec s;
  s.name = std::move(name);
  s.plan = [&model, &proxies, config](const Problem& p, double payload, std::uint64_t seed) {
    KinodynamicConfig c = config;
    c.seed = seed;
    return kinodynamic_rrt(model, proxies, p, payload, c);
  };
  return s;
}

PlannerSpec sqp_planner(std::string name, const RobotModel& model, const CollisionProxySet& proxies, double duration,
                        const SqpConfig& config) {
  PlannerSpec s;
  s.name = std::move(name);
  s.plan = [&model, &proxies, duration, config](const Problem& p, double payload, std::uint64_t) {
    return sqp_optimize(model, proxies, p, payload, duration, std::nullopt, config);
  };
  return s;
}

// --------------------------------------------------------------------------
// Benchmark

const BenchEntry& BenchReport::entry(const std::string& planner, double payload) const {
  for (const auto& e : entries)
    if (e.planner == planner && e.payload == payload) return e;
  throw DomainError("report has no entry for " + planner + " at payload " + payload_str(payload));
}

BenchReport benchmark(const RobotModel& model, const CollisionProxySet& proxies,
                      const std::vector<PlannerSpec>& planners, const std::vector<Problem>& problems,
                      const std::vector<double>& payloads, const BenchConfig& config,
                      const std::function<void(const std::string&, double, int)>& progress) {
  if (planners.empty()) throw DomainError("benchmark: no planners");
  if (payloads.empty()) throw DomainError("benchmark: no payloads");
  if (problems.empty()) throw DomainError("benchmark: no problems");
  BenchReport report;
  report.seed = config.seed;
  report.reference = config.reference;
  report.best_of = config.best_of;

  for (const PlannerSpec& planner : planners) {
    if (!planner.plan) throw DomainError("benchmark: planner " + planner.name + " has no plan function");
    for (double payload : payloads) {
      BenchEntry e;
      e.planner = planner.name;
      e.payload = payload;
      e.problems = static_cast<int>(problems.size());
      int best = 0;
      for (std::size_t i = 0; i < problems.size(); ++i) {
        const Problem& pr = problems[i];
        const std::uint64_t seed = derive_seed(config.seed, i);
        const auto t0 = std::chrono::steady_clock::now();
        const PlannerResult r = planner.plan(pr, payload, seed);
        e.times.push_back(seconds_since(t0));
        std::string outcome = to_string(r.status);
        if (r.ok()) {
          const ValidityReport v = validate(model, proxies, pr, *r.trajectory, payload, config.tolerances);
          outcome = v.valid ? "valid" : v.failures();
        }
        e.successes += outcome == "valid";
        e.outcomes.push_back(outcome);
        if (config.best_of > 1 && planner.candidates) {
          for (const Trajectory& t : planner.candidates(pr, payload, seed, config.best_of)) {
            if (validate(model, proxies, pr, t, payload, config.tolerances).valid) {
              ++best;
              break;
            }
          }
        }
        if (progress) progress(planner.name, payload, static_cast<int>(i) + 1);
      }
      e.success_rate = static_cast<double>(e.successes) / e.problems;
      double sum = 0.0, sq = 0.0;
      for (double t : e.times) sum += t;
      e.mean_time = sum / e.problems;
      for (double t : e.times) sq += (t - e.mean_time) * (t - e.mean_time);
      e.std_time = e.problems > 1 ? std::sqrt(sq / (e.problems - 1)) : 0.0;
      e.cv_time = e.mean_time > 0.0 ? e.std_time / e.mean_time : 0.0;
      if (config.best_of > 1 && planner.candidates) e.best_of_rate = static_cast<double>(best) / e.problems;
      report.entries.push_back(std::move(e));
    }
  }
  for (BenchEntry& e : report.entries) {
    const auto ref = std::find_if(report.entries.begin(), report.entries.end(), [&](const BenchEntry& r) {
      return r.planner == config.reference && r.payload == e.payload;
    });
    if (ref == report.entries.end()) continue;
    if (ref->mean_time > 0.0) e.time_factor = e.mean_time / ref->mean_time;
    if (ref->success_rate > 0.0) e.relative_success_change = (e.success_rate - ref->success_rate) / ref->success_rate;
  }
  return report;
}

// --------------------------------------------------------------------------
// Workspace accessibility

Region GridSpec::cell(int index) const {
  if (index < 0 || index >= cells()) throw DomainError("grid cell index out of range");
  const int ix = index % nx, iy = (index / nx) % ny, iz = index / (nx * ny);
  const Vector3 step = (bounds.hi - bounds.lo).cwiseQuotient(Vector3(nx, ny, nz));
  Region r;
  r.lo = bounds.lo + step.cwiseProduct(Vector3(ix, iy, iz));
  r.hi = r.lo + step;
  return r;
}

GridSpec GridSpec::defaults(const RobotModel& model) {
  const WorkspaceSpec ws = WorkspaceSpec::defaults(model);
  GridSpec g;
  g.bounds.lo = ws.pick.lo.cwiseMin(ws.place.lo);
  g.bounds.hi = ws.pick.hi.cwiseMax(ws.place.hi);
  const Vector3 ext = g.bounds.hi - g.bounds.lo;
  auto count = [](double extent, double size) { return extent > 0.0 ? std::max(1, int(std::ceil(extent / size - 1e-9))) : 1; };
  const double size = std::max(ext.maxCoeff() / 12.0, 1e-3);
  g.nx = count(ext.x(), size);
  g.ny = count(ext.y(), size);
  g.nz = count(ext.z(), size);
  return g;
}

Vector home_configuration(const RobotModel& model) {
  Vector q = 0.5 * (model.q_min() + model.q_max());
  if (model.name() == "planar2" || model.name() == "planar3") {
    q.setZero();
    q[0] = std::numbers::pi / 2.0;
  }
  return q;
}

int AccessibilityMap::accessible_count() const {
  return static_cast<int>(std::count(accessible.begin(), accessible.end(), 1));
}

AccessibilityReport workspace_accessibility(const RobotModel& model, const CollisionProxySet& proxies,
                                            const Scene& scene, const PlannerSpec& planner,
                                            const std::vector<double>& payloads, const AccessibilityConfig& config) {
  const GridSpec& grid = config.grid;
  if (grid.nx < 1 || grid.ny < 1 || grid.nz < 1 || grid.cells() < 1) throw DomainError("workspace: empty grid");
  if ((grid.bounds.hi.array() < grid.bounds.lo.array()).any()) throw DomainError("workspace: inverted grid bounds");
  if (config.attempts_per_cell < 1) throw DomainError("workspace: attempts_per_cell must be >= 1");
  for (double p : payloads)
    if (!(p >= 0.0)) throw DomainError("workspace: payloads must be non-negative");
  const Vector home = config.home.size() ? config.home : home_configuration(model);
  require_dim(home.size(), model.n_dof(), "workspace home");
  if (in_collision(model, proxies, scene, home)) throw DomainError("workspace: home configuration in collision");

  WorkspaceSpec ws = WorkspaceSpec::defaults(model);
  ws.max_rejections = config.max_rejections;
  const int n = grid.cells();
  std::vector<std::optional<Problem>> goals(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(c)));
    try {
      Problem p;
      p.start = home;
      p.goal = sample_configuration(model, proxies, scene, grid.cell(c), ws, rng);
      p.scene = scene;
      p.id = static_cast<std::uint64_t>(c);
      goals[static_cast<std::size_t>(c)] = std::move(p);
    } catch (const DomainError&) {
    }
  }

  auto evaluate = [&](double payload) {
    AccessibilityMap m;
    m.payload = payload;
    m.reachable.assign(static_cast<std::size_t>(n), 0);
    m.accessible.assign(static_cast<std::size_t>(n), 0);
    for (int c = 0; c < n; ++c) {
      const auto& goal = goals[static_cast<std::size_t>(c)];
      if (!goal) continue;
      m.reachable[static_cast<std::size_t>(c)] = 1;
      const std::uint64_t cell_seed = derive_seed(config.seed ^ 0xA5A5A5A5ULL, static_cast<std::uint64_t>(c));
      for (int a = 0; a < config.attempts_per_cell; ++a) {
        const PlannerResult r = planner.plan(*goal, payload, derive_seed(cell_seed, static_cast<std::uint64_t>(a)));
        if (r.ok() && validate(model, proxies, *goal, *r.trajectory, payload, config.tolerances).valid) {
          m.accessible[static_cast<std::size_t>(c)] = 1;
          break;
        }
      }
    }
    return m;
  };

  AccessibilityReport rep;
  rep.grid = grid;
  rep.seed = config.seed;
  std::optional<AccessibilityMap> base;
  for (double p : payloads)
    if (p == 0.0) base = evaluate(0.0);
  if (!base) base = evaluate(0.0);
  const int denom = base->accessible_count();
  for (double p : payloads) {
    AccessibilityMap m = p == 0.0 ? *base : evaluate(p);
    int num = 0;
    for (int c = 0; c < n; ++c) num += m.accessible[static_cast<std::size_t>(c)] && base->accessible[static_cast<std::size_t>(c)];
    rep.fractions.push_back(denom > 0 ? static_cast<double>(num) / denom : 0.0);
    rep.maps.push_back(std::move(m));
  }
  return rep;
}

// --------------------------------------------------------------------------
// Reports

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "svg") return ReportFormat::svg;
  throw DomainError("unknown report format '" + s + "' (csv, json, svg)");
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string opt_csv(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(10);
  s << *v;
  return s.str();
}

const char* const kCsvHeader =
    "planner,payload,problems,successes,success_rate,mean_time,std_time,cv_time,time_factor,"
    "relative_success_change,best_of_rate";

// Bars grouped by payload, one bar per series.
void write_svg_bars(std::ostream& out, const std::string& title, const std::vector<double>& groups,
                    const std::vector<std::string>& series, const std::function<double(std::size_t, std::size_t)>& value) {
  const double bar = 18.0, gap = 14.0, left = 50.0, top = 40.0, height = 200.0;
  const double group_w = bar * static_cast<double>(series.size()) + gap;
  const double width = left + group_w * static_cast<double>(groups.size()) + 160.0;
  static const char* palette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + height + 50
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width - 150 << "\" y2=\"" << top + height
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = top + height - height * t / 4.0;
    out << "<text x=\"" << left - 30 << "\" y=\"" << y + 4 << "\">" << t * 25 << "%</text>\n";
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double x0 = left + gap / 2 + group_w * static_cast<double>(gi);
    out << "<g class=\"payload\" data-payload=\"" << groups[gi] << "\">\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
      const double v = std::clamp(value(gi, si), 0.0, 1.0);
      out << "  <rect x=\"" << x0 + bar * static_cast<double>(si) << "\" y=\"" << top + height * (1.0 - v)
          << "\" width=\"" << bar - 2 << "\" height=\"" << height * v << "\" fill=\"" << palette[si % 7]
          << "\"><title>" << series[si] << " " << groups[gi] << " kg: " << v << "</title></rect>\n";
    }
    out << "  <text x=\"" << x0 << "\" y=\"" << top + height + 16 << "\">" << groups[gi] << " kg</text>\n</g>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double y = top + 14.0 * static_cast<double>(si);
    out << "<rect x=\"" << width - 140 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\"" << palette[si % 7]
        << "\"/><text x=\"" << width - 125 << "\" y=\"" << y + 9 << "\">" << series[si] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace

nlohmann::json bench_to_json(const BenchReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"planner", e.planner},
                       {"payload", e.payload},
                       {"problems", e.problems},
                       {"successes", e.successes},
                       {"success_rate", e.success_rate},
                       {"mean_time", e.mean_time},
                       {"std_time", e.std_time},
                       {"cv_time", e.cv_time},
                       {"time_factor", opt(e.time_factor)},
                       {"relative_success_change", opt(e.relative_success_change)},
                       {"best_of_rate", opt(e.best_of_rate)},
                       {"times", e.times},
                       {"outcomes", e.outcomes}});
  }
  return {{"seed", report.seed}, {"reference", report.reference}, {"best_of", report.best_of}, {"entries", entries}};
}

nlohmann::json accessibility_to_json(const AccessibilityReport& report) {
  nlohmann::json maps = nlohmann::json::array();
  for (std::size_t i = 0; i < report.maps.size(); ++i) {
    const auto& m = report.maps[i];
    maps.push_back({{"payload", m.payload},
                    {"fraction", report.fractions[i]},
                    {"accessible_cells", m.accessible_count()},
                    {"reachable", m.reachable},
                    {"accessible", m.accessible}});
  }
  const auto& g = report.grid;
  return {{"seed", report.seed},
          {"grid",
           {{"lo", {g.bounds.lo.x(), g.bounds.lo.y(), g.bounds.lo.z()}},
            {"hi", {g.bounds.hi.x(), g.bounds.hi.y(), g.bounds.hi.z()}},
            {"cells", {g.nx, g.ny, g.nz}}}},
          {"payloads", maps}};
}

void emit_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path) {
  if (report.entries.empty()) throw DomainError("emit_report: empty report");
  std::ofstream out = open_out(path);
  switch (format) {
    case ReportFormat::json:
      out << bench_to_json(report).dump(2) << "\n";
      break;
    case ReportFormat::csv: {
      out << "# seed " << report.seed << "\n" << kCsvHeader << "\n";
      out.precision(10);
      for (const auto& e : report.entries) {
        out << e.planner << ',' << e.payload << ',' << e.problems << ',' << e.successes << ',' << e.success_rate << ','
            << e.mean_time << ',' << e.std_time << ',' << e.cv_time << ',' << opt_csv(e.time_factor) << ','
            << opt_csv(e.relative_success_change) << ',' << opt_csv(e.best_of_rate) << "\n";
      }
      break;
    }
    case ReportFormat::svg: {
      std::vector<double> payloads;
      std::vector<std::string> planners;
      for (const auto& e : report.entries) {
        if (std::find(payloads.begin(), payloads.end(), e.payload) == payloads.end()) payloads.push_back(e.payload);
        if (std::find(planners.begin(), planners.end(), e.planner) == planners.end()) planners.push_back(e.planner);
      }
      write_svg_bars(out, "success rate by payload (seed " + std::to_string(report.seed) + ")", payloads, planners,
                     [&](std::size_t g, std::size_t s) {
                       for (const auto& e : report.entries)
                         if (e.planner == planners[s] && e.payload == payloads[g]) return e.success_rate;
                       return 0.0;
                     });
      break;
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

void emit_report(const AccessibilityReport& report, ReportFormat format, const std::filesystem::path& path) {
  if (report.maps.empty()) throw DomainError("emit_report: empty report");
  std::ofstream out = open_out(path);
  switch (format) {
    case ReportFormat::json:
      out << accessibility_to_json(report).dump(2) << "\n";
      break;
    case ReportFormat::csv:
      out << "# seed " << report.seed << "\npayload,fraction,accessible_cells,reachable_cells\n";
      for (std::size_t i = 0; i < report.maps.size(); ++i) {
        const auto& m = report.maps[i];
        out << m.payload << ',' << report.fractions[i] << ',' << m.accessible_count() << ','
            << std::count(m.reachable.begin(), m.reachable.end(), 1) << "\n";
      }
      break;
    case ReportFormat::svg: {
      std::vector<double> payloads;
      for (const auto& m : report.maps) payloads.push_back(m.payload);
      write_svg_bars(out, "accessible workspace fraction (seed " + std::to_string(report.seed) + ")", payloads,
                     {"workspace"}, [&](std::size_t g, std::size_t) { return report.fractions[g]; });
      break;
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

BenchReport load_bench_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  BenchReport r;
  std::string line;
  bool header = false;
  auto opt_field = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# seed ", 0) == 0) {
      r.seed = std::stoull(line.substr(7));
      continue;
    }
    if (!header) {
      if (line != kCsvHeader) throw FormatError("unexpected csv header in " + path.string());
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 11) throw FormatError("bad csv row: " + line);
    try {
      BenchEntry e;
      e.planner = f[0];
      e.payload = std::stod(f[1]);
      e.problems = std::stoi(f[2]);
      e.successes = std::stoi(f[3]);
      e.success_rate = std::stod(f[4]);
      e.mean_time = std::stod(f[5]);
      e.std_time = std::stod(f[6]);
      e.cv_time = std::stod(f[7]);
      e.time_factor = opt_field(f[8]);
      e.relative_success_change = opt_field(f[9]);
      e.best_of_rate = opt_field(f[10]);
      r.entries.push_back(std::move(e));
    } catch (const std::logic_error&) {
      throw FormatError("bad csv row: " + line);
    }
  }
  if (!header) throw FormatError("missing csv header in " + path.string());
  return r;
}

std::map<std::string, double> report_metrics(const BenchReport& report) {
  std::map<std::string, double> m;
  for (const auto& e : report.entries) {
    const std::string key = e.planner + "@" + payload_str(e.payload) + ":";
    m[key + "success_rate"] = e.success_rate;
    m[key + "mean_time"] = e.mean_time;
    m[key + "std_time"] = e.std_time;
    m[key + "cv_time"] = e.cv_time;
    if (e.time_factor) m[key + "time_factor"] = *e.time_factor;
    if (e.relative_success_change) m[key + "relative_success_change"] = *e.relative_success_change;
    if (e.best_of_rate) m[key + "best_of_rate"] = *e.best_of_rate;
  }
  return m;
}

std::map<std::string, double> report_metrics(const AccessibilityReport& report) {
  std::map<std::string, double> m;
  for (std::size_t i = 0; i < report.maps.size(); ++i) {
    const std::string key = "workspace@" + payload_str(report.maps[i].payload) + ":";
    m[key + "fraction"] = report.fractions[i];
    m[key + "accessible_cells"] = report.maps[i].accessible_count();
  }
  return m;
}

std::vector<CriterionOutcome> check_criteria(const std::map<std::string, double>& metrics,
                                             const nlohmann::json& criteria) {
  if (!criteria.contains("criteria") || !criteria["criteria"].is_array())
    throw FormatError("criteria file needs a \"criteria\" array");
  std::vector<CriterionOutcome> out;
  for (const auto& c : criteria["criteria"]) {
    CriterionOutcome o;
    o.metric = c.at("metric").get<std::string>();
    if (!c.contains("min") && !c.contains("max")) throw FormatError("criterion " + o.metric + " has no bound");
    std::ostringstream rule;
    if (c.contains("min")) rule << ">= " << c["min"].get<double>();
    if (c.contains("max")) rule << (c.contains("min") ? " and " : "") << "<= " << c["max"].get<double>();
    o.rule = rule.str();
    const auto it = metrics.find(o.metric);
    if (it != metrics.end()) {
      o.value = it->second;
      o.pass = (!c.contains("min") || it->second >= c["min"].get<double>()) &&
               (!c.contains("max") || it->second <= c["max"].get<double>());
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace paydiff
