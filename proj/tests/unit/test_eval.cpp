#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "paydiff/dynamics.hpp"
#include "paydiff/eval.hpp"

using namespace paydiff;

namespace {

struct World {
  RobotModel model = builtin_model("planar3");
  CollisionProxySet proxies = default_proxies(model);
  Scene scene = tabletop_scene(model);
  WorkspaceSpec workspace = WorkspaceSpec::defaults(model);
};

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("paydiff_eval_" + name);
}

std::string file_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PlannerSpec fixed_planner(std::string name, std::optional<Trajectory> traj) {
  PlannerSpec s;
  s.name = std::move(name);
  s.plan = [traj](const Problem&, double, std::uint64_t) {
    PlannerResult r;
    r.trajectory = traj;
    r.status = traj ? PlannerStatus::success : PlannerStatus::infeasible;
    return r;
  };
  return s;
}

Problem problem_for(const Trajectory& t, const Scene& scene) {
  Problem p;
  p.start = t.q(0);
  p.goal = t.q(t.horizon() - 1);
  p.scene = scene;
  return p;
}

}  // namespace

TEST_CASE("validity gate") {
  World w;
  DatasetConfig cfg;
  cfg.count = 12;
  cfg.seed = 8;
  cfg.workspace = w.workspace;
  const Dataset ds = generate_dataset(w.model, w.proxies, w.scene, cfg);
  for (const Sample& s : ds.samples) {
    const Problem p = problem_for(s.trajectory, w.scene);
    const ValidityReport at = validate(w.model, w.proxies, p, s.trajectory, s.m_max);
    CHECK(at.valid);
    CHECK(at.failures().empty());
    REQUIRE(at.checks.size() == 7);
    if (s.m_max + 1.0 <= kPayloadCap) {
      const ValidityReport above = validate(w.model, w.proxies, p, s.trajectory, s.m_max + 1.0);
      CHECK_FALSE(above.valid);
      CHECK(above.failures() == "torque");
    }
    // soundness: valid at m means valid at every lighter payload
    for (double m = std::floor(s.m_max); m >= 0.0; m -= 1.0)
      CHECK(validate(w.model, w.proxies, p, s.trajectory, m).valid);
  }

  const Trajectory& t = ds.samples.front().trajectory;
  Matrix st = t.states();
  st(20, 3) = 1.5 * w.model.v_max()[0];
  const Trajectory fast(3, t.dt(), st);
  const ValidityReport r = validate(w.model, w.proxies, problem_for(t, w.scene), fast, 0.0);
  CHECK_FALSE(r.valid);
  CHECK_FALSE(r.check("velocity_limits").pass);
  CHECK(r.check("velocity_limits").margin < 0.0);
  CHECK(r.failures().find("velocity_limits") != std::string::npos);
  CHECK_THROWS_AS(r.check("nonsense"), DomainError);
}

TEST_CASE("benchmark") {
  World w;
  const auto problems = problem_suite(w.model, w.proxies, w.scene, w.workspace, 6, 3);
  PlanFilterConfig pf;
  const std::vector<PlannerSpec> planners{fixed_planner("never", std::nullopt),
                                          plan_and_filter_planner("pf", w.model, w.proxies, pf)};
  BenchConfig bc;
  bc.reference = "pf";
  bc.seed = 5;
  const BenchReport rep = benchmark(w.model, w.proxies, planners, problems, {0.0, 6.0}, bc);
  REQUIRE(rep.entries.size() == 4);
  const BenchEntry& never = rep.entry("never", 0.0);
  CHECK(never.success_rate == 0.0);
  CHECK(never.successes == 0);
  CHECK(never.outcomes.front() == "infeasible");
  const BenchEntry& ref = rep.entry("pf", 0.0);
  CHECK(ref.success_rate == 1.0);
  CHECK(*ref.time_factor == doctest::Approx(1.0));
  CHECK(*never.time_factor == doctest::Approx(never.mean_time / ref.mean_time));
  CHECK(*never.relative_success_change == doctest::Approx(-1.0));
  for (const auto& e : rep.entries) {
    CHECK(e.success_rate >= 0.0);
    CHECK(e.success_rate <= 1.0);
    CHECK(e.times.size() == problems.size());
    if (e.time_factor) CHECK(*e.time_factor > 0.0);
  }
  CHECK_THROWS_AS(rep.entry("pf", 3.0), DomainError);

  const BenchReport again = benchmark(w.model, w.proxies, planners, problems, {0.0, 6.0}, bc);
  for (std::size_t i = 0; i < rep.entries.size(); ++i) CHECK(again.entries[i].outcomes == rep.entries[i].outcomes);

  CHECK_THROWS_AS(benchmark(w.model, w.proxies, {}, problems, {0.0}), DomainError);
  CHECK_THROWS_AS(benchmark(w.model, w.proxies, planners, problems, {}), DomainError);

  SUBCASE("best of n") {
    const DiffusionCheckpoint ck = [&] {
      DatasetConfig dc;
      dc.count = 6;
      dc.seed = 2;
      dc.workspace = w.workspace;
      DenoiserConfig nc;
      nc.widths = {8, 16};
      nc.groups = 4;
      TrainConfig tc;
      tc.steps = 5;
      tc.batch = 2;
      return std::move(train_diffusion(generate_dataset(w.model, w.proxies, w.scene, dc), nc, tc).checkpoint);
    }();
    BenchConfig b;
    b.best_of = 3;
    const auto r = benchmark(w.model, w.proxies, {diffusion_planner("ddim", ck, w.model, w.proxies, {})},
                             {problems.begin(), problems.begin() + 2}, {0.0}, b);
    REQUIRE(r.entries.front().best_of_rate.has_value());
    CHECK(*r.entries.front().best_of_rate >= 0.0);
    CHECK(*r.entries.front().time_factor == doctest::Approx(1.0));
  }
}

TEST_CASE("workspace accessibility") {
  World w;
  PlanFilterConfig pf;
  pf.max_attempts = 1;
  const PlannerSpec planner = plan_and_filter_planner("pf", w.model, w.proxies, pf);
  AccessibilityConfig ac;
  ac.grid = GridSpec::defaults(w.model);
  CHECK(ac.grid.nz == 1);
  CHECK(ac.grid.cells() > 1);
  CHECK_FALSE(in_collision(w.model, w.proxies, w.scene, home_configuration(w.model)));

  const double nominal = w.model.nominal_payload();
  const AccessibilityReport rep =
      workspace_accessibility(w.model, w.proxies, w.scene, planner, {0.0, nominal, 2 * nominal, 3 * nominal}, ac);
  REQUIRE(rep.fractions.size() == 4);
  CHECK(rep.fractions[0] == 1.0);
  for (std::size_t i = 1; i < 4; ++i) CHECK(rep.fractions[i] <= rep.fractions[i - 1]);
  CHECK(rep.fractions[3] > 0.0);
  CHECK(rep.fractions[3] < 1.0);
  for (const auto& m : rep.maps) {
    for (int c = 0; c < ac.grid.cells(); ++c) {
      const auto i = static_cast<std::size_t>(c);
      if (m.accessible[i]) CHECK(rep.maps[0].accessible[i]);
      if (m.accessible[i]) CHECK(m.reachable[i]);
    }
  }
  const AccessibilityReport only = workspace_accessibility(w.model, w.proxies, w.scene, planner, {3 * nominal}, ac);
  CHECK(only.fractions[0] == rep.fractions[3]);

  for (int c = 0; c < ac.grid.cells(); ++c) {
    const Region r = ac.grid.cell(c);
    CHECK(ac.grid.bounds.contains(r.lo));
    CHECK(ac.grid.bounds.contains(r.hi));
  }
  AccessibilityConfig bad = ac;
  bad.grid.nx = 0;
  CHECK_THROWS_AS(workspace_accessibility(w.model, w.proxies, w.scene, planner, {0.0}, bad), DomainError);
  bad = ac;
  bad.attempts_per_cell = 0;
  CHECK_THROWS_AS(workspace_accessibility(w.model, w.proxies, w.scene, planner, {0.0}, bad), DomainError);
}

TEST_CASE("reports") {
  BenchReport rep;
  rep.seed = 42;
  rep.reference = "ddim";
  for (const char* name : {"ddim", "pf"}) {
    for (double p : {0.0, 2.0, 6.0}) {
      BenchEntry e;
      e.planner = name;
      e.payload = p;
      e.problems = 10;
      e.successes = 7;
      e.success_rate = 0.7;
      e.mean_time = 0.0123456789;
      e.std_time = 0.001;
      e.cv_time = e.std_time / e.mean_time;
      if (std::string(name) == "pf") e.time_factor = 3.5;
      rep.entries.push_back(e);
    }
  }
  const auto csv = temp_file("r.csv");
  emit_report(rep, ReportFormat::csv, csv);
  const BenchReport back = load_bench_csv(csv);
  CHECK(back.seed == 42);
  REQUIRE(back.entries.size() == rep.entries.size());
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    CHECK(back.entries[i].planner == rep.entries[i].planner);
    CHECK(back.entries[i].payload == rep.entries[i].payload);
    CHECK(back.entries[i].successes == rep.entries[i].successes);
    CHECK(back.entries[i].mean_time == doctest::Approx(rep.entries[i].mean_time).epsilon(1e-9));
    CHECK(back.entries[i].time_factor == rep.entries[i].time_factor);
    CHECK_FALSE(back.entries[i].best_of_rate.has_value());
  }
  CHECK(file_text(csv).find("planner,payload,problems,successes,success_rate") != std::string::npos);

  const auto svg = temp_file("r.svg");
  emit_report(rep, ReportFormat::svg, svg);
  const std::string text = file_text(svg);
  std::size_t groups = 0;
  for (std::size_t at = text.find("class=\"payload\""); at != std::string::npos; at = text.find("class=\"payload\"", at + 1))
    ++groups;
  CHECK(groups == 3);

  const auto json = temp_file("r.json");
  emit_report(rep, ReportFormat::json, json);
  CHECK(nlohmann::json::parse(file_text(json))["seed"] == 42);

  CHECK_THROWS_AS(emit_report(BenchReport{}, ReportFormat::csv, csv), DomainError);
  CHECK_THROWS_AS(emit_report(rep, ReportFormat::csv, "/nonexistent-dir/x.csv"), Error);
  CHECK_THROWS_AS(parse_report_format("xml"), DomainError);
  {
    std::ofstream out(csv);
    out << "bogus\n";
  }
  CHECK_THROWS_AS(load_bench_csv(csv), FormatError);
  std::filesystem::remove(csv);
  std::filesystem::remove(svg);
  std::filesystem::remove(json);

  const auto metrics = report_metrics(rep);
  CHECK(metrics.at("pf@6:time_factor") == 3.5);
  CHECK(metrics.count("ddim@0:time_factor") == 0);
  const auto outcomes = check_criteria(metrics, nlohmann::json::parse(R"({"criteria": [
      {"metric": "ddim@0:success_rate", "min": 0.6},
      {"metric": "pf@2:success_rate", "max": 0.5},
      {"metric": "sqp@0:success_rate", "min": 0.1}]})"));
  REQUIRE(outcomes.size() == 3);
  CHECK(outcomes[0].pass);
  CHECK_FALSE(outcomes[1].pass);
  CHECK_FALSE(outcomes[2].pass);
  CHECK_FALSE(outcomes[2].value.has_value());
  CHECK_THROWS_AS(check_criteria(metrics, nlohmann::json::object()), FormatError);
}
