// paydiff: model inspection, data generation, training, sampling and evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "paydiff/dataset.hpp"
#include "paydiff/eval.hpp"
#include "paydiff/model_io.hpp"
#include "paydiff/runtime.hpp"

namespace fs = std::filesystem;
using namespace paydiff;
using nlohmann::json;

namespace {

enum class Level { quiet, info, debug };

Level log_level() {
  const char* env = std::getenv("PAYDIFF_LOG");
  if (!env) return Level::info;
  const std::string v = env;
  if (v == "quiet" || v == "error" || v == "0") return Level::quiet;
  if (v == "debug" || v == "2") return Level::debug;
  return Level::info;
}

void log(Level at, const std::string& msg) {
  static const Level level = log_level();
  if (static_cast<int>(at) <= static_cast<int>(level)) std::cerr << "[paydiff] " << msg << "\n";
}

struct CriteriaViolation : Error {
  using Error::Error;
};

// Options shared by most subcommands.
struct Common {
  std::string model = "planar3";
  std::string scene;
  std::uint64_t seed = 0;
  std::string out = ".";

  RobotModel load_model() const { return resolve_model(model); }
  Scene load_scene(const RobotModel& m) const { return scene.empty() ? tabletop_scene(m) : paydiff::load_scene(scene); }
  fs::path out_dir() const {
    fs::create_directories(out);
    return out;
  }
  json header(const std::string& command) const {
    return {{"command", command}, {"seed", seed}, {"model", model}, {"scene", scene.empty() ? "tabletop" : scene}};
  }
};

void add_common(CLI::App* app, Common& c, bool with_scene = true) {
  app->add_option("--model,--preset", c.model, "preset name or model JSON file")->capture_default_str();
  if (with_scene) app->add_option("--scene", c.scene, "scene JSON file (default: preset tabletop)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "64-bit seed for all randomness")->capture_default_str();
  app->add_option("--out", c.out, "output directory")->capture_default_str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void summary(json j) { std::cout << j.dump() << std::endl; }

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::logic_error&) {
      throw DomainError("not a number list: " + s);
    }
  }
  if (out.empty()) throw DomainError("empty list");
  return out;
}

Vector parse_vector(const std::string& s, int n) {
  const auto v = parse_list(s);
  Vector q(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) q[static_cast<Eigen::Index>(i)] = v[i];
  require_dim(q.size(), n, "joint vector");
  return q;
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void enforce(const std::string& criteria_path, const std::map<std::string, double>& metrics, json& out) {
  if (criteria_path.empty()) return;
  std::ifstream in(criteria_path);
  if (!in) throw Error("cannot open criteria file " + criteria_path);
  const auto outcomes = check_criteria(metrics, json::parse(in));
  bool ok = true;
  json list = json::array();
  for (const auto& o : outcomes) {
    ok = ok && o.pass;
    list.push_back({{"metric", o.metric},
                    {"rule", o.rule},
                    {"value", o.value ? json(*o.value) : json(nullptr)},
                    {"pass", o.pass}});
    log(Level::info, std::string(o.pass ? "ok   " : "FAIL ") + o.metric + " " + o.rule);
  }
  out["criteria"] = list;
  if (!ok) {
    summary(out);
    throw CriteriaViolation("acceptance criteria violated");
  }
}

void emit_all(const BenchReport& rep, const fs::path& dir, const std::string& stem, json& out) {
  for (auto [fmt, ext] : {std::pair{ReportFormat::csv, ".csv"}, {ReportFormat::json, ".json"}, {ReportFormat::svg, ".svg"}}) {
    emit_report(rep, fmt, dir / (stem + ext));
    out["outputs"].push_back((dir / (stem + ext)).string());
  }
}

// --------------------------------------------------------------------------

struct ModelCmd {
  Common c;
  bool info = false;
  bool export_json = false;
};

void run_model(const ModelCmd& cmd) {
  const RobotModel m = cmd.c.load_model();
  json out = cmd.c.header("model");
  out["name"] = m.name();
  out["n_dof"] = m.n_dof();
  out["hash"] = m.hash();
  if (cmd.info) {
    std::cout << "model " << m.name() << "\n"
              << "n_dof " << m.n_dof() << "\n"
              << "nominal_payload " << m.nominal_payload() << " kg\n";
    for (int i = 0; i < m.n_dof(); ++i) {
      const auto& l = m.limits()[static_cast<std::size_t>(i)];
      std::cout << "joint " << i << " q [" << l.q_min << ", " << l.q_max << "] v_max " << l.v_max << " a_max "
                << l.a_max << " j_max " << l.j_max << " tau_max " << l.tau_max << "\n";
    }
  }
  if (cmd.export_json) {
    const fs::path p = cmd.c.out_dir() / (m.name() + ".json");
    save_model(m, p);
    out["outputs"] = {p.string()};
  }
  summary(out);
}

struct DatagenCmd {
  Common c;
  int count = 2000;
  unsigned threads = default_threads();
};

void run_datagen(const DatagenCmd& cmd) {
  const RobotModel m = cmd.c.load_model();
  const CollisionProxySet px = default_proxies(m);
  const Scene scene = cmd.c.load_scene(m);
  DatasetConfig cfg;
  cfg.count = cmd.count;
  cfg.seed = cmd.c.seed;
  cfg.threads = static_cast<int>(cmd.threads);
  cfg.workspace = WorkspaceSpec::defaults(m);
  log(Level::info, "generating " + std::to_string(cmd.count) + " samples for " + m.name());
  const Dataset ds = generate_dataset(m, px, scene, cfg, [](int done, int total) {
    if (done % 100 == 0 || done == total) log(Level::debug, std::to_string(done) + "/" + std::to_string(total));
  });
  const fs::path dir = cmd.c.out_dir();
  save_dataset(ds, dir / "dataset.bin");
  json out = cmd.c.header("datagen");
  out["samples"] = ds.size();
  out["threads"] = cmd.threads;
  out["payload_histogram"] = payload_histogram(ds);
  write_json(dir / "datagen.json", out);
  out["outputs"] = {(dir / "dataset.bin").string(), (dir / "datagen.json").string()};
  summary(out);
}

struct TrainCmd {
  Common c;
  std::string dataset = "dataset.bin";
  TrainConfig train;
  std::string encoding = "one_hot";
  std::string range_mode = "as_less_than";
  std::string conditioning = "film";
  std::string config;
  const CLI::App* app = nullptr;

  bool given(const char* flag) const { return app && app->count(flag) > 0; }
};

// Config file: {"network": {...}, "train": {...}}; flags on the command line win.
void run_train(const TrainCmd& cmd) {
  const RobotModel m = cmd.c.load_model();
  const Dataset ds = load_dataset(cmd.dataset, &m);
  DenoiserConfig net;
  TrainConfig tc = cmd.train;
  if (!cmd.config.empty()) {
    std::ifstream in(cmd.config);
    const json j = json::parse(in);
    if (j.contains("network")) net = DenoiserConfig::from_json(j["network"]);
    if (j.contains("train")) {
      const TrainConfig f = TrainConfig::from_json(j["train"]);
      if (!cmd.given("--steps")) tc.steps = f.steps;
      if (!cmd.given("--batch")) tc.batch = f.batch;
      if (!cmd.given("--lr")) tc.lr = f.lr;
      tc.max_grad_norm = f.max_grad_norm;
      tc.diffusion_steps = f.diffusion_steps;
    }
  }
  net.n_dof = ds.n_dof;
  net.horizon = ds.horizon;
  if (cmd.config.empty() || cmd.given("--encoding")) net.encoding.scheme = parse_payload_scheme(cmd.encoding);
  if (cmd.config.empty() || cmd.given("--range-mode")) net.encoding.range_mode = parse_range_mode(cmd.range_mode);
  if (cmd.config.empty() || cmd.given("--conditioning")) net.conditioning = parse_conditioning(cmd.conditioning);
  tc.seed = cmd.c.seed;
  const fs::path dir = cmd.c.out_dir();
  tc.rescue_path = (dir / "checkpoint.rescue.bin").string();
  log(Level::info, "training on " + std::to_string(ds.size()) + " samples for " + std::to_string(tc.steps) + " steps");
  const TrainResult r = train_diffusion(ds, net, tc, [&](int step, double loss) {
    if ((step + 1) % 100 == 0) log(Level::info, "step " + std::to_string(step + 1) + " loss " + std::to_string(loss));
  });
  save_checkpoint(r.checkpoint, dir / "checkpoint.bin");
  json out = cmd.c.header("train");
  out["dataset"] = cmd.dataset;
  out["train"] = tc.to_json();
  out["network"] = net.to_json();
  out["seconds"] = r.seconds;
  out["final_loss"] = r.losses.back();
  json log_j = out;
  log_j["losses"] = r.losses;
  write_json(dir / "train.json", log_j);
  out["outputs"] = {(dir / "checkpoint.bin").string(), (dir / "train.json").string()};
  summary(out);
}

struct SamplerOpts {
  std::string sampler = "ddim";
  SamplerConfig cfg;
  bool no_refine = false;

  SamplerConfig config() const {
    SamplerConfig c = cfg;
    c.kind = parse_sampler(sampler);
    c.refine = !no_refine;
    return c;
  }
};

void add_sampler(CLI::App* app, SamplerOpts& s) {
  app->add_option("--sampler", s.sampler, "ddim or ddpm")->check(CLI::IsMember({"ddim", "ddpm"}))->capture_default_str();
  app->add_option("--steps", s.cfg.steps, "ddim steps")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--eta", s.cfg.eta, "ddim stochasticity")->capture_default_str();
  app->add_option("--guidance", s.cfg.guidance, "collision guidance scale")->capture_default_str();
  app->add_flag("--no-refine", s.no_refine, "skip the consistency refinement");
}

struct SampleCmd {
  Common c;
  std::string checkpoint = "checkpoint.bin";
  SamplerOpts sampler;
  double payload = 0.0;
  std::string encoding;
  std::string start, goal;
  int count = 1;
};

void run_sample(const SampleCmd& cmd) {
  const RobotModel m = cmd.c.load_model();
  const CollisionProxySet px = default_proxies(m);
  const Scene scene = cmd.c.load_scene(m);
  const DiffusionCheckpoint ck = load_checkpoint(cmd.checkpoint, &m);
  if (!cmd.encoding.empty() && parse_payload_scheme(cmd.encoding) != ck.config().encoding.scheme) {
    throw DomainError("checkpoint uses encoding " + to_string(ck.config().encoding.scheme) + ", not " + cmd.encoding);
  }
  Problem p;
  if (cmd.start.empty() != cmd.goal.empty()) throw DomainError("--start and --goal go together");
  if (cmd.start.empty()) {
    p = problem_suite(m, px, scene, WorkspaceSpec::defaults(m), 1, cmd.c.seed).front();
  } else {
    p.start = parse_vector(cmd.start, m.n_dof());
    p.goal = parse_vector(cmd.goal, m.n_dof());
    p.scene = scene;
  }
  const SamplerConfig sc = cmd.sampler.config();
  const auto trajs = sample_trajectories(ck, m, px, {p.start, p.goal, cmd.payload, &scene}, sc, cmd.count, cmd.c.seed);
  const fs::path dir = cmd.c.out_dir();
  json out = cmd.c.header("sample");
  out["checkpoint"] = cmd.checkpoint;
  out["payload"] = cmd.payload;
  out["sampler"] = cmd.sampler.sampler;
  out["steps"] = sc.kind == SamplerKind::ddim ? sc.steps : ck.schedule.K;
  out["start"] = std::vector<double>(p.start.data(), p.start.data() + p.start.size());
  out["goal"] = std::vector<double>(p.goal.data(), p.goal.data() + p.goal.size());
  json results = json::array();
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const std::string name = trajs.size() == 1 ? "trajectory.bin" : "trajectory_" + std::to_string(i) + ".bin";
    save_trajectory(trajs[i], dir / name);
    const ValidityReport v = validate(m, px, p, trajs[i], cmd.payload);
    results.push_back({{"file", (dir / name).string()}, {"valid", v.valid}, {"failures", v.failures()}});
  }
  out["trajectories"] = results;
  write_json(dir / "sample.json", out);
  summary(out);
}

struct EvalCmd {
  Common c;
  std::string checkpoint = "checkpoint.bin";
  SamplerOpts sampler;
  int problems = 100;
  std::uint64_t suite_seed = 777;
  std::string payloads = "0,2,4,6";
  int best_of = 0;
  std::string criteria;
};

void run_eval(const EvalCmd& cmd) {
  const RobotModel m = cmd.c.load_model();
  const CollisionProxySet px = default_proxies(m);
  const Scene scene = cmd.c.load_scene(m);
  const DiffusionCheckpoint ck = load_checkpoint(cmd.checkpoint, &m);
  const auto suite = problem_suite(m, px, scene, WorkspaceSpec::defaults(m), cmd.problems, cmd.suite_seed);
  BenchConfig bc;
  bc.seed = cmd.c.seed;
  bc.reference = cmd.sampler.sampler;
  bc.best_of = cmd.best_of;
  const auto rep = benchmark(m, px, {diffusion_planner(cmd.sampler.sampler, ck, m, px, cmd.sampler.config())}, suite,
                             parse_list(cmd.payloads), bc);
  for (const auto& e : rep.entries)
    log(Level::info, e.planner + " @ " + std::to_string(e.payload) + " kg: success " + std::to_string(e.success_rate));
  json out = cmd.c.header("eval");
  out["suite_seed"] = cmd.suite_seed;
  emit_all(rep, cmd.c.out_dir(), "eval", out);
  enforce(cmd.criteria, report_metrics(rep), out);
  summary(out);
}

struct BenchCmd {
  Common c;
  std::string checkpoint;
  std::string planners = "ddim,ddpm,plan_and_filter,kinodynamic";
  int problems = 20;
  std::uint64_t suite_seed = 777;
  std::string payloads = "0,6";
  double kino_timeout = 120.0;
  double sqp_duration = kDefaultDt * (kDefaultHorizon - 1);
  std::string criteria;
};

void run_bench(const BenchCmd& cmd) {
  const RobotModel m = cmd.c.load_model();
  const CollisionProxySet px = default_proxies(m);
  const Scene scene = cmd.c.load_scene(m);
  std::optional<DiffusionCheckpoint> ck;
  std::vector<PlannerSpec> planners;
  std::stringstream ss(cmd.planners);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "ddim" || name == "ddpm") {
      if (!ck) {
        if (cmd.checkpoint.empty()) throw DomainError("--checkpoint is required for " + name);
        ck = load_checkpoint(cmd.checkpoint, &m);
      }
      SamplerConfig sc;
      sc.kind = parse_sampler(name);
      planners.push_back(diffusion_planner(name, *ck, m, px, sc));
    } else if (name == "plan_and_filter") {
      PlanFilterConfig pf;
      pf.duration = std::nullopt;
      planners.push_back(plan_and_filter_planner(name, m, px, pf));
    } else if (name == "kinodynamic") {
      KinodynamicConfig kc;
      kc.timeout = cmd.kino_timeout;
      planners.push_back(kinodynamic_planner(name, m, px, kc));
    } else if (name == "sqp") {
      planners.push_back(sqp_planner(name, m, px, cmd.sqp_duration, {}));
    } else {
      throw DomainError("unknown planner '" + name + "' (ddim, ddpm, plan_and_filter, kinodynamic, sqp)");
    }
  }
  const auto suite = problem_suite(m, px, scene, WorkspaceSpec::defaults(m), cmd.problems, cmd.suite_seed);
  BenchConfig bc;
  bc.seed = cmd.c.seed;
  bc.reference = planners.front().name;
  for (const auto& p : planners)
    if (p.name == "ddim") bc.reference = "ddim";
  const auto rep = benchmark(m, px, planners, suite, parse_list(cmd.payloads), bc, [](const std::string& n, double p, int i) {
    log(Level::debug, n + " @ " + std::to_string(p) + " problem " + std::to_string(i));
  });
  for (const auto& e : rep.entries) {
    log(Level::info, e.planner + " @ " + std::to_string(e.payload) + " kg: success " + std::to_string(e.success_rate) +
                         " mean " + std::to_string(e.mean_time) + " s cv " + std::to_string(e.cv_time));
  }
  json out = cmd.c.header("bench");
  out["suite_seed"] = cmd.suite_seed;
  out["reference"] = bc.reference;
  emit_all(rep, cmd.c.out_dir(), "bench", out);
  enforce(cmd.criteria, report_metrics(rep), out);
  summary(out);
}

struct WorkspaceCmd {
  Common c;
  std::string checkpoint;
  std::string payloads;
  std::vector<int> grid;
  int attempts = 5;
  std::string criteria;
};

void run_workspace(const WorkspaceCmd& cmd) {
  const RobotModel m = cmd.c.load_model();
  const CollisionProxySet px = default_proxies(m);
  const Scene scene = cmd.c.load_scene(m);
  std::optional<DiffusionCheckpoint> ck;
  PlannerSpec planner;
  if (cmd.checkpoint.empty()) {
    PlanFilterConfig pf;
    pf.max_attempts = 1;
    planner = plan_and_filter_planner("plan_and_filter", m, px, pf);
  } else {
    ck = load_checkpoint(cmd.checkpoint, &m);
    planner = diffusion_planner("ddim", *ck, m, px, {});
  }
  AccessibilityConfig ac;
  ac.grid = GridSpec::defaults(m);
  if (!cmd.grid.empty()) {
    if (cmd.grid.size() != 3) throw DomainError("--grid takes three cell counts");
    ac.grid.nx = cmd.grid[0];
    ac.grid.ny = cmd.grid[1];
    ac.grid.nz = cmd.grid[2];
  }
  ac.attempts_per_cell = cmd.attempts;
  ac.seed = cmd.c.seed;
  const double nom = m.nominal_payload();
  const std::vector<double> payloads =
      cmd.payloads.empty() ? std::vector<double>{0.0, nom, 2 * nom, 3 * nom} : parse_list(cmd.payloads);
  const auto rep = workspace_accessibility(m, px, scene, planner, payloads, ac);
  for (std::size_t i = 0; i < payloads.size(); ++i)
    log(Level::info, "payload " + std::to_string(payloads[i]) + " kg: fraction " + std::to_string(rep.fractions[i]));
  const fs::path dir = cmd.c.out_dir();
  json out = cmd.c.header("workspace");
  out["backend"] = planner.name;
  for (auto [fmt, ext] : {std::pair{ReportFormat::csv, ".csv"}, {ReportFormat::json, ".json"}, {ReportFormat::svg, ".svg"}}) {
    emit_report(rep, fmt, dir / (std::string("workspace") + ext));
    out["outputs"].push_back((dir / (std::string("workspace") + ext)).string());
  }
  out["fractions"] = rep.fractions;
  enforce(cmd.criteria, report_metrics(rep), out);
  summary(out);
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"paydiff: payload-conditioned trajectory diffusion toolkit"};
  app.require_subcommand(1);

  ModelCmd model;
  auto* m = app.add_subcommand("model", "inspect or export a robot model");
  add_common(m, model.c, false);
  m->add_flag("--info", model.info, "print joint limits");
  m->add_flag("--export", model.export_json, "write the model JSON into --out");

  DatagenCmd datagen;
  auto* d = app.add_subcommand("datagen", "plan and label a training dataset");
  add_common(d, datagen.c);
  d->add_option("--count,--n", datagen.count, "number of samples")->check(CLI::PositiveNumber)->capture_default_str();
  d->add_option("--threads", datagen.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  TrainCmd train;
  auto* t = app.add_subcommand("train", "train a payload-conditioned denoiser");
  add_common(t, train.c, false);
  t->add_option("--dataset", train.dataset, "dataset file")->check(CLI::ExistingFile)->capture_default_str();
  t->add_option("--steps", train.train.steps, "optimizer steps")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--batch", train.train.batch, "batch size")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--lr", train.train.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--encoding", train.encoding, "numeric, one_hot, less_than, supported_range")->capture_default_str();
  t->add_option("--range-mode", train.range_mode, "supported_range inference: as_one_hot or as_less_than")
      ->capture_default_str();
  t->add_option("--conditioning", train.conditioning, "film or additive")->capture_default_str();
  t->add_option("--config", train.config, "JSON with network and train sections")->check(CLI::ExistingFile);
  train.app = t;

  SampleCmd sample;
  auto* s = app.add_subcommand("sample", "draw trajectories from a checkpoint");
  add_common(s, sample.c);
  s->add_option("--checkpoint,--ckpt", sample.checkpoint, "checkpoint file")->capture_default_str();
  s->add_option("--payload", sample.payload, "payload in kg")->capture_default_str();
  s->add_option("--encoding", sample.encoding, "expected encoding of the checkpoint");
  s->add_option("--start", sample.start, "comma separated start configuration");
  s->add_option("--goal", sample.goal, "comma separated goal configuration");
  s->add_option("--count", sample.count, "number of trajectories")->check(CLI::PositiveNumber)->capture_default_str();
  add_sampler(s, sample.sampler);

  EvalCmd eval;
  auto* e = app.add_subcommand("eval", "success rates of a checkpoint on a held-out suite");
  add_common(e, eval.c);
  e->add_option("--checkpoint,--ckpt", eval.checkpoint, "checkpoint file")->capture_default_str();
  e->add_option("--problems", eval.problems, "suite size")->check(CLI::PositiveNumber)->capture_default_str();
  e->add_option("--suite-seed", eval.suite_seed, "seed of the problem suite")->capture_default_str();
  e->add_option("--payloads", eval.payloads, "comma separated payloads")->capture_default_str();
  e->add_option("--best-of", eval.best_of, "also score best of n samples")->capture_default_str();
  e->add_option("--criteria", eval.criteria, "criteria JSON; exit 3 when violated")->check(CLI::ExistingFile);
  add_sampler(e, eval.sampler);

  BenchCmd bench;
  auto* b = app.add_subcommand("bench", "compare planners on success rate and planning time");
  add_common(b, bench.c);
  b->add_option("--checkpoint,--ckpt", bench.checkpoint, "checkpoint for ddim/ddpm");
  b->add_option("--planners", bench.planners, "comma separated planners")->capture_default_str();
  b->add_option("--problems", bench.problems, "suite size")->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--suite-seed", bench.suite_seed, "seed of the problem suite")->capture_default_str();
  b->add_option("--payloads", bench.payloads, "comma separated payloads")->capture_default_str();
  b->add_option("--kino-timeout", bench.kino_timeout, "kinodynamic timeout, s")->capture_default_str();
  b->add_option("--sqp-duration", bench.sqp_duration, "fixed motion duration for sqp, s")->capture_default_str();
  b->add_option("--criteria", bench.criteria, "criteria JSON; exit 3 when violated")->check(CLI::ExistingFile);

  WorkspaceCmd ws;
  auto* w = app.add_subcommand("workspace", "accessible workspace fraction by payload");
  add_common(w, ws.c);
  w->add_option("--checkpoint,--ckpt", ws.checkpoint, "use the diffusion sampler instead of plan and filter");
  w->add_option("--payloads", ws.payloads, "comma separated payloads (default 0, 1x, 2x, 3x nominal)");
  w->add_option("--grid", ws.grid, "cells along x y z")->expected(3);
  w->add_option("--attempts", ws.attempts, "attempts per cell")->check(CLI::PositiveNumber)->capture_default_str();
  w->add_option("--criteria", ws.criteria, "criteria JSON; exit 3 when violated")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*m) run_model(model);
    if (*d) run_datagen(datagen);
    if (*t) run_train(train);
    if (*s) run_sample(sample);
    if (*e) run_eval(eval);
    if (*b) run_bench(bench);
    if (*w) run_workspace(ws);
  } catch (const CriteriaViolation& err) {
    log(Level::quiet, err.what());
    return 3;
  } catch (const std::exception& err) {
    log(Level::quiet, std::string("error: ") + err.what());
    return 1;
  }
  return 0;
}
