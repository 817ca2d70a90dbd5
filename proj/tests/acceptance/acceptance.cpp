// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   paydiff_acceptance [work_dir]
//
// Generates a planar3 corpus, trains the default denoiser, evaluates it on a
// held-out suite and compares it with the classical planners. Artifacts and a
// JSON summary are written to work_dir.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "finite_difference.hpp"
#include "payload_grid.hpp"
#include "paydiff/dynamics.hpp"
#include "paydiff/eval.hpp"
#include "paydiff/nn/gradcheck.hpp"
#include "paydiff/runtime.hpp"
#include "planar_lagrangian.hpp"
#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace paydiff;
using namespace testing_util;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Report {
  json summary = json::object();
  int failed = 0;

  void info(const std::string& msg) {
    std::printf("  info: %s\n", msg.c_str());
    std::fflush(stdout);
  }
  void criterion(int id, bool pass, const std::string& detail) {
    std::printf("CRITERION %d %s %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    failed += !pass;
    summary["criteria"][std::to_string(id)] = {{"pass", pass}, {"detail", detail}};
  }
};

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct World {
  RobotModel model = builtin_model("planar3");
  CollisionProxySet proxies = default_proxies(model);
  Scene scene = tabletop_scene(model);
  WorkspaceSpec workspace = WorkspaceSpec::defaults(model);
};

constexpr std::uint64_t kDataSeed = 2024;
constexpr std::uint64_t kTrainSeed = 7;
constexpr std::uint64_t kSuiteSeed = 777;
constexpr int kCorpus = 2000;
constexpr int kSuite = 100;

// ---------------------------------------------------------------------------

void dynamics_oracles(Report& rep) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int states = 0;
  for (const char* name : {"planar2", "planar3"}) {
    const RobotModel m = builtin_model(name);
    const oracle::PlanarChain chain = planar_chain(m);
    Rng rng(11);
    for (int k = 0; k < 1000; ++k) {
      const Vector q = random_q(m, rng), qd = uniform_vec(-m.v_max(), m.v_max(), rng),
                   qdd = uniform_vec(-m.a_max(), m.a_max(), rng);
      const Vector expect = oracle::planar_torque(chain, q, qd, qdd);
      const Vector got = inverse_dynamics(m, q, qd, qdd);
      worst = std::max(worst, (got - expect).norm() / expect.norm());
      ++states;
    }
  }
  const double secs = since(t0);
  rep.criterion(1, worst <= 1e-8 && secs < 5.0,
                fmt("RNEA vs Lagrangian closed form on %d states: max relative error %.2e (<= 1e-8), %.3f s (< 5 s)",
                    states, worst, secs));
}

void mass_matrix_properties(Report& rep) {
  double asym = 0.0;
  int not_pd = 0, total = 0;
  for (const auto& name : builtin_model_names()) {
    const RobotModel m = builtin_model(name);
    Rng rng(12);
    for (int k = 0; k < 500; ++k) {
      const Matrix M = mass_matrix(m, random_q(m, rng));
      asym = std::max(asym, (M - M.transpose()).cwiseAbs().maxCoeff());
      not_pd += Eigen::LLT<Matrix>(M).info() != Eigen::Success;
      ++total;
    }
  }
  rep.criterion(2, asym <= 1e-9 && not_pd == 0,
                fmt("%d configurations over all presets: max |M - M^T| %.2e (<= 1e-9), %d not positive definite", total,
                    asym, not_pd));
}

void labels(Report& rep, const World& w, const Dataset& ds) {
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Sample& s = ds.samples[static_cast<std::size_t>(i)];
    const double closed = *max_supported_payload(w.model, s.trajectory);
    worst = std::max(worst, std::abs(closed - oracle::grid_max_payload(w.model, s.trajectory)));
  }
  int bad_at = 0, bad_above = 0, capped = 0;
  for (const Sample& s : ds.samples) {
    Problem p;
    p.start = s.trajectory.q(0);
    p.goal = s.trajectory.q(s.trajectory.horizon() - 1);
    p.scene = w.scene;
    bad_at += !validate(w.model, w.proxies, p, s.trajectory, s.m_max).valid;
    if (s.m_max >= kPayloadCap) {
      ++capped;
      continue;
    }
    bad_above += validate(w.model, w.proxies, p, s.trajectory, s.m_max + 0.01).valid;
  }
  rep.criterion(3, worst <= 1e-3 && bad_at == 0 && bad_above == 0,
                fmt("closed form vs 1e-4 kg grid on 100 trajectories: max gap %.2e kg (<= 1e-3); of %zu samples %d "
                    "invalid at m_max, %d still valid at m_max + 0.01 (%d capped)",
                    worst, ds.size(), bad_at, bad_above, capped));
}

void super_nominal(Report& rep, const World& w, const Dataset& ds) {
  const double nominal = w.model.nominal_payload();
  int above = 0;
  for (const Sample& s : ds.samples) above += s.m_max > nominal;
  const auto hist = payload_histogram(ds);
  std::ostringstream h;
  for (std::size_t b = 0; b < hist.size(); ++b)
    if (hist[b]) h << b << ":" << hist[b] << " ";
  rep.info("label histogram (kg bin:count) " + h.str());

  PlanFilterConfig pf;
  pf.max_attempts = 1;
  AccessibilityConfig ac;
  ac.grid = GridSpec::defaults(w.model);
  const std::vector<double> payloads{0.0, nominal, 2 * nominal, 3 * nominal};
  const auto acc = workspace_accessibility(w.model, w.proxies, w.scene,
                                           plan_and_filter_planner("plan_and_filter", w.model, w.proxies, pf), payloads, ac);
  bool monotone = true;
  for (std::size_t i = 1; i < acc.fractions.size(); ++i) monotone = monotone && acc.fractions[i] <= acc.fractions[i - 1];
  rep.summary["workspace"] = accessibility_to_json(acc);
  rep.criterion(4, above > 0 && acc.fractions.back() > 0.0 && monotone,
                fmt("%d of %zu samples labeled above the %.0f kg rating; accessible fraction at 0/1x/2x/3x = "
                    "%.3f/%.3f/%.3f/%.3f over %d cells (3x > 0, monotone: %s)",
                    above, ds.size(), nominal, acc.fractions[0], acc.fractions[1], acc.fractions[2], acc.fractions[3],
                    ac.grid.cells(), monotone ? "yes" : "no"));
}

void encodings(Report& rep) {
  const PayloadEncoding oh{PayloadScheme::one_hot}, lt{PayloadScheme::less_than};
  PayloadEncoding sr{PayloadScheme::supported_range};
  int bad = 0;
  std::vector<double> prev;
  for (int i = 0; i <= 1800; ++i) {
    const double p = i / 100.0;
    const int idx = (i + 99) / 100;
    const auto o = encode_payload(oh, p, EncodingPhase::infer);
    const double sum = std::accumulate(o.begin(), o.end(), 0.0);
    bad += sum != 1.0 || o[static_cast<std::size_t>(idx)] != 1.0 || payload_index(p) != idx;
    const auto l = encode_payload(lt, p, EncodingPhase::infer);
    for (int j = 0; j < kPayloadBins; ++j) bad += l[static_cast<std::size_t>(j)] != (j <= idx ? 1.0 : 0.0);
    if (!prev.empty())
      for (int j = 0; j < kPayloadBins; ++j) bad += l[static_cast<std::size_t>(j)] < prev[static_cast<std::size_t>(j)];
    prev = l;
    bad += encode_payload(sr, p, EncodingPhase::train) != encode_payload(lt, p, EncodingPhase::train);
  }
  rep.criterion(5, bad == 0,
                fmt("1801 payloads in [0, 18] step 0.01: %d violations of one-hot, less-than monotonicity, "
                    "supported-range(train) == less-than",
                    bad));
}

void gradients(Report& rep) {
  DenoiserConfig c;
  c.n_dof = 2;
  c.horizon = 8;
  c.widths = {4, 8};
  c.groups = 2;
  c.kernel = 3;
  c.time_dim = 8;
  c.cond_dim = 6;
  double worst = 0.0;
  int checked = 0;
  for (auto mode : {Conditioning::film, Conditioning::additive}) {
    c.conditioning = mode;
    Denoiser<double> net(c, 11);
    const NoiseSchedule sched = NoiseSchedule::cosine(25);
    Rng rng(6);
    std::normal_distribution<double> nd;
    nn::Tensor<double> x({2, 6, 8}), target({2, 6, 8}), pay({2, 19}, -1.0);
    for (auto& v : x.data) v = nd(rng);
    for (auto& v : target.data) v = nd(rng);
    pay[4] = pay[19 + 9] = 1.0;
    const auto r = nn::gradient_check(
        net.parameters(),
        [&](nn::Graph<double>& g) {
          return g.mse(predict_noise(g, net, sched, g.input(x), {3, 20}, g.input(pay)), g.input(target));
        },
        6, 0, 1e-5, 1e-4);
    worst = std::max(worst, r.max_relative_error);
    checked += r.checked;
  }

  const World w;
  Rng rng(3);
  double cworst = 0.0;
  int penetrating = 0;
  for (int trial = 0; trial < 2000 && penetrating < 50; ++trial) {
    Trajectory t = Trajectory::zeros(3, 6, 0.1);
    for (int i = 0; i < t.horizon(); ++i) t.set_state(i, random_q(w.model, rng), Vector::Zero(3), Vector::Zero(3));
    if (collision_cost(w.model, w.proxies, w.scene, t) <= 1e-6) continue;
    ++penetrating;
    const Vector g = collision_cost_gradient(w.model, w.proxies, w.scene, t).reshaped();
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& y) {
          Trajectory u = t;
          u.states().leftCols(3) = y.reshaped(t.horizon(), 3);
          return collision_cost(w.model, w.proxies, w.scene, u);
        },
        t.positions().reshaped(), 1e-6);
    cworst = std::max(cworst, (g - fd).norm() / fd.norm());
  }
  rep.criterion(6, worst <= 1e-6 && cworst <= 1e-4 && penetrating == 50,
                fmt("tiny denoiser (film + additive, %d entries): max relative error %.2e (<= 1e-6); collision gradient "
                    "on %d penetrating trajectories: %.2e (<= 1e-4)",
                    checked, worst, penetrating, cworst));
}

void sampler_contracts(Report& rep, const World& w, const DiffusionCheckpoint& ck, const std::vector<Problem>& suite) {
  int n = 0, bad_ends = 0, bad_rest = 0, bad_limits = 0;
  for (SamplerKind kind : {SamplerKind::ddim, SamplerKind::ddpm}) {
    SamplerConfig cfg;
    cfg.kind = kind;
    for (double payload : {0.0, 3 * w.model.nominal_payload()}) {
      for (int i = 0; i < 50; ++i) {
        const Problem& p = suite[static_cast<std::size_t>(i)];
        const Trajectory t =
            sample_trajectory(ck, w.model, w.proxies, {p.start, p.goal, payload, &p.scene}, cfg, 1000 + p.id);
        const int H = t.horizon();
        ++n;
        bad_ends += !(t.q(0) == p.start && t.q(H - 1) == p.goal);
        bad_rest += !(t.qd(0).isZero(0.0) && t.qdd(0).isZero(0.0) && t.qd(H - 1).isZero(0.0) && t.qdd(H - 1).isZero(0.0));
        bad_limits += !check_limits(w.model, t, 0.0).pass;
      }
    }
  }
  rep.criterion(7, n == 200 && bad_ends + bad_rest + bad_limits == 0,
                fmt("%d samples (ddim + ddpm, 0 and 3x nominal): %d inexact endpoints, %d nonzero boundary "
                    "derivatives, %d outside limits (zero tolerance)",
                    n, bad_ends, bad_rest, bad_limits));
}

void determinism(Report& rep, const World& w, const fs::path& work) {
  DatasetConfig dc;
  dc.count = 100;
  dc.seed = 99;
  dc.threads = 1;
  dc.workspace = w.workspace;
  const fs::path a = work / "det_a.bin", b = work / "det_b.bin";
  save_dataset(generate_dataset(w.model, w.proxies, w.scene, dc), a);
  save_dataset(generate_dataset(w.model, w.proxies, w.scene, dc), b);
  const bool data_same = file_bytes(a) == file_bytes(b);

  const Dataset ds = load_dataset(a, &w.model);
  TrainConfig tc;
  tc.steps = 20;
  tc.batch = 8;
  tc.seed = 5;
  const TrainResult r1 = train_diffusion(ds, DenoiserConfig{}, tc);
  const TrainResult r2 = train_diffusion(ds, DenoiserConfig{}, tc);
  save_checkpoint(r1.checkpoint, work / "det_a.ckpt");
  save_checkpoint(r2.checkpoint, work / "det_b.ckpt");
  const bool train_same = r1.losses == r2.losses && file_bytes(work / "det_a.ckpt") == file_bytes(work / "det_b.ckpt");

  const auto suite = problem_suite(w.model, w.proxies, w.scene, w.workspace, 10, 5);
  bool sample_same = true;
  for (const Problem& p : suite) {
    const SampleQuery q{p.start, p.goal, 2.0, &p.scene};
    sample_same = sample_same && sample_trajectory(r1.checkpoint, w.model, w.proxies, q, {}, p.id) ==
                                     sample_trajectory(r2.checkpoint, w.model, w.proxies, q, {}, p.id);
  }
  for (const auto& f : {a, b, work / "det_a.ckpt", work / "det_b.ckpt"}) fs::remove(f);
  rep.criterion(11, data_same && train_same && sample_same,
                fmt("datagen bytes identical: %s; train losses + checkpoint bytes identical: %s; ddim samples "
                    "identical: %s",
                    data_same ? "yes" : "no", train_same ? "yes" : "no", sample_same ? "yes" : "no"));
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::create_directories(work);
  Report rep;
  const World w;
  const auto t_all = Clock::now();

  dynamics_oracles(rep);
  mass_matrix_properties(rep);

  DatasetConfig dc;
  dc.count = kCorpus;
  dc.seed = kDataSeed;
  dc.threads = 1;
  dc.workspace = w.workspace;
  auto t0 = Clock::now();
  const Dataset ds = generate_dataset(w.model, w.proxies, w.scene, dc);
  save_dataset(ds, work / "dataset.bin");
  rep.info(fmt("datagen: %zu planar3 samples in %.1f s", ds.size(), since(t0)));

  labels(rep, w, ds);
  super_nominal(rep, w, ds);
  encodings(rep);
  gradients(rep);

  const auto suite = problem_suite(w.model, w.proxies, w.scene, w.workspace, kSuite, kSuiteSeed);
  std::set<std::pair<std::vector<double>, std::vector<double>>> seen;
  for (const Sample& s : ds.samples) {
    const Vector a = s.trajectory.q(0), b = s.trajectory.q(s.trajectory.horizon() - 1);
    seen.insert({{a.data(), a.data() + a.size()}, {b.data(), b.data() + b.size()}});
  }
  int overlap = 0;
  for (const Problem& p : suite) {
    overlap += seen.count({{p.start.data(), p.start.data() + p.start.size()}, {p.goal.data(), p.goal.data() + p.goal.size()}});
    overlap += seen.count({{p.goal.data(), p.goal.data() + p.goal.size()}, {p.start.data(), p.start.data() + p.start.size()}});
  }

  TrainConfig tc;
  tc.seed = kTrainSeed;
  tc.rescue_path = (work / "checkpoint.rescue.bin").string();
  t0 = Clock::now();
  const TrainResult trained = train_diffusion(ds, DenoiserConfig{}, tc, [&](int step, double loss) {
    if ((step + 1) % 500 == 0) rep.info(fmt("train step %d loss %.4f (%.0f s)", step + 1, loss, since(t0)));
  });
  const double train_secs = since(t0);
  save_checkpoint(trained.checkpoint, work / "checkpoint.bin");
  const DiffusionCheckpoint& ck = trained.checkpoint;
  rep.info(fmt("trained %d steps (batch %d) in %.1f s", tc.steps, tc.batch, train_secs));

  sampler_contracts(rep, w, ck, suite);

  // Held-out evaluation.
  const double heavy = 3 * w.model.nominal_payload();
  SamplerConfig ddim_cfg, ddpm_cfg, raw_cfg;
  ddpm_cfg.kind = SamplerKind::ddpm;
  raw_cfg.refine = false;
  DiffusionCheckpoint control;
  control.model_name = ck.model_name;
  control.model_hash = ck.model_hash;
  control.dt = ck.dt;
  control.schedule = ck.schedule;
  control.normalization = ck.normalization;
  control.training = ck.training;
  control.net = std::make_unique<Denoiser<float>>(ck.config(), 12345);

  BenchConfig bc;
  bc.seed = 1;
  bc.best_of = 5;
  t0 = Clock::now();
  const BenchReport diff = benchmark(w.model, w.proxies,
                                     {diffusion_planner("ddim", ck, w.model, w.proxies, ddim_cfg),
                                      diffusion_planner("ddpm", ck, w.model, w.proxies, ddpm_cfg),
                                      diffusion_planner("ddim_raw", ck, w.model, w.proxies, raw_cfg),
                                      diffusion_planner("ddim_untrained", control, w.model, w.proxies, ddim_cfg)},
                                     suite, {0.0, heavy}, bc);
  emit_report(diff, ReportFormat::json, work / "diffusion.json");
  emit_report(diff, ReportFormat::svg, work / "diffusion.svg");
  rep.info(fmt("diffusion evaluation in %.1f s", since(t0)));
  for (const auto& e : diff.entries) {
    std::map<std::string, int> why;
    for (const auto& o : e.outcomes)
      if (o != "valid") ++why[o];
    std::string reasons;
    for (const auto& [k, v] : why) reasons += k + "=" + std::to_string(v) + " ";
    rep.info(fmt("%-15s @ %2.0f kg: success %.2f (best of 5: %.2f), mean %.1f ms, cv %.3f; failures %s", e.planner.c_str(),
                 e.payload, e.success_rate, e.best_of_rate.value_or(-1.0), 1e3 * e.mean_time, e.cv_time,
                 reasons.c_str()));
  }
  const auto& d0 = diff.entry("ddim", 0.0);
  const auto& d3 = diff.entry("ddim", heavy);
  const auto& p0 = diff.entry("ddpm", 0.0);
  const auto& p3 = diff.entry("ddpm", heavy);
  rep.criterion(8, ds.size() >= 2000 && train_secs <= 1800 && d0.success_rate >= 0.6 && d3.success_rate < d0.success_rate,
                fmt("%zu samples, training %.0f s (<= 1800); held-out %d problems (%d overlaps with the corpus): ddim-5 "
                    "success %.2f at 0 kg (>= 0.60), %.2f at %.0f kg (lower); without refinement %.2f / %.2f; "
                    "untrained network with refinement %.2f / %.2f",
                    ds.size(), train_secs, kSuite, overlap, d0.success_rate, d3.success_rate, heavy,
                    diff.entry("ddim_raw", 0.0).success_rate, diff.entry("ddim_raw", heavy).success_rate,
                    diff.entry("ddim_untrained", 0.0).success_rate, diff.entry("ddim_untrained", heavy).success_rate));

  const double gap0 = std::abs(d0.success_rate - p0.success_rate), gap3 = std::abs(d3.success_rate - p3.success_rate);
  rep.criterion(9, gap0 <= 0.10 && gap3 <= 0.10 && d0.mean_time < p0.mean_time && d3.mean_time < p3.mean_time,
                fmt("success gap ddim vs ddpm %.0f pp at 0 kg, %.0f pp at %.0f kg (<= 10); mean time ddim %.1f ms vs "
                    "ddpm %.1f ms",
                    100 * gap0, 100 * gap3, heavy, 1e3 * d0.mean_time, 1e3 * p0.mean_time));

  // Planner comparison.
  const std::vector<Problem> kino_suite(suite.begin(), suite.begin() + 30);
  KinodynamicConfig kc;
  kc.timeout = 60.0;
  PlanFilterConfig pf;
  pf.duration = std::nullopt;
  t0 = Clock::now();
  const BenchReport kino = benchmark(w.model, w.proxies, {diffusion_planner("ddim", ck, w.model, w.proxies, ddim_cfg),
                                                           kinodynamic_planner("kinodynamic", w.model, w.proxies, kc)},
                                     kino_suite, {0.0}, bc);
  BenchConfig pbc;
  pbc.seed = 1;
  const BenchReport pfr = benchmark(w.model, w.proxies, {plan_and_filter_planner("plan_and_filter", w.model, w.proxies, pf)},
                                    suite, {0.0, heavy}, pbc);
  rep.info(fmt("planner comparison in %.1f s", since(t0)));
  BenchReport all = diff;
  for (const auto* r : {&kino, &pfr})
    for (const auto& e : r->entries)
      if (e.planner != "ddim") all.entries.push_back(e);
  emit_report(all, ReportFormat::csv, work / "bench.csv");
  for (const auto* r : {&kino, &pfr})
    for (const auto& e : r->entries)
      rep.info(fmt("%-15s @ %2.0f kg on %d problems: success %.2f, mean %.4f s, std %.4f s, cv %.3f", e.planner.c_str(),
                   e.payload, e.problems, e.success_rate, e.mean_time, e.std_time, e.cv_time));
  const auto& kd = kino.entry("ddim", 0.0);
  const auto& kk = kino.entry("kinodynamic", 0.0);
  const auto& f3 = pfr.entry("plan_and_filter", heavy);
  const double ratio = kk.cv_time / kd.cv_time;
  const bool tradeoff = f3.success_rate < d3.success_rate || f3.mean_time > d3.mean_time;
  rep.criterion(10, ratio >= 5.0 && tradeoff,
                fmt("timing cv on %zu problems: ddim %.3f, kinodynamic %.3f (ratio %.1f >= 5); at %.0f kg plan-and-filter "
                    "success %.2f vs ddim %.2f, mean time %.4f s vs %.4f s",
                    kino_suite.size(), kd.cv_time, kk.cv_time, ratio, heavy, f3.success_rate, d3.success_rate,
                    f3.mean_time, d3.mean_time));

  determinism(rep, w, work);

  rep.summary["seconds"] = since(t_all);
  rep.summary["seeds"] = {{"data", kDataSeed}, {"train", kTrainSeed}, {"suite", kSuiteSeed}};
  std::ofstream(work / "acceptance.json") << rep.summary.dump(2) << "\n";
  std::printf("%d of 11 criteria failed (%.0f s)\n", rep.failed, since(t_all));
  return rep.failed == 0 ? 0 : 1;
}
