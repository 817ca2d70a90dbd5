#include <benchmark/benchmark.h>

#include "paydiff/dynamics.hpp"
#include "paydiff/eval.hpp"
#include "paydiff/runtime.hpp"

using namespace paydiff;

namespace {

struct Fixture {
  RobotModel model = builtin_model("planar3");
  CollisionProxySet proxies = default_proxies(model);
  Scene scene = tabletop_scene(model);
  std::vector<Problem> suite = problem_suite(model, proxies, scene, WorkspaceSpec::defaults(model), 16, 777);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

// Sampling cost depends on the network shape, not on its weights.
const DiffusionCheckpoint& checkpoint() {
  static const DiffusionCheckpoint ck = [] {
    const Fixture& f = fixture();
    DatasetConfig dc;
    dc.count = 4;
    dc.seed = 1;
    dc.workspace = WorkspaceSpec::defaults(f.model);
    TrainConfig tc;
    tc.steps = 1;
    tc.batch = 2;
    return std::move(train_diffusion(generate_dataset(f.model, f.proxies, f.scene, dc), DenoiserConfig{}, tc).checkpoint);
  }();
  return ck;
}

void BM_InverseDynamics(benchmark::State& state) {
  const RobotModel m = builtin_model(state.range(0) == 0 ? "planar3" : "arm7");
  const Vector q = 0.3 * m.q_min() + 0.7 * m.q_max(), qd = Vector::Constant(m.n_dof(), 0.3),
               qdd = Vector::Constant(m.n_dof(), -0.2);
  for (auto _ : state) benchmark::DoNotOptimize(inverse_dynamics(m, q, qd, qdd));
  state.SetLabel(m.name());
}
BENCHMARK(BM_InverseDynamics)->Arg(0)->Arg(1);

void BM_MaxSupportedPayload(benchmark::State& state) {
  const Fixture& f = fixture();
  const Trajectory t = time_parameterize(f.model, {f.suite[0].start, f.suite[0].goal}, kDefaultDt,
                                         kDefaultDt * (kDefaultHorizon - 1));
  for (auto _ : state) benchmark::DoNotOptimize(max_supported_payload(f.model, t));
}
BENCHMARK(BM_MaxSupportedPayload);

void BM_DenoiserForward(benchmark::State& state) {
  const DiffusionCheckpoint& ck = checkpoint();
  const int batch = static_cast<int>(state.range(0));
  const DenoiserConfig cfg = ck.config();
  nn::Tensor<float> x({batch, cfg.channels(), cfg.horizon}, 0.1f), p({batch, cfg.encoding.dim()}, -1.0f);
  const std::vector<int> steps(static_cast<std::size_t>(batch), 10);
  for (auto _ : state) benchmark::DoNotOptimize(ck.net->predict(x, steps, p));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_DenoiserForward)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Sample(benchmark::State& state) {
  const Fixture& f = fixture();
  const DiffusionCheckpoint& ck = checkpoint();
  SamplerConfig cfg;
  cfg.kind = state.range(0) == 0 ? SamplerKind::ddim : SamplerKind::ddpm;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const Problem& p = f.suite[seed % f.suite.size()];
    benchmark::DoNotOptimize(sample_trajectory(ck, f.model, f.proxies, {p.start, p.goal, 2.0, &p.scene}, cfg, seed++));
  }
  state.SetLabel(to_string(cfg.kind));
}
BENCHMARK(BM_Sample)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RrtConnect(benchmark::State& state) {
  const Fixture& f = fixture();
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rrt_connect(f.model, f.proxies, f.suite[i++ % f.suite.size()]));
}
BENCHMARK(BM_RrtConnect)->Unit(benchmark::kMicrosecond);

void BM_PlanAndFilter(benchmark::State& state) {
  const Fixture& f = fixture();
  PlanFilterConfig cfg;
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(plan_and_filter(f.model, f.proxies, f.suite[i++ % f.suite.size()], 0.0, cfg));
}
BENCHMARK(BM_PlanAndFilter)->Unit(benchmark::kMicrosecond);

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
