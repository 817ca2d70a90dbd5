#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "paydiff/diffusion/sampler.hpp"
#include "paydiff/dynamics.hpp"
#include "paydiff/nn/gradcheck.hpp"
#include "paydiff/validity.hpp"

using namespace paydiff;

namespace {

DenoiserConfig tiny_config() {
  DenoiserConfig c;
  c.n_dof = 2;
  c.horizon = 8;
  c.widths = {4, 8};
  c.groups = 2;
  c.kernel = 3;
  c.time_dim = 8;
  c.cond_dim = 6;
  return c;
}

struct World {
  RobotModel model = builtin_model("planar3");
  CollisionProxySet proxies = default_proxies(model);
  Scene scene = tabletop_scene(model);
};

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    World w;
    DatasetConfig cfg;
    cfg.count = 10;
    cfg.seed = 4;
    cfg.workspace = WorkspaceSpec::defaults(w.model);
    return generate_dataset(w.model, w.proxies, w.scene, cfg);
  }();
  return ds;
}

DenoiserConfig small_net() {
  DenoiserConfig c;
  c.widths = {8, 16};
  c.groups = 4;
  c.time_dim = 16;
  c.cond_dim = 16;
  return c;
}

const DiffusionCheckpoint& small_checkpoint() {
  static const TrainResult r = [] {
    TrainConfig tc;
    tc.steps = 30;
    tc.batch = 4;
    tc.seed = 1;
    return train_diffusion(small_dataset(), small_net(), tc);
  }();
  return r.checkpoint;
}

}  // namespace

TEST_CASE("payload encodings") {
  PayloadEncoding oh{PayloadScheme::one_hot};
  PayloadEncoding lt{PayloadScheme::less_than};
  const auto e = encode_payload(oh, 2.4, EncodingPhase::infer);
  REQUIRE(e.size() == 19);
  CHECK(std::accumulate(e.begin(), e.end(), 0.0) == 1.0);
  CHECK(e[3] == 1.0);
  const auto l = encode_payload(lt, 2.4, EncodingPhase::infer);
  for (int j = 0; j < 19; ++j) CHECK(l[static_cast<std::size_t>(j)] == (j <= 3 ? 1.0 : 0.0));
  CHECK(encode_payload(oh, 0.0, EncodingPhase::infer)[0] == 1.0);
  const auto full = encode_payload(lt, 18.0, EncodingPhase::infer);
  CHECK(std::all_of(full.begin(), full.end(), [](double v) { return v == 1.0; }));
  CHECK_THROWS_AS(encode_payload(oh, 18.5, EncodingPhase::infer), DomainError);
  CHECK_THROWS_AS(encode_payload(oh, -0.1, EncodingPhase::infer), DomainError);

  PayloadEncoding num{PayloadScheme::numeric};
  CHECK(num.dim() == 1);
  CHECK(encode_payload(num, 0.0, EncodingPhase::infer)[0] == -1.0);
  CHECK(encode_payload(num, 9.0, EncodingPhase::infer)[0] == 0.0);
  CHECK(encode_payload(num, 18.0, EncodingPhase::infer)[0] == 1.0);

  PayloadEncoding sr{PayloadScheme::supported_range, RangeMode::as_one_hot};
  CHECK(encode_payload(sr, 7.2, EncodingPhase::train) == encode_payload(lt, 7.2, EncodingPhase::train));
  CHECK(encode_payload(sr, 7.2, EncodingPhase::infer) == encode_payload(oh, 7.2, EncodingPhase::infer));
  sr.range_mode = RangeMode::as_less_than;
  CHECK(encode_payload(sr, 7.2, EncodingPhase::infer) == encode_payload(lt, 7.2, EncodingPhase::infer));

  const auto in = network_input(oh, e);
  CHECK(in[3] == 1.0);
  CHECK(in[0] == -1.0);
  CHECK_THROWS_AS(network_input(num, e), DimensionError);
  CHECK(parse_payload_scheme("less_than") == PayloadScheme::less_than);
  CHECK_THROWS_AS(parse_payload_scheme("binary"), DomainError);
}

TEST_CASE("training payload draws") {
  PayloadEncoding oh{PayloadScheme::one_hot};
  Rng rng(8);
  CHECK(sample_training_payload(oh, 0.0, rng) == 0.0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double p = sample_training_payload(oh, 10.0, rng);
    CHECK_UNARY(p >= 0.0);
    CHECK_UNARY(p <= 10.0);
    sum += p;
  }
  CHECK(std::abs(sum / n - 5.0) <= 0.05);
  PayloadEncoding sr{PayloadScheme::supported_range};
  Rng a(3), b(3);
  CHECK(sample_training_payload(sr, 6.5, a) == 6.5);
  CHECK(a == b);
}

TEST_CASE("noise schedule") {
  const NoiseSchedule s = NoiseSchedule::cosine(25);
  REQUIRE(s.beta.size() == 26);
  CHECK(s.alpha_bar[0] == 1.0);
  CHECK(s.alpha_bar[25] < 1e-3);
  for (int k = 1; k <= 25; ++k) {
    const auto u = static_cast<std::size_t>(k);
    CHECK(s.beta[u] > 0.0);
    CHECK(s.beta[u] < 1.0);
    if (k > 1) CHECK(s.beta[u] > s.beta[u - 1]);
  }
  SUBCASE("update reproduces the ancestral posterior") {
    Rng rng(2);
    std::normal_distribution<double> nd;
    for (int k = 1; k <= 25; ++k) {
      const auto u = static_cast<std::size_t>(k);
      const double x0 = nd(rng), eps = nd(rng);
      const double ab = s.alpha_bar[u], abp = s.alpha_bar[u - 1];
      const double xk = std::sqrt(ab) * x0 + std::sqrt(1 - ab) * eps;
      const double mean = std::sqrt(abp) * s.beta[u] / (1 - ab) * x0 + std::sqrt(1 - s.beta[u]) * (1 - abp) / (1 - ab) * xk;
      CHECK(s.alpha[u] * (xk - s.gamma[u] * eps) == doctest::Approx(mean).epsilon(1e-12));
      const double var = (1 - abp) / (1 - ab) * s.beta[u];
      CHECK(std::pow(s.alpha[u] * s.sigma[u], 2) == doctest::Approx(var).epsilon(1e-12));
      CHECK(s.posterior_std[u] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    }
  }
  SUBCASE("ddim with S = K and eta = 1 matches ddpm") {
    const auto ts = ddim_timesteps(25, 25);
    REQUIRE(ts.size() == 26);
    for (int k = 25; k >= 1; --k) {
      CHECK(ts[static_cast<std::size_t>(25 - k)] == k);
      const auto u = static_cast<std::size_t>(k);
      const auto c = ddim_coefficients(s, k, k - 1, 1.0);
      CHECK(c.noise_std == doctest::Approx(s.posterior_std[u]).epsilon(1e-10));
      // mean in terms of (x0, eps) must equal the ancestral mean
      const double ab = s.alpha_bar[u], abp = s.alpha_bar[u - 1];
      const double ddpm_x0 = std::sqrt(abp) * s.beta[u] / (1 - ab) + std::sqrt(1 - s.beta[u]) * (1 - abp) / (1 - ab) * std::sqrt(ab);
      const double ddpm_eps = std::sqrt(1 - s.beta[u]) * (1 - abp) / (1 - ab) * std::sqrt(1 - ab);
      CHECK(c.x0_scale == doctest::Approx(ddpm_x0).epsilon(1e-10));
      CHECK(c.dir_scale == doctest::Approx(ddpm_eps).epsilon(1e-8));
    }
  }
  CHECK(ddim_timesteps(25, 5) == std::vector<int>{25, 19, 13, 7, 1, 0});
  CHECK(ddim_timesteps(25, 1) == std::vector<int>{25, 0});
  CHECK_THROWS_AS(ddim_timesteps(25, 26), DomainError);
  CHECK_THROWS_AS(NoiseSchedule::cosine(0), DomainError);
}

TEST_CASE("denoiser") {
  const DenoiserConfig cfg = tiny_config();
  SUBCASE("config validation and json") {
    DenoiserConfig bad = cfg;
    bad.horizon = 7;
    CHECK_THROWS_AS(bad.check(), DomainError);
    bad = cfg;
    bad.widths = {4, 5};
    CHECK_THROWS_AS(bad.check(), DomainError);
    bad = cfg;
    bad.kernel = 4;
    CHECK_THROWS_AS(bad.check(), DomainError);
    DenoiserConfig other = cfg;
    other.conditioning = Conditioning::additive;
    other.encoding = {PayloadScheme::supported_range, RangeMode::as_one_hot};
    const DenoiserConfig back = DenoiserConfig::from_json(other.to_json());
    CHECK(back.to_json() == other.to_json());
  }
  SUBCASE("shapes and determinism") {
    Denoiser<float> a(cfg, 5), b(cfg, 5);
    nn::Tensor<float> x({3, 6, 8}, 0.3f), p({3, 19}, -1.0f);
    const auto ya = a.predict(x, {1, 2, 3}, p);
    CHECK(ya.shape == nn::Shape{3, 6, 8});
    CHECK(ya.data == b.predict(x, {1, 2, 3}, p).data);
    CHECK_THROWS_AS(a.predict(nn::Tensor<float>({3, 6, 4}), {1, 2, 3}, p), DimensionError);
    CHECK_THROWS_AS(a.predict(x, {1, 2}, p), DimensionError);
  }
  for (auto mode : {Conditioning::film, Conditioning::additive}) {
    CAPTURE(to_string(mode));
    DenoiserConfig c = cfg;
    c.conditioning = mode;
    Denoiser<double> net(c, 11);
    const NoiseSchedule sched = NoiseSchedule::cosine(25);
    Rng rng(6);
    std::normal_distribution<double> nd;
    nn::Tensor<double> x({2, 6, 8}), target({2, 6, 8}), pay({2, 19}, -1.0);
    for (auto& v : x.data) v = nd(rng);
    for (auto& v : target.data) v = nd(rng);
    pay[4] = pay[19 + 9] = 1.0;
    auto loss = [&](nn::Graph<double>& g) {
      return g.mse(predict_noise(g, net, sched, g.input(x), {3, 20}, g.input(pay)), g.input(target));
    };
    const auto rep = nn::gradient_check(net.parameters(), loss, 3, 0, 1e-5, 1e-4);
    CHECK(rep.checked > 100);
    CHECK_MESSAGE(rep.max_relative_error <= 1e-6, rep.worst);

    net.parameters().zero_grad();
    nn::Graph<double> g;
    g.backward(loss(g));
    double cond = 0.0;
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      const auto& prm = net.parameters()[i];
      if (prm.name.rfind("payload.", 0) == 0)
        for (double v : prm.grad.data) cond += std::abs(v);
    }
    CHECK(cond > 0.0);
  }
}

TEST_CASE("training") {
  const Dataset& ds = small_dataset();
  TrainConfig tc;
  tc.steps = 12;
  tc.batch = 4;
  tc.seed = 9;
  const TrainResult a = train_diffusion(ds, small_net(), tc);
  const TrainResult b = train_diffusion(ds, small_net(), tc);
  CHECK(a.losses == b.losses);
  REQUIRE(a.losses.size() == 12);
  tc.seed = 10;
  CHECK(train_diffusion(ds, small_net(), tc).losses != a.losses);

  SUBCASE("loss falls on a tiny dataset") {
    tc.steps = 2000;
    tc.batch = 8;
    const TrainResult r = train_diffusion(ds, DenoiserConfig{}, tc);
    const double first = std::accumulate(r.losses.begin(), r.losses.begin() + 20, 0.0) / 20;
    const double last = std::accumulate(r.losses.end() - 100, r.losses.end(), 0.0) / 100;
    MESSAGE("initial loss " << first << ", final loss " << last);
    CHECK(last * 10.0 <= first);
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(train_diffusion(Dataset{}, small_net(), tc), DomainError);
    TrainConfig bad = tc;
    bad.lr = 1e9;
    bad.max_grad_norm = 0.0;
    bad.steps = 50;
    CHECK_THROWS_AS(train_diffusion(ds, small_net(), bad), Error);
  }
}

TEST_CASE("checkpoint round trip") {
  const DiffusionCheckpoint& ck = small_checkpoint();
  const auto path = std::filesystem::temp_directory_path() / "paydiff_test_ckpt.bin";
  save_checkpoint(ck, path);
  World w;
  const DiffusionCheckpoint back = load_checkpoint(path, &w.model);
  CHECK(back.config().to_json() == ck.config().to_json());
  CHECK(back.normalization == ck.normalization);
  nn::Tensor<float> x({1, 9, 64}, 0.1f), p({1, 19}, -1.0f);
  CHECK(back.net->predict(x, {4}, p).data == ck.net->predict(x, {4}, p).data);
  const RobotModel other = builtin_model("planar2");
  CHECK_THROWS_AS(load_checkpoint(path, &other), FormatError);
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 10));
  }
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("sampler contracts") {
  World w;
  const DiffusionCheckpoint& ck = small_checkpoint();
  const auto suite = problem_suite(w.model, w.proxies, w.scene, WorkspaceSpec::defaults(w.model), 4, 21);
  const Vector zero = Vector::Zero(3);
  for (SamplerKind kind : {SamplerKind::ddim, SamplerKind::ddpm}) {
    SamplerConfig cfg;
    cfg.kind = kind;
    for (const Problem& pr : suite) {
      const auto trajs = sample_trajectories(ck, w.model, w.proxies, {pr.start, pr.goal, 6.0, &pr.scene}, cfg, 5, pr.id);
      for (const Trajectory& t : trajs) {
        CHECK(t.horizon() == 64);
        CHECK(t.q(0) == pr.start);
        CHECK(t.q(63) == pr.goal);
        CHECK(t.qd(0) == zero);
        CHECK(t.qdd(63) == zero);
        const auto lim = check_limits(w.model, t);
        CHECK(lim.max_position_violation == 0.0);
        CHECK(lim.max_velocity_ratio <= 1.0);
        CHECK(lim.max_acceleration_ratio <= 1.0);
      }
    }
  }
  const Problem& pr = suite.front();
  SamplerConfig cfg;
  const Trajectory a = sample_trajectory(ck, w.model, w.proxies, {pr.start, pr.goal, 1.0, nullptr}, cfg, 7);
  CHECK(a == sample_trajectory(ck, w.model, w.proxies, {pr.start, pr.goal, 1.0, nullptr}, cfg, 7));
  CHECK_FALSE(a == sample_trajectory(ck, w.model, w.proxies, {pr.start, pr.goal, 1.0, nullptr}, cfg, 8));
  CHECK_THROWS_AS(sample_trajectory(ck, w.model, w.proxies, {pr.start, pr.goal, 19.0, nullptr}, cfg, 7), DomainError);
  CHECK_THROWS_AS(sample_trajectory(ck, builtin_model("planar2"), w.proxies, {pr.start, pr.goal, 1.0, nullptr}, cfg, 7),
                  DomainError);

  SUBCASE("guidance lowers collision cost") {
    SamplerConfig plain;
    plain.guidance = 0.0;
    SamplerConfig guided;
    guided.guidance = 0.5;
    // a ball in the way of the straight joint-space motion
    Scene scene = pr.scene;
    const Vector mid = 0.5 * (pr.start + pr.goal);
    scene.obstacles.push_back(SphereObstacle{forward_kinematics(w.model, mid).ee.translation(), 0.12});
    REQUIRE_FALSE(in_collision(w.model, w.proxies, scene, pr.start));
    REQUIRE_FALSE(in_collision(w.model, w.proxies, scene, pr.goal));
    const SampleQuery q{pr.start, pr.goal, 0.0, &scene};
    const auto p0 = sample_trajectories(ck, w.model, w.proxies, q, plain, 100, 3);
    const auto p1 = sample_trajectories(ck, w.model, w.proxies, q, guided, 100, 3);
    double c0 = 0.0, c1 = 0.0;
    for (int i = 0; i < 100; ++i) {
      c0 += collision_cost(w.model, w.proxies, scene, p0[static_cast<std::size_t>(i)]);
      c1 += collision_cost(w.model, w.proxies, scene, p1[static_cast<std::size_t>(i)]);
    }
    MESSAGE("mean collision cost " << c0 / 100 << " unguided, " << c1 / 100 << " guided");
    CHECK(c0 > 0.0);
    CHECK(c1 <= c0);
  }
  SUBCASE("ddim is cheaper than ddpm") {
    auto time = [&](SamplerKind k) {
      SamplerConfig c;
      c.kind = k;
      const auto t0 = std::chrono::steady_clock::now();
      for (int i = 0; i < 5; ++i) sample_trajectory(ck, w.model, w.proxies, {pr.start, pr.goal, 0.0, &pr.scene}, c, i);
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    CHECK(time(SamplerKind::ddim) < time(SamplerKind::ddpm));
  }
}

TEST_CASE("consistency refinement") {
  World w;
  const NormalizationStats ns = NormalizationStats::from_limits(w.model);
  const auto suite = problem_suite(w.model, w.proxies, w.scene, WorkspaceSpec::defaults(w.model), 1, 5);
  const Problem& pr = suite.front();
  const Trajectory clean = time_parameterize(w.model, {pr.start, pr.goal}, 0.08, 63 * 0.08);
  REQUIRE(check_consistency(clean, w.model, 0.1).pass);

  const Trajectory same = refine_consistency(w.model, clean, ns.scale, 0.1);
  CHECK((same.states() - clean.states()).cwiseAbs().maxCoeff() < 0.05);

  Rng rng(2);
  std::normal_distribution<double> normal;
  Matrix noisy = clean.states();
  for (int k = 1; k < 63; ++k)
    for (int c = 0; c < 9; ++c) noisy(k, c) += 0.05 * ns.scale[c] * normal(rng);
  const Trajectory bad(3, 0.08, noisy);
  CHECK_FALSE(check_consistency(bad, w.model, 0.1).pass);
  const Trajectory fixed = refine_consistency(w.model, bad, ns.scale, 0.1);
  CHECK(check_consistency(fixed, w.model, 0.1).pass);
  CHECK((fixed.q(0) - pr.start).norm() < 1e-12);
  CHECK((fixed.q(63) - pr.goal).norm() < 1e-9);
  CHECK(fixed.qd(63).norm() < 1e-9);
  CHECK(fixed.qdd(63).norm() < 1e-9);
  CHECK_THROWS_AS(refine_consistency(w.model, bad, Vector::Ones(4), 0.1), DimensionError);
}
