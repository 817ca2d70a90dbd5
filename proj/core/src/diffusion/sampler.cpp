#include "paydiff/diffusion/sampler.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace paydiff {

std::string to_string(SamplerKind k) { return k == SamplerKind::ddpm ? "ddpm" : "ddim"; }

SamplerKind parse_sampler(const std::string& s) {
  if (s == "ddpm") return SamplerKind::ddpm;
  if (s == "ddim") return SamplerKind::ddim;
  throw DomainError("unknown sampler '" + s + "' (ddpm, ddim)");
}

namespace {

struct Batch {
  int B, C, H, n;
  std::vector<float> x;  // [B, C, H]
  float& at(int b, int c, int h) { return x[(static_cast<std::size_t>(b) * C + c) * H + h]; }
};

void inpaint(Batch& xb, const Vector& s, const Vector& g) {
  for (int b = 0; b < xb.B; ++b)
    for (int c = 0; c < xb.C; ++c) {
      xb.at(b, c, 0) = c < xb.n ? static_cast<float>(s[c]) : 0.0f;
      xb.at(b, c, xb.H - 1) = c < xb.n ? static_cast<float>(g[c]) : 0.0f;
    }
}

void clamp_unit(Batch& xb) {
  for (float& v : xb.x) v = std::clamp(v, -1.0f, 1.0f);
}

}  // namespace

Trajectory refine_consistency(const RobotModel& model, const Trajectory& traj, const Vector& scale,
                              double jerk_weight, double derivative_weight) {
  const int n = traj.n_dof(), H = traj.horizon(), K = H - 1;
  require_dim(scale.size(), 3 * n, "refine scale");
  if (H < 2) return traj;
  if (!(jerk_weight > 0.0) || !(derivative_weight >= 0.0)) throw DomainError("refine: weights must be positive");
  const double dt = traj.dt();
  // Knot states produced by a unit jerk on each interval, starting at rest.
  Matrix cq = Matrix::Zero(H, K), cv = Matrix::Zero(H, K), ca = Matrix::Zero(H, K);
  for (int j = 0; j < K; ++j) {
    double q = 0.0, v = 0.0, a = 0.0;
    for (int k = j; k < K; ++k) {
      const double u = k == j ? 1.0 : 0.0;
      q += v * dt + a * dt * dt / 2.0 + u * dt * dt * dt / 6.0;
      v += a * dt + u * dt * dt / 2.0;
      a += u * dt;
      cq(k + 1, j) = q;
      cv(k + 1, j) = v;
      ca(k + 1, j) = a;
    }
  }
  Matrix states = traj.states();
  const Vector q0 = traj.q(0), q1 = traj.q(K);
  Matrix A(3 * H, K), kkt = Matrix::Zero(K + 3, K + 3);
  Vector b(3 * H), rhs(K + 3);
  for (int i = 0; i < n; ++i) {
    const double jm = model.limits()[static_cast<std::size_t>(i)].j_max;
    const double wv = derivative_weight / scale[n + i], wa = derivative_weight / scale[2 * n + i];
    A << cq / scale[i], cv * wv, ca * wa;
    b << (states.col(i).array() - q0[i]).matrix() / scale[i], states.col(n + i) * wv, states.col(2 * n + i) * wa;
    kkt.topLeftCorner(K, K) = A.transpose() * A;
    kkt.topLeftCorner(K, K).diagonal().array() += jerk_weight / (jm * jm);
    kkt.block(K, 0, 1, K) = cq.row(K);
    kkt.block(K + 1, 0, 1, K) = cv.row(K);
    kkt.block(K + 2, 0, 1, K) = ca.row(K);
    kkt.topRightCorner(K, 3) = kkt.bottomLeftCorner(3, K).transpose();
    rhs << A.transpose() * b, q1[i] - q0[i], 0.0, 0.0;
    const Vector u = kkt.partialPivLu().solve(rhs).head(K);
    states.col(i) = (cq * u).array() + q0[i];
    states.col(n + i) = cv * u;
    states.col(2 * n + i) = ca * u;
  }
  return Trajectory(n, dt, std::move(states));
}

std::vector<Trajectory> sample_trajectories(const DiffusionCheckpoint& ck, const RobotModel& model,
                                            const CollisionProxySet& proxies, const SampleQuery& q,
                                            const SamplerConfig& cfg, int count, std::uint64_t seed) {
  const DenoiserConfig& dc = ck.config();
  if (model.hash() != ck.model_hash) {
    throw DomainError("checkpoint was trained for model '" + ck.model_name + "', not '" + model.name() + "'");
  }
  if (count < 1) throw DomainError("sample count must be positive");
  const int n = dc.n_dof, C = dc.channels(), H = dc.horizon;
  require_dim(q.start.size(), n, "start");
  require_dim(q.goal.size(), n, "goal");
  for (const Vector* e : {&q.start, &q.goal}) {
    if ((e->array() < model.q_min().array()).any() || (e->array() > model.q_max().array()).any()) {
      throw DomainError("endpoint outside joint limits");
    }
  }
  const NormalizationStats& ns = ck.normalization;
  const Vector cs = ns.center.head(n), ss = ns.scale.head(n);
  const Vector s_norm = ((q.start - cs).array() / ss.array()).matrix();
  const Vector g_norm = ((q.goal - cs).array() / ss.array()).matrix();

  const auto enc = network_input(dc.encoding, encode_payload(dc.encoding, q.payload, EncodingPhase::infer));
  const int P = dc.encoding.dim();
  nn::Tensor<float> payload({count, P});
  for (int b = 0; b < count; ++b)
    for (int j = 0; j < P; ++j) payload[static_cast<std::size_t>(b * P + j)] = static_cast<float>(enc[static_cast<std::size_t>(j)]);

  std::vector<Rng> rngs;
  for (int b = 0; b < count; ++b) rngs.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(b)));
  std::normal_distribution<float> normal(0.0f, 1.0f);
  auto noise = [&](Batch& xb, float scale) {
    for (int b = 0; b < count; ++b) {
      float* p = xb.x.data() + static_cast<std::size_t>(b) * C * H;
      for (int e = 0; e < C * H; ++e) p[e] += scale * normal(rngs[static_cast<std::size_t>(b)]);
    }
  };

  Batch xb{count, C, H, n, std::vector<float>(static_cast<std::size_t>(count) * C * H, 0.0f)};
  noise(xb, 1.0f);
  inpaint(xb, s_norm, g_norm);

  auto guide = [&](Batch& xb, int k) {
    if (q.scene == nullptr || cfg.guidance <= 0.0 || q.scene->obstacles.empty()) return;
    const double beta = cfg.guidance * ck.schedule.noise_level(k);
    for (int b = 0; b < count; ++b) {
      Matrix st = ns.denormalize(from_channels(xb.x.data() + static_cast<std::size_t>(b) * C * H, C, H));
      const Matrix grad = collision_cost_gradient(model, proxies, *q.scene, Trajectory(n, ck.dt, std::move(st)));
      for (int j = 0; j < n; ++j)
        for (int h = 0; h < H; ++h) xb.at(b, j, h) -= static_cast<float>(beta * grad(h, j) / ss[j]);
    }
  };

  auto predict = [&](int k) {
    nn::Tensor<float> x({count, C, H}, std::vector<float>(xb.x));
    nn::Graph<float> g(false);
    return g.value(predict_noise(g, *ck.net, ck.schedule, g.input(std::move(x)),
                                 std::vector<int>(static_cast<std::size_t>(count), k), g.input(payload)));
  };

  // Both samplers go through the clean-trajectory estimate so that clamping
  // acts on states rather than on noisy iterates. Without clamping the ddpm
  // step equals alpha_k (x_k - gamma_k eps).
  auto estimate_x0 = [&](const nn::Tensor<float>& eps, int t) {
    const double ab = ck.schedule.alpha_bar[static_cast<std::size_t>(t)];
    const auto sa = static_cast<float>(std::sqrt(ab)), sn = static_cast<float>(std::sqrt(1.0 - ab));
    std::vector<float> x0(xb.x.size());
    for (std::size_t e = 0; e < x0.size(); ++e) {
      x0[e] = (xb.x[e] - sn * eps[e]) / sa;
      if (cfg.clamp) x0[e] = std::clamp(x0[e], -1.0f, 1.0f);
    }
    return x0;
  };

  if (cfg.kind == SamplerKind::ddpm) {
    const auto& s = ck.schedule;
    for (int k = s.K; k >= 1; --k) {
      const auto u = static_cast<std::size_t>(k);
      const std::vector<float> x0 = estimate_x0(predict(k), k);
      const double denom = 1.0 - s.alpha_bar[u];
      const auto c0 = static_cast<float>(std::sqrt(s.alpha_bar[u - 1]) * s.beta[u] / denom);
      const auto ct = static_cast<float>(std::sqrt(1.0 - s.beta[u]) * (1.0 - s.alpha_bar[u - 1]) / denom);
      for (std::size_t e = 0; e < xb.x.size(); ++e) xb.x[e] = c0 * x0[e] + ct * xb.x[e];
      if (k > 1) noise(xb, static_cast<float>(s.posterior_std[u]));
      guide(xb, k);
      inpaint(xb, s_norm, g_norm);
    }
  } else {
    const std::vector<int> ts = ddim_timesteps(ck.schedule.K, cfg.steps);
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
      const int t = ts[i], tp = ts[i + 1];
      const nn::Tensor<float> eps = predict(t);
      const std::vector<float> x0 = estimate_x0(eps, t);
      const auto co = ddim_coefficients(ck.schedule, t, tp, cfg.eta);
      for (std::size_t e = 0; e < xb.x.size(); ++e) {
        xb.x[e] = static_cast<float>(co.x0_scale) * x0[e] + static_cast<float>(co.dir_scale) * eps[e];
      }
      if (co.noise_std > 0.0) noise(xb, static_cast<float>(co.noise_std));
      guide(xb, t);
      inpaint(xb, s_norm, g_norm);
    }
  }
  if (cfg.clamp) clamp_unit(xb);

  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(count));
  const Vector zero = Vector::Zero(n);
  for (int b = 0; b < count; ++b) {
    Matrix st = ns.denormalize(from_channels(xb.x.data() + static_cast<std::size_t>(b) * C * H, C, H));
    st.row(0) << q.start.transpose(), zero.transpose(), zero.transpose();
    st.row(H - 1) << q.goal.transpose(), zero.transpose(), zero.transpose();
    if (cfg.refine) st = refine_consistency(model, Trajectory(n, ck.dt, std::move(st)), ns.scale, cfg.refine_jerk_weight, cfg.refine_derivative_weight).states();
    if (cfg.clamp) {
      for (int j = 0; j < n; ++j) {
        st.col(j) = st.col(j).cwiseMax(model.q_min()[j]).cwiseMin(model.q_max()[j]);
        st.col(n + j) = st.col(n + j).cwiseMax(-model.v_max()[j]).cwiseMin(model.v_max()[j]);
        st.col(2 * n + j) = st.col(2 * n + j).cwiseMax(-model.a_max()[j]).cwiseMin(model.a_max()[j]);
      }
    }
    Trajectory traj(n, ck.dt, std::move(st));
    traj.set_state(0, q.start, zero, zero);
    traj.set_state(H - 1, q.goal, zero, zero);
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace paydiff
