#include "paydiff/diffusion/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "paydiff/binary_io.hpp"
#include "paydiff/nn/optim.hpp"
#include "paydiff/nn/serialize.hpp"

namespace paydiff {

namespace {

constexpr char kMagic[9] = "PDCKPT\0\0";
constexpr std::uint32_t kVersion = 1;

}  // namespace

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps},
          {"batch", batch},
          {"lr", lr},
          {"max_grad_norm", max_grad_norm},
          {"diffusion_steps", diffusion_steps},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.max_grad_norm = j.value("max_grad_norm", c.max_grad_norm);
  c.diffusion_steps = j.value("diffusion_steps", c.diffusion_steps);
  c.seed = j.value("seed", c.seed);
  if (c.steps < 1 || c.batch < 1 || !(c.lr > 0.0) || c.diffusion_steps < 1 || c.max_grad_norm < 0.0) {
    throw DomainError("train config: steps, batch, lr and diffusion_steps must be positive");
  }
  return c;
}

nn::Tensor<float> to_channels(const Matrix& x) {
  const int H = static_cast<int>(x.rows()), C = static_cast<int>(x.cols());
  nn::Tensor<float> t({C, H});
  for (int c = 0; c < C; ++c)
    for (int h = 0; h < H; ++h) t[static_cast<std::size_t>(c * H + h)] = static_cast<float>(x(h, c));
  return t;
}

Matrix from_channels(const float* data, int channels, int horizon) {
  Matrix x(horizon, channels);
  for (int c = 0; c < channels; ++c)
    for (int h = 0; h < horizon; ++h) x(h, c) = data[c * horizon + h];
  return x;
}

void save_checkpoint(const DiffusionCheckpoint& ck, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  nlohmann::json meta = {{"model_name", ck.model_name},
                         {"model_hash", ck.model_hash},
                         {"dt", ck.dt},
                         {"diffusion_steps", ck.schedule.K},
                         {"denoiser", ck.config().to_json()},
                         {"normalization",
                          {{"center", std::vector<double>(ck.normalization.center.begin(), ck.normalization.center.end())},
                           {"scale", std::vector<double>(ck.normalization.scale.begin(), ck.normalization.scale.end())}}},
                         {"training", ck.training}};
  binio::put_magic(out, kMagic);
  binio::put<std::uint32_t>(out, kVersion);
  binio::put_string(out, meta.dump());
  nn::save_parameters(out, ck.net->parameters());
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

DiffusionCheckpoint load_checkpoint(const std::filesystem::path& path, const RobotModel* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  binio::expect_magic(in, kMagic, "checkpoint");
  const auto version = binio::get<std::uint32_t>(in, "version");
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(binio::get_string(in, "metadata", 1 << 20));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt file: checkpoint metadata: ") + e.what());
  }
  DiffusionCheckpoint ck;
  try {
    ck.model_name = meta.at("model_name").get<std::string>();
    ck.model_hash = meta.at("model_hash").get<std::uint64_t>();
    ck.dt = meta.at("dt").get<double>();
    ck.schedule = NoiseSchedule::cosine(meta.at("diffusion_steps").get<int>());
    const auto c = meta.at("normalization").at("center").get<std::vector<double>>();
    const auto s = meta.at("normalization").at("scale").get<std::vector<double>>();
    ck.normalization.center = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
    ck.normalization.scale = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
    ck.training = meta.value("training", nlohmann::json::object());
    ck.net = std::make_unique<Denoiser<float>>(DenoiserConfig::from_json(meta.at("denoiser")), 0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  if (expected != nullptr && expected->hash() != ck.model_hash) {
    throw FormatError("checkpoint was trained for model '" + ck.model_name + "', not '" + expected->name() + "'");
  }
  nn::load_parameters(in, ck.net->parameters());
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("corrupt file: trailing bytes in checkpoint");
  return ck;
}

TrainResult train_diffusion(const Dataset& data, DenoiserConfig net_cfg, const TrainConfig& cfg,
                            const std::function<void(int, double)>& on_step) {
  if (data.samples.empty()) throw DomainError("train: dataset is empty");
  if (cfg.steps < 1 || cfg.batch < 1 || !(cfg.lr > 0.0)) throw DomainError("train: bad configuration");
  net_cfg.n_dof = data.n_dof;
  net_cfg.horizon = data.horizon;
  const int C = net_cfg.channels(), H = data.horizon, P = net_cfg.encoding.dim();
  const auto HC = static_cast<std::size_t>(C * H);

  TrainResult res;
  DiffusionCheckpoint& ck = res.checkpoint;
  ck.model_name = data.model_name;
  ck.model_hash = data.model_hash;
  ck.dt = data.dt;
  ck.schedule = NoiseSchedule::cosine(cfg.diffusion_steps);
  ck.normalization = data.normalization;
  ck.net = std::make_unique<Denoiser<float>>(net_cfg, derive_seed(cfg.seed, 0));
  ck.training = {{"config", cfg.to_json()}, {"samples", data.size()}};

  std::vector<nn::Tensor<float>> x0;
  x0.reserve(data.size());
  for (const Sample& s : data.samples) x0.push_back(to_channels(data.normalization.normalize(s.trajectory.states())));

  Denoiser<float>& net = *ck.net;
  nn::Adam<float> opt(net.parameters(), {.lr = cfg.lr});
  Rng rng(derive_seed(cfg.seed, 1));
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_int_distribution<int> step_dist(1, ck.schedule.K);
  std::normal_distribution<float> normal(0.0f, 1.0f);

  const auto t0 = std::chrono::steady_clock::now();
  const int B = cfg.batch;
  for (int it = 0; it < cfg.steps; ++it) {
    nn::Tensor<float> xk({B, C, H}), target({B, C, H}), payload({B, P});
    std::vector<int> ks(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      const std::size_t i = pick(rng);
      const int k = step_dist(rng);
      ks[static_cast<std::size_t>(b)] = k;
      const double p = sample_training_payload(net_cfg.encoding, data.samples[i].m_max, rng);
      const auto enc = network_input(net_cfg.encoding, encode_payload(net_cfg.encoding, p, EncodingPhase::train));
      for (int j = 0; j < P; ++j) payload[static_cast<std::size_t>(b * P + j)] = static_cast<float>(enc[static_cast<std::size_t>(j)]);
      const auto ab = static_cast<float>(ck.schedule.alpha_bar[static_cast<std::size_t>(k)]);
      const float sa = std::sqrt(ab), sn = std::sqrt(1.0f - ab);
      const float* src = x0[i].ptr();
      float* xd = xk.ptr() + static_cast<std::size_t>(b) * HC;
      float* td = target.ptr() + static_cast<std::size_t>(b) * HC;
      for (std::size_t e = 0; e < HC; ++e) {
        const float eps = normal(rng);
        xd[e] = sa * src[e] + sn * eps;
        td[e] = eps;
      }
      // Endpoints are known at sampling time; the target is the noise that
      // would have produced the inpainted value.
      for (int c = 0; c < C; ++c) {
        for (const int h : {0, H - 1}) {
          const std::size_t e = static_cast<std::size_t>(c * H + h);
          xd[e] = src[e];
          td[e] = (1.0f - sa) * src[e] / sn;
        }
      }
    }

    net.parameters().zero_grad();
    nn::Graph<float> g;
    const nn::Var eps =
        predict_noise(g, net, ck.schedule, g.input(std::move(xk)), ks, g.input(std::move(payload)));
    const nn::Var loss = g.mse(eps, g.input(std::move(target)));
    const double lv = g.value(loss)[0];
    auto diverged = [&](const std::string& what) {
      if (!cfg.rescue_path.empty()) save_checkpoint(ck, cfg.rescue_path);
      throw Error("training diverged at step " + std::to_string(it) + ": " + what +
                  (cfg.rescue_path.empty() ? "" : "; last good weights saved to " + cfg.rescue_path.string()));
    };
    if (!std::isfinite(lv)) diverged("non-finite loss");
    g.backward(loss);
    if (cfg.max_grad_norm > 0.0) {
      double sq = 0.0;
      for (std::size_t p = 0; p < net.parameters().size(); ++p)
        for (float v : net.parameters()[p].grad.data) sq += static_cast<double>(v) * v;
      if (!std::isfinite(sq)) diverged("non-finite gradient");
      const double norm = std::sqrt(sq);
      if (norm > cfg.max_grad_norm) {
        const auto f = static_cast<float>(cfg.max_grad_norm / norm);
        for (std::size_t p = 0; p < net.parameters().size(); ++p)
          for (float& v : net.parameters()[p].grad.data) v *= f;
      }
    }
    try {
      opt.step();
    } catch (const Error& e) {
      diverged(e.what());
    }
    res.losses.push_back(lv);
    if (on_step) on_step(it, lv);
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ck.training["final_loss"] = res.losses.back();
  return res;
}

}  // namespace paydiff
