#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "paydiff/dataset.hpp"
#include "paydiff/diffusion/denoiser.hpp"
#include "paydiff/diffusion/schedule.hpp"

namespace paydiff {

struct TrainConfig {
  int steps = 4000;
  int batch = 64;
  double lr = 1e-3;
  double max_grad_norm = 1.0;  // 0 disables clipping
  int diffusion_steps = 25;
  std::uint64_t seed = 0;
  /// Written when training diverges so the last good weights survive.
  std::filesystem::path rescue_path;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Trained denoiser plus everything needed to sample from it.
struct DiffusionCheckpoint {
  std::string model_name;
  std::uint64_t model_hash = 0;
  double dt = 0.0;
  NoiseSchedule schedule;
  NormalizationStats normalization;
  nlohmann::json training;  // TrainConfig, seed, final loss
  std::unique_ptr<Denoiser<float>> net;

  const DenoiserConfig& config() const { return net->config(); }
};

void save_checkpoint(const DiffusionCheckpoint& ckpt, const std::filesystem::path& path);
/// With `expected`, refuses checkpoints trained for a different model.
DiffusionCheckpoint load_checkpoint(const std::filesystem::path& path, const RobotModel* expected = nullptr);

struct TrainResult {
  DiffusionCheckpoint checkpoint;
  std::vector<double> losses;  // one per step
  double seconds = 0.0;
};

/// Epsilon-prediction training with endpoint inpainting. Deterministic for a
/// given seed. `net` fields n_dof and horizon are taken from the dataset.
/// Throws Error on a non-finite loss or gradient.
TrainResult train_diffusion(const Dataset& data, DenoiserConfig net, const TrainConfig& cfg,
                            const std::function<void(int, double)>& on_step = {});

/// Dataset states (horizon x 3n) to the network layout [3n, horizon] and back.
nn::Tensor<float> to_channels(const Matrix& normalized_states);
Matrix from_channels(const float* data, int channels, int horizon);

}  // namespace paydiff
