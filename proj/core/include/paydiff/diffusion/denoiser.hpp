#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "paydiff/diffusion/encoding.hpp"
#include "paydiff/diffusion/schedule.hpp"
#include "paydiff/nn/graph.hpp"

namespace paydiff {

enum class Conditioning { film, additive };

std::string to_string(Conditioning c);
Conditioning parse_conditioning(const std::string& s);

struct DenoiserConfig {
  int n_dof = 3;
  int horizon = 64;
  std::vector<int> widths{32, 64, 128};
  int kernel = 5;
  int groups = 8;
  int time_dim = 64;
  int cond_dim = 64;
  PayloadEncoding encoding;
  Conditioning conditioning = Conditioning::film;

  int channels() const { return 3 * n_dof; }
  /// Throws DomainError on inconsistent settings (odd kernel, horizon not
  /// divisible by 2^(levels-1), widths not divisible by groups, ...).
  void check() const;

  nlohmann::json to_json() const;
  static DenoiserConfig from_json(const nlohmann::json& j);
};

/// Sinusoidal embedding of integer diffusion steps, shape [steps.size(), dim].
template <class T>
nn::Tensor<T> timestep_embedding(const std::vector<int>& steps, int dim);

/// Temporal U-Net predicting the noise of a [batch, 3n, horizon] trajectory
/// batch, conditioned on the diffusion step and an encoded payload.
template <class T>
class Denoiser {
 public:
  Denoiser(DenoiserConfig cfg, std::uint64_t seed);
  Denoiser(const Denoiser&) = delete;
  Denoiser& operator=(const Denoiser&) = delete;

  const DenoiserConfig& config() const { return cfg_; }
  nn::ParameterSet<T>& parameters() { return params_; }
  const nn::ParameterSet<T>& parameters() const { return params_; }

  /// x: [B, 3n, H]; payload: [B, encoding dim] network inputs; steps: B values.
  nn::Var forward(nn::Graph<T>& g, nn::Var x, const std::vector<int>& steps, nn::Var payload) const;

  /// Inference without recording a tape.
  nn::Tensor<T> predict(const nn::Tensor<T>& x, const std::vector<int>& steps, const nn::Tensor<T>& payload) const;

 private:
  struct Conv {
    nn::Parameter<T>* w;
    nn::Parameter<T>* b;
    int stride, padding;
  };
  struct Dense {
    nn::Parameter<T>* w;
    nn::Parameter<T>* b;
  };
  struct Norm {
    nn::Parameter<T>* gamma;
    nn::Parameter<T>* beta;
  };
  struct ResBlock {
    Conv c1, c2;
    Norm n1, n2;
    Dense cond;
    bool has_skip = false;
    Conv skip;
    int out = 0;
  };
  struct Level {
    ResBlock r1, r2;
    bool has_resample = false;
    Conv resample;
  };

  Conv make_conv(const std::string& name, int in, int out, int k, int stride, int padding);
  Dense make_dense(const std::string& name, int in, int out);
  Norm make_norm(const std::string& name, int c);
  ResBlock make_res(const std::string& name, int in, int out);

  nn::Var conv(nn::Graph<T>& g, const Conv& c, nn::Var x) const;
  nn::Var dense(nn::Graph<T>& g, const Dense& d, nn::Var x) const;
  nn::Var norm_act(nn::Graph<T>& g, const Norm& n, nn::Var x) const;
  nn::Var res(nn::Graph<T>& g, const ResBlock& r, nn::Var x, nn::Var cond) const;

  DenoiserConfig cfg_;
  nn::ParameterSet<T> params_;
  Rng rng_;
  Dense t1_, t2_, p1_, p2_;
  std::vector<Level> down_, up_;
  ResBlock mid_;
  Conv final_conv_, out_conv_;
  Norm final_norm_;
};

/// Noise estimate at step k: sqrt(1 - ᾱ_k) x + sqrt(ᾱ_k) F(x), with F the U-Net.
template <class T>
nn::Var predict_noise(nn::Graph<T>& g, const Denoiser<T>& net, const NoiseSchedule& schedule, nn::Var x,
                      const std::vector<int>& steps, nn::Var payload);

}  // namespace paydiff
