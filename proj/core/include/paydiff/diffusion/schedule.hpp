#pragma once

#include <vector>

namespace paydiff {

/// Cosine-ᾱ schedule over steps k = 1..K. Arrays are indexed by k with
/// entry 0 describing clean data (ᾱ_0 = 1).
///
/// Forward process: x_k = sqrt(ᾱ_k) x_0 + sqrt(1 - ᾱ_k) ε.
/// Reverse step: x_{k-1} = alpha_k (x_k - gamma_k ε_θ + N(0, sigma_k^2 I)).
struct NoiseSchedule {
  int K = 0;
  std::vector<double> beta;       // β_k
  std::vector<double> alpha_bar;  // ᾱ_k
  std::vector<double> alpha;      // 1 / sqrt(1 - β_k)
  std::vector<double> gamma;      // β_k / sqrt(1 - ᾱ_k)
  std::vector<double> sigma;      // sqrt((1 - β_k) β̃_k): noise std inside the bracket
  std::vector<double> posterior_std;  // sqrt(β̃_k) = alpha_k sigma_k

  static NoiseSchedule cosine(int K, double s = 0.008, double max_beta = 0.999);

  double noise_level(int k) const;  // sqrt(1 - ᾱ_k)
};

/// S evenly spaced steps from K down to 1 (just K when S = 1), followed by 0.
std::vector<int> ddim_timesteps(int K, int S);

/// One DDIM transition coefficient set from step t to step t_prev.
struct DdimCoefficients {
  double x0_scale;      // sqrt(ᾱ_prev)
  double dir_scale;     // sqrt(1 - ᾱ_prev - s^2)
  double noise_std;     // s = η sqrt((1-ᾱ_prev)/(1-ᾱ_t)) sqrt(1 - ᾱ_t/ᾱ_prev)
};

DdimCoefficients ddim_coefficients(const NoiseSchedule& s, int t, int t_prev, double eta);

}  // namespace paydiff
