#include "paydiff/diffusion/schedule.hpp"

#include <cmath>
#include <numbers>

#include "paydiff/common.hpp"

namespace paydiff {

NoiseSchedule NoiseSchedule::cosine(int K, double s, double max_beta) {
  if (K < 1) throw DomainError("noise schedule needs K >= 1");
  auto f = [&](double k) {
    const double c = std::cos((k / K + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  NoiseSchedule sc;
  sc.K = K;
  const auto n = static_cast<std::size_t>(K + 1);
  sc.beta.assign(n, 0.0);
  sc.alpha_bar.assign(n, 1.0);
  sc.alpha.assign(n, 1.0);
  sc.gamma.assign(n, 0.0);
  sc.sigma.assign(n, 0.0);
  sc.posterior_std.assign(n, 0.0);
  for (int k = 1; k <= K; ++k) {
    const auto u = static_cast<std::size_t>(k);
    sc.beta[u] = std::min(max_beta, 1.0 - f(k) / f(k - 1));
    sc.alpha_bar[u] = sc.alpha_bar[u - 1] * (1.0 - sc.beta[u]);
    sc.alpha[u] = 1.0 / std::sqrt(1.0 - sc.beta[u]);
    sc.gamma[u] = sc.beta[u] / std::sqrt(1.0 - sc.alpha_bar[u]);
    const double tilde = (1.0 - sc.alpha_bar[u - 1]) / (1.0 - sc.alpha_bar[u]) * sc.beta[u];
    sc.posterior_std[u] = std::sqrt(tilde);
    sc.sigma[u] = sc.posterior_std[u] / sc.alpha[u];
  }
  return sc;
}

double NoiseSchedule::noise_level(int k) const { return std::sqrt(1.0 - alpha_bar.at(static_cast<std::size_t>(k))); }

std::vector<int> ddim_timesteps(int K, int S) {
  if (S < 1 || S > K) throw DomainError("ddim steps must satisfy 1 <= S <= K");
  std::vector<int> t{K};
  for (int i = 1; i < S; ++i) t.push_back(K - static_cast<int>(std::lround(static_cast<double>(i) * (K - 1) / (S - 1))));
  t.push_back(0);
  return t;
}

DdimCoefficients ddim_coefficients(const NoiseSchedule& s, int t, int t_prev, double eta) {
  const double ab = s.alpha_bar.at(static_cast<std::size_t>(t));
  const double ap = s.alpha_bar.at(static_cast<std::size_t>(t_prev));
  const double var = eta * eta * (1.0 - ap) / (1.0 - ab) * (1.0 - ab / ap);
  return {std::sqrt(ap), std::sqrt(std::max(0.0, 1.0 - ap - var)), std::sqrt(var)};
}

}  // namespace paydiff
