#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paydiff/diffusion/trainer.hpp"
#include "paydiff/world.hpp"

namespace paydiff {

enum class SamplerKind { ddpm, ddim };

std::string to_string(SamplerKind k);
SamplerKind parse_sampler(const std::string& s);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::ddim;
  int steps = 5;         // ddim only; ddpm always walks all K steps
  double eta = 0.0;      // ddim only
  double guidance = 0.1; // collision-gradient step scale, 0 disables
  bool clamp = true;
  /// Least-squares fit of a piecewise-constant-jerk motion to the sampled
  /// states (per joint, rest endpoints pinned), so that positions, velocities
  /// and accelerations agree. Applied before the final clamp.
  bool refine = true;
  double refine_jerk_weight = 0.1;  // on (jerk / j_max)^2, relative to normalized state residuals
  double refine_derivative_weight = 1.0;  // on velocity and acceleration residuals, positions weigh 1
};

/// One denoising query. `scene` enables guidance when non-null.
struct SampleQuery {
  Vector start;
  Vector goal;
  double payload = 0.0;
  const Scene* scene = nullptr;
};

/// Draws `count` trajectories in one batch. Sample i uses its own generator
/// derived from (seed, i). Endpoints are exact with zero velocity and
/// acceleration; with clamping every state lies within the limits.
std::vector<Trajectory> sample_trajectories(const DiffusionCheckpoint& ckpt, const RobotModel& model,
                                            const CollisionProxySet& proxies, const SampleQuery& query,
                                            const SamplerConfig& cfg, int count, std::uint64_t seed);

/// The refinement step on its own; `scale` holds per-channel weights (the
/// normalization half ranges).
Trajectory refine_consistency(const RobotModel& model, const Trajectory& traj, const Vector& scale,
                              double jerk_weight, double derivative_weight = 1.0);

inline Trajectory sample_trajectory(const DiffusionCheckpoint& ckpt, const RobotModel& model,
                                    const CollisionProxySet& proxies, const SampleQuery& query,
                                    const SamplerConfig& cfg, std::uint64_t seed) {
  return sample_trajectories(ckpt, model, proxies, query, cfg, 1, seed).front();
}

}  // namespace paydiff
