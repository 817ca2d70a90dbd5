#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "paydiff/arm_model.hpp"
#include "paydiff/planners.hpp"
#include "paydiff/trajectory.hpp"
#include "paydiff/world.hpp"

namespace paydiff {

/// Axis-aligned box of end-effector positions (world frame).
struct Region {
  Vector3 lo = Vector3::Zero();
  Vector3 hi = Vector3::Zero();

  bool contains(const Vector3& p, double tol = 1e-9) const {
    return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
  }
};

struct WorkspaceSpec {
  Region pick;
  Region place;
  /// Planar arms: sample joints uniformly and keep configurations whose end
  /// effector falls in the region. Otherwise: damped least-squares IK.
  bool direct_joint_sampling = true;
  int max_rejections = 200000;

  static WorkspaceSpec defaults(const RobotModel& model);
};

nlohmann::json workspace_to_json(const WorkspaceSpec& spec);
WorkspaceSpec workspace_from_json(const nlohmann::json& j);

/// Collision-free configuration within limits whose end effector lies in `region`.
Vector sample_configuration(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                            const Region& region, const WorkspaceSpec& spec, Rng& rng);

/// Pick-to-place (or place-to-pick, chosen at random) query at rest.
Problem sample_problem(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                       const WorkspaceSpec& spec, Rng& rng);

/// Problem i is drawn from derive_seed(seed, i) and gets id i.
std::vector<Problem> problem_suite(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                                   const WorkspaceSpec& spec, int count, std::uint64_t seed);

/// Per-channel affine map of states [q | qd | qdd] onto [-1, 1] from the joint limits.
struct NormalizationStats {
  Vector center;  // 3 n_dof
  Vector scale;   // 3 n_dof, half ranges

  static NormalizationStats from_limits(const RobotModel& model);
  int channels() const { return static_cast<int>(center.size()); }
  /// Rows are states.
  Matrix normalize(const Matrix& states) const;
  Matrix denormalize(const Matrix& normalized) const;
  bool operator==(const NormalizationStats& o) const { return center == o.center && scale == o.scale; }
};

struct Sample {
  Trajectory trajectory;
  double m_max = 0.0;  // kg
  std::uint64_t problem_id = 0;
  std::string planner_tag;

  bool operator==(const Sample& o) const {
    return trajectory == o.trajectory && m_max == o.m_max && problem_id == o.problem_id &&
           planner_tag == o.planner_tag;
  }
};

struct Dataset {
  std::string model_name;
  std::uint64_t model_hash = 0;
  int n_dof = 0;
  int horizon = 0;
  double dt = 0.0;
  NormalizationStats normalization;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Dataset& o) const {
    return model_name == o.model_name && model_hash == o.model_hash && n_dof == o.n_dof && horizon == o.horizon &&
           dt == o.dt && normalization == o.normalization && samples == o.samples;
  }
};

struct DatasetConfig {
  int count = 2000;
  std::uint64_t seed = 0;
  int threads = 1;
  WorkspaceSpec workspace;
  PlanFilterConfig planner;  // wall-clock timeout is ignored; iteration caps keep runs reproducible
  int problems_per_sample = 5;     // fresh problems tried before an index counts as failed
  double max_failure_rate = 0.2;   // over all tried problems
  int audit_every = 100;           // grid-oracle label audit on every k-th sample
};

/// Plans every sample at payload 0 and labels it with max_supported_payload.
/// Output is identical for any thread count. `progress(done, total)` is
/// called from worker threads.
Dataset generate_dataset(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                         const DatasetConfig& config,
                         const std::function<void(int, int)>& progress = {});

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
/// With `expected`, refuses files written for a different model.
Dataset load_dataset(const std::filesystem::path& path, const RobotModel* expected = nullptr);

/// Counts of labels per 1 kg bin over [0, 18].
std::vector<int> payload_histogram(const Dataset& dataset);

}  // namespace paydiff
