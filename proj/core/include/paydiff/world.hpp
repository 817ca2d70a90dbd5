#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "paydiff/arm_model.hpp"

namespace paydiff {

class Trajectory;

struct SphereObstacle {
  Vector3 center = Vector3::Zero();
  double radius = 0.0;
};

struct BoxObstacle {
  Vector3 min = Vector3::Zero();
  Vector3 max = Vector3::Zero();
};

/// Solid region {x : normal . x <= offset}; `normal` points out of the solid.
struct HalfSpaceObstacle {
  Vector3 normal = Vector3::UnitZ();
  double offset = 0.0;
};

using Obstacle = std::variant<SphereObstacle, BoxObstacle, HalfSpaceObstacle>;

/// Signed distance from `p` to the obstacle surface (negative inside) and
/// its gradient with respect to p.
double signed_distance(const Obstacle& obstacle, const Vector3& p, Vector3* gradient = nullptr);

struct Scene {
  std::vector<Obstacle> obstacles;
  double margin = 0.01;

  /// Throws DomainError when an obstacle or the margin is malformed.
  void validate() const;
};

struct CollisionProxy {
  int link = 0;
  Vector3 local_offset = Vector3::Zero();
  double radius = 0.0;
};

struct CollisionProxySet {
  std::vector<CollisionProxy> proxies;

  void validate(const RobotModel& model) const;
};

/// Sphere approximation shipped with each preset.
CollisionProxySet default_proxies(const RobotModel& model);

/// Table with a block obstacle, laid out for the preset's workspace.
Scene tabletop_scene(const RobotModel& model);

bool in_collision(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& q);

/// Smallest clearance (distance minus proxy radius) over proxies and obstacles.
double min_clearance(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& q);

/// Sum over proxies and obstacles of max(0, r + margin - d)^2 at one configuration.
double collision_cost(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& q,
                      Vector* gradient = nullptr);

/// Sum of the per-waypoint cost over the trajectory.
double collision_cost(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                      const Trajectory& traj);

/// horizon x n_dof gradient of the trajectory cost with respect to joint
/// positions. Velocity and acceleration channels have zero gradient.
Matrix collision_cost_gradient(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                               const Trajectory& traj);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);
Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

}  // namespace paydiff
