#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "paydiff/arm_model.hpp"
#include "paydiff/trajectory.hpp"
#include "paydiff/validity.hpp"
#include "paydiff/world.hpp"

namespace paydiff {

enum class PlannerStatus { success, timeout, infeasible };

std::string to_string(PlannerStatus s);

struct PlannerResult {
  std::optional<Trajectory> trajectory;  // present iff status == success
  double planning_time = 0.0;            // s, wall clock
  long iterations = 0;
  PlannerStatus status = PlannerStatus::infeasible;
  std::string message;

  bool ok() const { return status == PlannerStatus::success; }
};

nlohmann::json planner_result_to_json(const PlannerResult& r, bool include_trajectory = false);

// --------------------------------------------------------------------------
// Geometric planning

enum class Sampler { halton, uniform };

struct RrtConfig {
  Sampler sampler = Sampler::halton;
  std::uint64_t seed = 0;
  /// First Halton index; callers vary it to obtain distinct deterministic plans.
  std::uint64_t halton_offset = 0;
  double timeout = 5.0;           // s
  long max_iterations = 200000;
  double resolution = 0.02;       // rad, max joint step between edge checks
  double range = 0.8;             // rad, max extension length (Euclidean)
  bool shortcut = true;
};

struct GeometricPath {
  std::vector<Vector> waypoints;
  PlannerStatus status = PlannerStatus::infeasible;
  long iterations = 0;
  double planning_time = 0.0;
};

/// Collision-free straight-line check between two configurations, sampled so
/// that no joint moves more than `resolution` between checks.
bool edge_free(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& a,
               const Vector& b, double resolution);

/// Bidirectional RRT. Deterministic for the Halton sampler and for a fixed
/// seed with the uniform sampler.
GeometricPath rrt_connect(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                          const RrtConfig& config = {});

/// Greedy shortcutting: from each kept waypoint jump to the farthest one
/// reachable by a free straight edge.
std::vector<Vector> shortcut_path(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                                  const std::vector<Vector>& path, double resolution);

// --------------------------------------------------------------------------
// Plan and filter

struct PlanFilterConfig {
  RrtConfig rrt;
  int max_attempts = 20;
  double dt = kDefaultDt;
  /// Fixed motion duration; nullopt gives the fastest limit-respecting motion.
  std::optional<double> duration = kDefaultDt * (kDefaultHorizon - 1);
  Tolerances tolerances;
};

/// Plans geometric paths, time-parameterizes them and keeps the first one
/// that passes the full validity gate at `payload`.
PlannerResult plan_and_filter(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                              double payload, const PlanFilterConfig& config = {});

// --------------------------------------------------------------------------
// Kinodynamic RRT

struct KinodynamicConfig {
  std::uint64_t seed = 0;
  double timeout = 120.0;          // s
  long max_iterations = 10000000;
  double goal_bias = 0.2;
  double max_extension_time = 0.6;  // s, steering is truncated here
  double dt = 0.01;                 // edge sampling and output step
  double velocity_weight = 1.0;     // metric weight on the time needed to stop
  /// Also try steering every new node (and the start) straight to the goal.
  /// Off: the goal is reached only by goal-biased extensions that arrive
  /// within max_extension_time.
  bool greedy_goal_connection = false;
  Tolerances tolerances;
};

/// Tree search over (q, qd, qdd). Edges are jerk-limited steering motions
/// towards sampled rest states, checked for collision, kinematic limits,
/// jerk limits and torque limits at `payload`. A candidate is returned once a
/// steering motion reaches the goal at rest and the whole trajectory passes
/// the validity gate.
PlannerResult kinodynamic_rrt(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                              double payload, const KinodynamicConfig& config = {});

/// Synchronized multi-joint steering from a moving state towards a rest
/// configuration: every joint follows a jerk-limited profile lasting the same
/// duration, rounded up to a multiple of dt.
struct SteeringMotion {
  std::vector<JerkProfile> joints;
  double duration = 0.0;

  void state_at(double t, Vector& q, Vector& qd, Vector& qdd) const;
};

SteeringMotion steer(const RobotModel& model, const Vector& q, const Vector& qd, const Vector& qdd,
                     const Vector& target, double dt);

// --------------------------------------------------------------------------
// Trajectory optimization

struct SqpConfig {
  int horizon = kDefaultHorizon;
  int max_iter = 200;               // inner iterations over all outer rounds
  int max_outer = 25;
  double kkt_tolerance = 1e-6;
  double step_tolerance = 1e-9;
  double feasibility_tolerance = 1e-6;
  double trust_region = 0.1;        // rad, largest position change per step
  double collision_inflation = 0.005;  // m added to the scene margin
  double initial_penalty = 10.0;
  Tolerances tolerances;
};

struct SqpDiagnostics {
  std::vector<double> objective;   // after each accepted step
  std::vector<double> merit;       // merit value after each accepted step, per outer round
  std::vector<int> outer_round;    // outer round of each accepted step
  double max_violation = 0.0;
  double kkt_residual = 0.0;
};

/// Minimizes sum_t |jerk_t|^2 dt over a piecewise-constant-jerk trajectory
/// with pinned rest endpoints and the given duration, subject to position,
/// velocity, acceleration, torque (at `payload`) and collision constraints.
/// Without `init`, starts from the straight-line minimum-jerk motion.
PlannerResult sqp_optimize(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                           double payload, double duration, const std::optional<Trajectory>& init = std::nullopt,
                           const SqpConfig& config = {}, SqpDiagnostics* diagnostics = nullptr);

/// Sum over intervals of |(qdd_{k+1} - qdd_k) / dt|^2 dt.
double jerk_cost(const Trajectory& traj);

}  // namespace paydiff
