#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "paydiff/arm_model.hpp"
#include "paydiff/trajectory.hpp"
#include "paydiff/world.hpp"

namespace paydiff {

struct Tolerances {
  double endpoint = 1e-6;        // rad, start/goal position match
  double rest = 1e-9;            // |qd|, |qdd| at both ends
  double limits = 1e-9;          // slack on position and ratio limits
  double consistency = 0.1;      // finite-difference deviation / (v_max or a_max)
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // >= 0 when passing; units depend on the check
};

/// Checks, in order: endpoints, position_limits, velocity_limits,
/// acceleration_limits, consistency, collision, torque.
struct ValidityReport {
  std::vector<CheckResult> checks;
  bool valid = false;
  double payload = 0.0;

  const CheckResult& check(const std::string& name) const;
  /// Names of failing checks, comma separated ("" when valid).
  std::string failures() const;
};

/// Full gate: a trajectory is valid at `payload` iff every check passes.
/// `problem` supplies the expected start/goal and the scene.
ValidityReport validate(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                        const Trajectory& traj, double payload, const Tolerances& tol = {});

nlohmann::json validity_to_json(const ValidityReport& report);

}  // namespace paydiff
