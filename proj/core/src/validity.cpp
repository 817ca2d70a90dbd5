#include "paydiff/validity.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "paydiff/dynamics.hpp"

namespace paydiff {

const CheckResult& ValidityReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw DomainError("validity report has no check named '" + name + "'");
}

std::string ValidityReport::failures() const {
  std::string out;
  for (const auto& c : checks) {
    if (c.pass) continue;
    if (!out.empty()) out += ",";
    out += c.name;
  }
  return out;
}

ValidityReport validate(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                        const Trajectory& traj, double payload, const Tolerances& tol) {
  ValidityReport r;
  r.payload = payload;
  const int n = model.n_dof();
  const int H = traj.horizon();
  if (traj.n_dof() != n || H < 2) {
    r.checks.push_back({"shape", false, -1.0});
    return r;
  }

  {
    double err = 0.0;
    if (problem.start.size() == n) err = std::max(err, (traj.q(0) - problem.start).cwiseAbs().maxCoeff());
    if (problem.goal.size() == n) err = std::max(err, (traj.q(H - 1) - problem.goal).cwiseAbs().maxCoeff());
    const double rest = std::max({traj.qd(0).cwiseAbs().maxCoeff(), traj.qdd(0).cwiseAbs().maxCoeff(),
                                  traj.qd(H - 1).cwiseAbs().maxCoeff(), traj.qdd(H - 1).cwiseAbs().maxCoeff()});
    r.checks.push_back({"endpoints", err <= tol.endpoint && rest <= tol.rest, tol.endpoint - err});
  }

  const LimitReport lim = check_limits(model, traj, tol.limits);
  r.checks.push_back({"position_limits", lim.max_position_violation <= tol.limits, -lim.max_position_violation});
  r.checks.push_back({"velocity_limits", lim.max_velocity_ratio <= 1.0 + tol.limits, 1.0 - lim.max_velocity_ratio});
  r.checks.push_back(
      {"acceleration_limits", lim.max_acceleration_ratio <= 1.0 + tol.limits, 1.0 - lim.max_acceleration_ratio});

  const ConsistencyReport cons = check_consistency(traj, model, tol.consistency);
  r.checks.push_back({"consistency", cons.pass, tol.consistency - cons.max_normalized_deviation});

  double clearance = std::numeric_limits<double>::infinity();
  bool collision_free = true;
  if (!problem.scene.obstacles.empty()) {
    for (int t = 0; t < H; ++t) {
      const double c = min_clearance(model, proxies, problem.scene, traj.q(t));
      clearance = std::min(clearance, c - problem.scene.margin);
      if (c < problem.scene.margin) collision_free = false;
    }
  }
  r.checks.push_back({"collision", collision_free, std::isfinite(clearance) ? clearance : 1.0});

  const TorqueProfile tp = validate_torques(model, traj, payload);
  r.checks.push_back({"torque", tp.feasible, tp.min_margin()});

  r.valid = std::all_of(r.checks.begin(), r.checks.end(), [](const CheckResult& c) { return c.pass; });
  return r;
}

nlohmann::json validity_to_json(const ValidityReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}});
  return {{"valid", report.valid}, {"payload", report.payload}, {"checks", checks}};
}

}  // namespace paydiff
