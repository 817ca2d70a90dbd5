#pragma once

#include <optional>
#include <vector>

#include "paydiff/arm_model.hpp"

namespace paydiff {

class Trajectory;

/// Largest payload label; also the top index of the payload encodings.
inline constexpr double kPayloadCap = 18.0;

/// Torque slack accepted by the torque-limit check, N m.
inline constexpr double kTorqueTolerance = 1e-9;

/// Gravity wrench of a point-mass payload held at the end effector, world frame.
struct PayloadWrench {
  double mass = 0.0;
  Vector6 wrench_world = Vector6::Zero();
};

/// F = m |g| [g_hat, 0, 0, 0]. For the default gravity this is
/// m 9.81 [0, 0, -1, 0, 0, 0].
PayloadWrench payload_wrench(const RobotModel& model, double mass);

/// Joint friction f(qd) = viscous qd + coulomb tanh(qd / eps).
Vector friction_torque(const RobotModel& model, const Vector& qd);

/// Recursive Newton-Euler inverse dynamics including friction:
///   tau = M(q) qdd + C(q, qd) qd + g(q) + f(qd) - J(q)^T f_ext
/// where f_ext is the wrench the environment applies to the end effector
/// (world frame, moments about the end-effector point).
Vector inverse_dynamics(const RobotModel& model, const Vector& q, const Vector& qd, const Vector& qdd,
                        const Vector6& f_ext = Vector6::Zero());

/// Gravity vector g(q).
Vector gravity_torque(const RobotModel& model, const Vector& q);

/// Joint-space inertia matrix, built column by column from RNEA.
Matrix mass_matrix(const RobotModel& model, const Vector& q);

/// Joint torque induced by a payload of `mass` kg: -J(q)^T F_g. Linear in mass.
Vector payload_torque(const RobotModel& model, const Vector& q, double mass);

struct TorqueProfile {
  Matrix tau;     // horizon x n_dof
  Matrix margin;  // tau_max - |tau|
  bool feasible = false;
  double min_margin() const { return margin.minCoeff(); }
};

/// Torques along a trajectory carrying `mass`; feasible iff |tau| <= tau_max
/// (within kTorqueTolerance) at every waypoint and joint.
TorqueProfile validate_torques(const RobotModel& model, const Trajectory& traj, double mass);

/// Maximum payload in [0, kPayloadCap] the trajectory supports, from the
/// affine dependence tau_t(m) = tau_t(0) + m b_t. nullopt when the trajectory
/// already violates a torque limit without payload.
std::optional<double> max_supported_payload(const RobotModel& model, const Trajectory& traj);

}  // namespace paydiff
