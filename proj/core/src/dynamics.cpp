#include "paydiff/dynamics.hpp"

#include <cmath>
#include <limits>

#include "paydiff/trajectory.hpp"

namespace paydiff {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite input");
}

Vector rnea(const RobotModel& model, const Vector& q, const Vector& qd, const Vector& qdd, const Vector6& f_ext,
            const Vector3& base_acc, bool with_friction) {
  const int n = model.n_dof();
  const Frames frames = forward_kinematics(model, q);

  std::vector<Vector3> omega(static_cast<std::size_t>(n)), alpha(static_cast<std::size_t>(n));
  std::vector<Vector3> force(static_cast<std::size_t>(n)), moment(static_cast<std::size_t>(n));
  std::vector<Vector3> com_world(static_cast<std::size_t>(n));

  // Outward pass. Vectors are expressed in world coordinates; the base
  // acceleration carries -gravity so gravity terms fall out of the recursion.
  Vector3 w_prev = Vector3::Zero(), dw_prev = Vector3::Zero(), a_prev = base_acc;
  Vector3 p_prev = Vector3::Zero();
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Vector3 z = frames.joint_axis(model, i);
    const Vector3 p = frames.joint_position(i);
    const Vector3 r = p - p_prev;
    const Vector3 a_joint = a_prev + dw_prev.cross(r) + w_prev.cross(w_prev.cross(r));
    const Vector3 w = w_prev + z * qd(i);
    const Vector3 dw = dw_prev + z * qdd(i) + w_prev.cross(z * qd(i));

    const LinkInertia& link = model.links()[k];
    const Matrix3 R = frames.joints[k].linear();
    const Vector3 c = frames.joints[k] * link.com;
    const Vector3 rc = c - p;
    const Vector3 a_com = a_joint + dw.cross(rc) + w.cross(w.cross(rc));
    const Matrix3 I_world = R * link.inertia * R.transpose();

    omega[k] = w;
    alpha[k] = dw;
    com_world[k] = c;
    force[k] = link.mass * a_com;
    moment[k] = I_world * dw + w.cross(I_world * w);

    w_prev = w;
    dw_prev = dw;
    a_prev = a_joint;
    p_prev = p;
  }

  // Inward pass: f_i/n_i are the force/moment link i-1 exerts on link i,
  // moments taken about joint i.
  Vector tau(n);
  const Vector3 p_ee = frames.ee.translation();
  Vector3 f_child = -f_ext.head<3>();
  Vector3 n_child = -f_ext.tail<3>();
  Vector3 p_child = p_ee;
  for (int i = n - 1; i >= 0; --i) {
    const auto k = static_cast<std::size_t>(i);
    const Vector3 p = frames.joint_position(i);
    const Vector3 f = force[k] + f_child;
    const Vector3 nm = moment[k] + n_child + (com_world[k] - p).cross(force[k]) + (p_child - p).cross(f_child);
    tau(i) = frames.joint_axis(model, i).dot(nm);
    f_child = f;
    n_child = nm;
    p_child = p;
  }
  if (with_friction) tau += friction_torque(model, qd);
  return tau;
}

}  // namespace

PayloadWrench payload_wrench(const RobotModel& model, double mass) {
  if (!(mass >= 0.0)) throw DomainError("payload mass must be >= 0");
  PayloadWrench w;
  w.mass = mass;
  const double g = model.gravity().norm();
  if (g > 0.0) w.wrench_world.head<3>() = mass * g * (model.gravity() / g);
  return w;
}

Vector friction_torque(const RobotModel& model, const Vector& qd) {
  require_dim(qd.size(), model.n_dof(), "friction_torque qd");
  Vector f(model.n_dof());
  for (int i = 0; i < model.n_dof(); ++i) {
    const FrictionParams& p = model.friction()[static_cast<std::size_t>(i)];
    f(i) = p.viscous * qd(i) + p.coulomb * std::tanh(qd(i) / p.smoothing_eps);
  }
  return f;
}

Vector inverse_dynamics(const RobotModel& model, const Vector& q, const Vector& qd, const Vector& qdd,
                        const Vector6& f_ext) {
  const int n = model.n_dof();
  require_dim(q.size(), n, "inverse_dynamics q");
  require_dim(qd.size(), n, "inverse_dynamics qd");
  require_dim(qdd.size(), n, "inverse_dynamics qdd");
  require_finite(q, "inverse_dynamics q");
  require_finite(qd, "inverse_dynamics qd");
  require_finite(qdd, "inverse_dynamics qdd");
  if (!f_ext.allFinite()) throw DomainError("inverse_dynamics f_ext: non-finite input");
  return rnea(model, q, qd, qdd, f_ext, -model.gravity(), true);
}

Vector gravity_torque(const RobotModel& model, const Vector& q) {
  require_dim(q.size(), model.n_dof(), "gravity_torque q");
  const Vector zero = Vector::Zero(model.n_dof());
  return rnea(model, q, zero, zero, Vector6::Zero(), -model.gravity(), false);
}

Matrix mass_matrix(const RobotModel& model, const Vector& q) {
  const int n = model.n_dof();
  require_dim(q.size(), n, "mass_matrix q");
  const Vector zero = Vector::Zero(n);
  Matrix M(n, n);
  for (int j = 0; j < n; ++j) {
    const Vector e = Vector::Unit(n, j);
    M.col(j) = rnea(model, q, zero, e, Vector6::Zero(), Vector3::Zero(), false);
  }
  return 0.5 * (M + M.transpose());
}

Vector payload_torque(const RobotModel& model, const Vector& q, double mass) {
  const PayloadWrench w = payload_wrench(model, mass);
  return -jacobian(model, q).transpose() * w.wrench_world;
}

TorqueProfile validate_torques(const RobotModel& model, const Trajectory& traj, double mass) {
  if (traj.horizon() == 0) throw DomainError("validate_torques: empty trajectory");
  require_dim(traj.n_dof(), model.n_dof(), "validate_torques trajectory n_dof");
  const PayloadWrench w = payload_wrench(model, mass);
  const Vector tau_max = model.tau_max();
  TorqueProfile out;
  out.tau.resize(traj.horizon(), model.n_dof());
  out.margin.resize(traj.horizon(), model.n_dof());
  out.feasible = true;
  for (int t = 0; t < traj.horizon(); ++t) {
    const Vector tau = inverse_dynamics(model, traj.q(t), traj.qd(t), traj.qdd(t), w.wrench_world);
    out.tau.row(t) = tau.transpose();
    out.margin.row(t) = (tau_max - tau.cwiseAbs()).transpose();
  }
  out.feasible = out.margin.minCoeff() >= -kTorqueTolerance;
  return out;
}

std::optional<double> max_supported_payload(const RobotModel& model, const Trajectory& traj) {
  if (traj.horizon() == 0) throw DomainError("max_supported_payload: empty trajectory");
  require_dim(traj.n_dof(), model.n_dof(), "max_supported_payload trajectory n_dof");
  const Vector tau_max = model.tau_max();
  double best = kPayloadCap;
  for (int t = 0; t < traj.horizon(); ++t) {
    const Vector tau0 = inverse_dynamics(model, traj.q(t), traj.qd(t), traj.qdd(t));
    const Vector per_kg = payload_torque(model, traj.q(t), 1.0);
    for (int i = 0; i < model.n_dof(); ++i) {
      if (std::abs(tau0(i)) > tau_max(i) + kTorqueTolerance) return std::nullopt;
      const double b = per_kg(i);
      if (b > 0.0) {
        best = std::min(best, (tau_max(i) - tau0(i)) / b);
      } else if (b < 0.0) {
        best = std::min(best, (tau_max(i) + tau0(i)) / -b);
      }
    }
  }
  return std::max(0.0, best);
}

}  // namespace paydiff
