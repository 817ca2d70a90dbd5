#pragma once

#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "paydiff/common.hpp"

namespace paydiff {

using Transform = Eigen::Isometry3d;

struct LinkInertia {
  double mass = 0.0;             // kg
  Vector3 com = Vector3::Zero();  // link frame, m
  Matrix3 inertia = Matrix3::Zero();  // about the COM, link-frame axes, kg m^2
};

struct JointLimits {
  double q_min = 0.0;
  double q_max = 0.0;
  double v_max = 0.0;
  double a_max = 0.0;
  double j_max = 0.0;
  double tau_max = 0.0;
};

struct FrictionParams {
  double viscous = 0.0;
  double coulomb = 0.0;
  double smoothing_eps = 0.05;
};

/// Revolute joint: fixed transform from the parent frame followed by a
/// rotation of q about `axis` (unit, expressed in the joint frame).
struct Joint {
  Transform origin = Transform::Identity();
  Vector3 axis = Vector3::UnitZ();
};

/// Immutable description of a serial revolute manipulator.
///
/// Link i is rigidly attached to the frame of joint i after its rotation.
/// Construct through `RobotModel::create` (or the JSON loader) so that all
/// invariants are checked once.
class RobotModel {
 public:
  static RobotModel create(std::string name, std::vector<Joint> joints, std::vector<LinkInertia> links,
                           std::vector<JointLimits> limits, std::vector<FrictionParams> friction,
                           Transform ee_offset, Vector3 gravity = Vector3(0.0, 0.0, -9.81),
                           double nominal_payload = 0.0);

  const std::string& name() const { return name_; }
  int n_dof() const { return static_cast<int>(joints_.size()); }
  int state_dim() const { return 3 * n_dof(); }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<LinkInertia>& links() const { return links_; }
  const std::vector<JointLimits>& limits() const { return limits_; }
  const std::vector<FrictionParams>& friction() const { return friction_; }
  const Transform& ee_offset() const { return ee_offset_; }
  const Vector3& gravity() const { return gravity_; }
  /// Manufacturer-style rated payload in kg (illustrative for presets).
  double nominal_payload() const { return nominal_payload_; }

  Vector q_min() const;
  Vector q_max() const;
  Vector v_max() const;
  Vector a_max() const;
  Vector j_max() const;
  Vector tau_max() const;

  /// Hash of the canonical JSON form; stored in dataset and checkpoint headers.
  std::uint64_t hash() const;

 private:
  RobotModel() = default;

  std::string name_;
  std::vector<Joint> joints_;
  std::vector<LinkInertia> links_;
  std::vector<JointLimits> limits_;
  std::vector<FrictionParams> friction_;
  Transform ee_offset_ = Transform::Identity();
  Vector3 gravity_ = Vector3(0.0, 0.0, -9.81);
  double nominal_payload_ = 0.0;
};

struct Frames {
  /// World pose of each joint frame, after the joint rotation.
  std::vector<Transform> joints;
  Transform ee;

  Vector3 joint_position(int i) const { return joints[static_cast<std::size_t>(i)].translation(); }
  /// World-frame rotation axis of joint i.
  Vector3 joint_axis(const RobotModel& model, int i) const;
};

Frames forward_kinematics(const RobotModel& model, const Vector& q);

/// 6 x n geometric Jacobian at the end effector, linear rows first.
Matrix jacobian(const RobotModel& model, const Vector& q);

/// 3 x n Jacobian of a point rigidly attached to link `link` (world coordinates
/// of the point are given). Columns of joints beyond `link` are zero.
Eigen::Matrix<double, 3, Eigen::Dynamic> point_jacobian(const RobotModel& model, const Frames& frames, int link,
                                                         const Vector3& point_world);

/// Named presets: "planar2", "planar3", "arm7".
std::vector<std::string> builtin_model_names();
RobotModel builtin_model(const std::string& name);

/// Rotation of `angle` about unit `axis`.
Transform axis_rotation(const Vector3& axis, double angle);

}  // namespace paydiff
