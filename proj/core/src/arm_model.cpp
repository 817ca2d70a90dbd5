#include "paydiff/arm_model.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "paydiff/model_io.hpp"

namespace paydiff {

namespace {

std::string field(const char* group, std::size_t i, const char* name) {
  return std::string(group) + "[" + std::to_string(i) + "]." + name;
}

void check(bool ok, const std::string& path, const char* msg) {
  if (!ok) throw DomainError(path + ": " + msg);
}

void validate_inertia(const LinkInertia& link, std::size_t i) {
  check(std::isfinite(link.mass) && link.mass >= 0.0, field("links", i, "mass"), "must be finite and >= 0");
  check(link.com.allFinite(), field("links", i, "com"), "must be finite");
  const Matrix3& I = link.inertia;
  check(I.allFinite(), field("links", i, "inertia"), "must be finite");
  check((I - I.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, I.cwiseAbs().maxCoeff()),
        field("links", i, "inertia"), "must be symmetric");
  const Eigen::SelfAdjointEigenSolver<Matrix3> eig(I);
  const Vector3 ev = eig.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  check(ev.minCoeff() >= -tol, field("links", i, "inertia"), "must be positive semidefinite");
  if (link.mass > 0.0) {
    check(ev(0) + ev(1) >= ev(2) - tol, field("links", i, "inertia"), "principal moments violate the triangle inequality");
  }
}

}  // namespace

Transform axis_rotation(const Vector3& axis, double angle) {
  Transform t = Transform::Identity();
  t.linear() = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  return t;
}

RobotModel RobotModel::create(std::string name, std::vector<Joint> joints, std::vector<LinkInertia> links,
                              std::vector<JointLimits> limits, std::vector<FrictionParams> friction,
                              Transform ee_offset, Vector3 gravity, double nominal_payload) {
  const std::size_t n = joints.size();
  check(n >= 1, "joints", "model needs at least one joint");
  check(links.size() == n, "links", "one entry per joint required");
  check(limits.size() == n, "limits", "one entry per joint required");
  check(friction.size() == n, "friction", "one entry per joint required");
  for (std::size_t i = 0; i < n; ++i) {
    check(joints[i].axis.allFinite() && std::abs(joints[i].axis.norm() - 1.0) <= 1e-9, field("joints", i, "axis"),
          "not unit norm");
    check(joints[i].origin.matrix().allFinite(), field("joints", i, "origin"), "must be finite");
    validate_inertia(links[i], i);
    const JointLimits& l = limits[i];
    check(std::isfinite(l.q_min) && std::isfinite(l.q_max) && l.q_min < l.q_max, field("limits", i, "q_min"),
          "must be finite and < q_max");
    check(l.v_max > 0.0, field("limits", i, "v_max"), "must be > 0");
    check(l.a_max > 0.0, field("limits", i, "a_max"), "must be > 0");
    check(l.j_max > 0.0, field("limits", i, "j_max"), "must be > 0");
    check(l.tau_max > 0.0, field("limits", i, "tau_max"), "must be > 0");
    const FrictionParams& f = friction[i];
    check(f.viscous >= 0.0, field("friction", i, "viscous"), "must be >= 0");
    check(f.coulomb >= 0.0, field("friction", i, "coulomb"), "must be >= 0");
    check(f.smoothing_eps > 0.0, field("friction", i, "smoothing_eps"), "must be > 0");
  }
  check(gravity.allFinite(), "gravity", "must be finite");
  check(nominal_payload >= 0.0, "nominal_payload", "must be >= 0");

  RobotModel m;
  m.name_ = std::move(name);
  m.joints_ = std::move(joints);
  for (auto& j : m.joints_) j.axis.normalize();
  m.links_ = std::move(links);
  m.limits_ = std::move(limits);
  m.friction_ = std::move(friction);
  m.ee_offset_ = ee_offset;
  m.gravity_ = gravity;
  m.nominal_payload_ = nominal_payload;
  return m;
}

#define PAYDIFF_LIMIT_VECTOR(fn, member)                                        \
  Vector RobotModel::fn() const {                                               \
    Vector v(n_dof());                                                          \
    for (int i = 0; i < n_dof(); ++i) v(i) = limits_[static_cast<std::size_t>(i)].member; \
    return v;                                                                   \
  }
PAYDIFF_LIMIT_VECTOR(q_min, q_min)
PAYDIFF_LIMIT_VECTOR(q_max, q_max)
PAYDIFF_LIMIT_VECTOR(v_max, v_max)
PAYDIFF_LIMIT_VECTOR(a_max, a_max)
PAYDIFF_LIMIT_VECTOR(j_max, j_max)
PAYDIFF_LIMIT_VECTOR(tau_max, tau_max)
#undef PAYDIFF_LIMIT_VECTOR

std::uint64_t RobotModel::hash() const { return fnv1a64(model_to_json(*this).dump()); }

Vector3 Frames::joint_axis(const RobotModel& model, int i) const {
  const auto k = static_cast<std::size_t>(i);
  return joints[k].linear() * model.joints()[k].axis;
}

Frames forward_kinematics(const RobotModel& model, const Vector& q) {
  require_dim(q.size(), model.n_dof(), "forward_kinematics q");
  Frames f;
  f.joints.reserve(static_cast<std::size_t>(model.n_dof()));
  Transform t = Transform::Identity();
  for (int i = 0; i < model.n_dof(); ++i) {
    const Joint& j = model.joints()[static_cast<std::size_t>(i)];
    t = t * j.origin * axis_rotation(j.axis, q(i));
    f.joints.push_back(t);
  }
  f.ee = t * model.ee_offset();
  return f;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> point_jacobian(const RobotModel& model, const Frames& frames, int link,
                                                         const Vector3& point_world) {
  Eigen::Matrix<double, 3, Eigen::Dynamic> J = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, model.n_dof());
  for (int i = 0; i <= link; ++i) {
    J.col(i) = frames.joint_axis(model, i).cross(point_world - frames.joint_position(i));
  }
  return J;
}

Matrix jacobian(const RobotModel& model, const Vector& q) {
  const Frames f = forward_kinematics(model, q);
  const Vector3 p_ee = f.ee.translation();
  Matrix J(6, model.n_dof());
  for (int i = 0; i < model.n_dof(); ++i) {
    const Vector3 z = f.joint_axis(model, i);
    J.block<3, 1>(0, i) = z.cross(p_ee - f.joint_position(i));
    J.block<3, 1>(3, i) = z;
  }
  return J;
}

// ---------------------------------------------------------------------------
// Presets. Inertial values are illustrative, not calibrated robot data.

namespace {

Transform translation(double x, double y, double z) {
  Transform t = Transform::Identity();
  t.translation() = Vector3(x, y, z);
  return t;
}

LinkInertia rod_along_x(double mass, double length) {
  LinkInertia l;
  l.mass = mass;
  l.com = Vector3(length / 2.0, 0.0, 0.0);
  const double transverse = mass * length * length / 12.0;
  const double axial = 1e-3 * mass;
  l.inertia = Vector3(axial, transverse, transverse).asDiagonal();
  return l;
}

LinkInertia point_mass(double mass, const Vector3& at) {
  LinkInertia l;
  l.mass = mass;
  l.com = at;
  return l;
}

RobotModel make_planar2() {
  std::vector<Joint> joints(2);
  joints[1].origin = translation(1.0, 0.0, 0.0);
  std::vector<LinkInertia> links{point_mass(1.0, Vector3(1.0, 0.0, 0.0)), point_mass(1.0, Vector3(1.0, 0.0, 0.0))};
  const double pi = std::numbers::pi;
  std::vector<JointLimits> limits{{-pi, pi, 2.0, 10.0, 100.0, 100.0}, {-pi, pi, 2.0, 10.0, 100.0, 50.0}};
  std::vector<FrictionParams> friction{{0.1, 0.2, 0.05}, {0.1, 0.2, 0.05}};
  return RobotModel::create("planar2", joints, links, limits, friction, translation(1.0, 0.0, 0.0),
                            Vector3(0.0, -9.81, 0.0), 1.0);
}

// Vertical-plane arm: joints rotate about z, gravity along -y.
RobotModel make_planar3() {
  const double l1 = 0.45, l2 = 0.35, l3 = 0.25;
  std::vector<Joint> joints(3);
  joints[1].origin = translation(l1, 0.0, 0.0);
  joints[2].origin = translation(l2, 0.0, 0.0);
  std::vector<LinkInertia> links{rod_along_x(4.0, l1), rod_along_x(3.0, l2), rod_along_x(1.5, l3)};
  std::vector<JointLimits> limits{
      {-1.2, 4.35, 2.0, 4.0, 20.0, 70.0},
      {-2.7, 2.7, 2.0, 4.0, 20.0, 70.0},
      {-2.7, 2.7, 2.5, 5.0, 25.0, 40.0},
  };
  std::vector<FrictionParams> friction{{0.5, 0.3, 0.05}, {0.4, 0.2, 0.05}, {0.2, 0.1, 0.05}};
  return RobotModel::create("planar3", joints, links, limits, friction, translation(l3, 0.0, 0.0),
                            Vector3(0.0, -9.81, 0.0), 2.0);
}

// Seven-joint arm with Panda-like geometry (modified DH) and public
// manufacturer-style limits. Masses, COMs and inertias are hand-set.
RobotModel make_arm7() {
  const double pi = std::numbers::pi;
  const double alpha[7] = {0.0, -pi / 2, pi / 2, pi / 2, -pi / 2, pi / 2, pi / 2};
  const double a[7] = {0.0, 0.0, 0.0, 0.0825, -0.0825, 0.0, 0.088};
  const double d[7] = {0.333, 0.0, 0.316, 0.0, 0.384, 0.0, 0.0};
  std::vector<Joint> joints(7);
  for (int i = 0; i < 7; ++i) {
    joints[static_cast<std::size_t>(i)].origin =
        axis_rotation(Vector3::UnitX(), alpha[i]) * translation(a[i], 0.0, d[i]);
  }
  const double mass[7] = {4.97, 0.65, 3.23, 3.59, 1.23, 1.67, 1.47};
  const Vector3 com[7] = {Vector3(0.0, -0.03, -0.07), Vector3(0.0, -0.07, 0.03), Vector3(0.04, 0.02, -0.07),
                          Vector3(-0.05, 0.10, 0.03), Vector3(-0.01, 0.04, -0.11), Vector3(0.06, -0.01, 0.01),
                          Vector3(0.0, 0.0, 0.08)};
  const Vector3 diag[7] = {Vector3(0.70, 0.70, 0.01), Vector3(0.008, 0.028, 0.025), Vector3(0.037, 0.028, 0.011),
                           Vector3(0.026, 0.020, 0.028), Vector3(0.036, 0.029, 0.009), Vector3(0.002, 0.004, 0.005),
                           Vector3(0.010, 0.010, 0.004)};
  std::vector<LinkInertia> links;
  for (int i = 0; i < 7; ++i) {
    LinkInertia l;
    l.mass = mass[i];
    l.com = com[i];
    l.inertia = diag[i].asDiagonal();
    links.push_back(l);
  }
  const double q_min[7] = {-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973};
  const double q_max[7] = {2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973};
  const double v_max[7] = {2.175, 2.175, 2.175, 2.175, 2.61, 2.61, 2.61};
  const double a_max[7] = {15.0, 7.5, 10.0, 12.5, 15.0, 20.0, 20.0};
  const double j_max[7] = {7500.0, 3750.0, 5000.0, 6250.0, 7500.0, 10000.0, 10000.0};
  const double tau_max[7] = {87.0, 87.0, 87.0, 87.0, 12.0, 12.0, 12.0};
  std::vector<JointLimits> limits;
  std::vector<FrictionParams> friction;
  for (int i = 0; i < 7; ++i) {
    limits.push_back({q_min[i], q_max[i], v_max[i], a_max[i], j_max[i], tau_max[i]});
    friction.push_back({i < 4 ? 0.6 : 0.3, i < 4 ? 0.5 : 0.2, 0.05});
  }
  return RobotModel::create("arm7", joints, links, limits, friction, translation(0.0, 0.0, 0.107 + 0.1034),
                            Vector3(0.0, 0.0, -9.81), 3.0);
}

}  // namespace

std::vector<std::string> builtin_model_names() { return {"planar2", "planar3", "arm7"}; }

RobotModel builtin_model(const std::string& name) {
  if (name == "planar2") return make_planar2();
  if (name == "planar3") return make_planar3();
  if (name == "arm7") return make_arm7();
  throw DomainError("unknown model preset '" + name + "'");
}

}  // namespace paydiff
