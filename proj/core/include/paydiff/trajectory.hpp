#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "paydiff/arm_model.hpp"
#include "paydiff/jerk_profile.hpp"
#include "paydiff/world.hpp"

namespace paydiff {

/// Fixed-step sequence of full states X_i = (q_i, qd_i, qdd_i).
class Trajectory {
 public:
  Trajectory() = default;
  /// `states` is horizon x (3 n_dof), columns ordered [q | qd | qdd].
  Trajectory(int n_dof, double dt, Matrix states);
  static Trajectory zeros(int n_dof, int horizon, double dt);

  int n_dof() const { return n_dof_; }
  int horizon() const { return static_cast<int>(states_.rows()); }
  double dt() const { return dt_; }
  double duration() const { return dt_ * (horizon() - 1); }

  const Matrix& states() const { return states_; }
  Matrix& states() { return states_; }

  Vector q(int t) const { return states_.row(t).segment(0, n_dof_).transpose(); }
  Vector qd(int t) const { return states_.row(t).segment(n_dof_, n_dof_).transpose(); }
  Vector qdd(int t) const { return states_.row(t).segment(2 * n_dof_, n_dof_).transpose(); }
  void set_state(int t, const Vector& q, const Vector& qd, const Vector& qdd);

  /// Column blocks, horizon x n_dof each.
  Matrix positions() const { return states_.leftCols(n_dof_); }
  Matrix velocities() const { return states_.middleCols(n_dof_, n_dof_); }
  Matrix accelerations() const { return states_.rightCols(n_dof_); }

  bool operator==(const Trajectory& o) const {
    return n_dof_ == o.n_dof_ && dt_ == o.dt_ && states_.rows() == o.states_.rows() && states_ == o.states_;
  }

 private:
  int n_dof_ = 0;
  double dt_ = 0.0;
  Matrix states_;
};

/// Fixed horizon and step for diffusion training data (5.04 s motions).
inline constexpr int kDefaultHorizon = 64;
inline constexpr double kDefaultDt = 0.08;

/// A pick-and-place query.
struct Problem {
  Vector start;
  Vector goal;
  Scene scene;
  double payload = 0.0;
  std::uint64_t id = 0;
};

struct ConsistencyReport {
  double max_velocity_deviation = 0.0;      // |qd - d q/dt|, rad/s
  double max_acceleration_deviation = 0.0;  // |qdd - d qd/dt|, rad/s^2
  double max_normalized_deviation = 0.0;    // deviations divided by v_max / a_max (when limits given)
  bool pass = false;
};

/// Compares stored derivatives with second-order finite differences of the
/// stored positions and velocities. `pass` uses the absolute deviations.
ConsistencyReport check_consistency(const Trajectory& traj, double tol);

/// Same, but deviations are scaled per joint by v_max and a_max and `pass`
/// compares the scaled deviation with `tol`.
ConsistencyReport check_consistency(const Trajectory& traj, const RobotModel& model, double tol);

/// dt' = s dt, qd' = qd / s, qdd' = qdd / s^2.
Trajectory time_scale(const Trajectory& traj, double s);

/// Phase-synchronized straight-line rest-to-rest motion: every joint follows
/// the same normalized jerk-limited progress curve.
struct SynchronizedProfile {
  Vector start;
  Vector delta;
  JerkProfile progress;  // 0 -> 1

  double duration() const { return progress.duration(); }
  void state_at(double t, Vector& q, Vector& qd, Vector& qdd) const;
};

SynchronizedProfile synchronized_profile(const RobotModel& model, const Vector& start, const Vector& goal);

/// Natural cubic spline through joint-space waypoints, parameterized by
/// normalized chord length u in [0, 1].
class JointSpline {
 public:
  JointSpline() = default;
  explicit JointSpline(const std::vector<Vector>& waypoints);

  int n_dof() const { return static_cast<int>(coeffs_.size()); }
  const std::vector<double>& knots() const { return knots_; }
  /// Position and first three derivatives with respect to u.
  void eval(double u, Vector& p, Vector& d1, Vector& d2, Vector& d3) const;
  Vector position(double u) const;

 private:
  std::vector<double> knots_;
  // per joint, per interval: a + b h + c h^2 + d h^3
  std::vector<std::vector<Eigen::Vector4d>> coeffs_;
};

/// Spline path driven by a jerk-limited progress curve, stretched uniformly in
/// time until velocity, acceleration and jerk limits hold.
class ParameterizedPath {
 public:
  ParameterizedPath(JointSpline spline, JerkProfile progress, double time_scale);

  double duration() const { return progress_.duration() * scale_; }
  void state_at(double t, Vector& q, Vector& qd, Vector& qdd, Vector* jerk = nullptr) const;
  /// Time at which the path parameter reaches u.
  double time_at(double u) const;
  const JointSpline& spline() const { return spline_; }

  Trajectory resample(double dt) const;

 private:
  JointSpline spline_;
  JerkProfile progress_;
  double scale_ = 1.0;
};

/// Drops consecutive duplicate waypoints; throws DomainError when fewer than two remain.
std::vector<Vector> collapse_waypoints(const std::vector<Vector>& path, double tol = 1e-12);

/// Time-parameterizes a geometric path. Without `duration` the result is the
/// fastest uniform stretching that keeps all kinematic limits; with it, the
/// motion is stretched to exactly `duration` (DomainError if too short).
ParameterizedPath parameterize_path(const RobotModel& model, const std::vector<Vector>& path,
                                    std::optional<double> duration = std::nullopt);

/// parameterize_path followed by resampling at dt. Endpoints are exact rest states.
Trajectory time_parameterize(const RobotModel& model, const std::vector<Vector>& path, double dt,
                             std::optional<double> duration = std::nullopt);

struct LimitReport {
  double max_position_violation = 0.0;
  double max_velocity_ratio = 0.0;      // max |qd| / v_max
  double max_acceleration_ratio = 0.0;  // max |qdd| / a_max
  bool pass = false;
};

LimitReport check_limits(const RobotModel& model, const Trajectory& traj, double tol = 1e-9);

// Binary exchange format: "PDTRAJ\0\0", u32 version, u32 n_dof, u32 horizon,
// f64 dt, then horizon x 3 n_dof row-major f64, all little endian.
void write_trajectory(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory(std::istream& in);
void save_trajectory(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

}  // namespace paydiff
