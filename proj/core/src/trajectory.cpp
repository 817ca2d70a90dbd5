#include "paydiff/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "paydiff/binary_io.hpp"

namespace paydiff {

Trajectory::Trajectory(int n_dof, double dt, Matrix states) : n_dof_(n_dof), dt_(dt), states_(std::move(states)) {
  if (n_dof < 1) throw DomainError("trajectory: n_dof must be >= 1");
  if (!(dt > 0.0)) throw DomainError("trajectory: dt must be > 0");
  if (states_.cols() != 3 * n_dof) throw DimensionError("trajectory: states must have 3 n_dof columns");
}

Trajectory Trajectory::zeros(int n_dof, int horizon, double dt) {
  return Trajectory(n_dof, dt, Matrix::Zero(horizon, 3 * n_dof));
}

void Trajectory::set_state(int t, const Vector& q, const Vector& qd, const Vector& qdd) {
  states_.row(t).segment(0, n_dof_) = q.transpose();
  states_.row(t).segment(n_dof_, n_dof_) = qd.transpose();
  states_.row(t).segment(2 * n_dof_, n_dof_) = qdd.transpose();
}

// ---------------------------------------------------------------------------

namespace {

// Second-order finite difference of each column of x (rows = time).
Matrix differentiate(const Matrix& x, double dt) {
  const Eigen::Index H = x.rows();
  Matrix d = Matrix::Zero(H, x.cols());
  if (H < 2) return d;
  if (H == 2) {
    d.row(0) = (x.row(1) - x.row(0)) / dt;
    d.row(1) = d.row(0);
    return d;
  }
  for (Eigen::Index i = 1; i + 1 < H; ++i) d.row(i) = (x.row(i + 1) - x.row(i - 1)) / (2.0 * dt);
  // one-sided second order, written in differences so constant inputs give exactly 0
  d.row(0) = (4.0 * (x.row(1) - x.row(0)) - (x.row(2) - x.row(0))) / (2.0 * dt);
  d.row(H - 1) = (4.0 * (x.row(H - 1) - x.row(H - 2)) - (x.row(H - 1) - x.row(H - 3))) / (2.0 * dt);
  return d;
}

ConsistencyReport consistency(const Trajectory& traj, const Vector* v_scale, const Vector* a_scale, double tol) {
  ConsistencyReport r;
  if (traj.horizon() < 2) {
    r.pass = true;
    return r;
  }
  const Matrix dv = (traj.velocities() - differentiate(traj.positions(), traj.dt())).cwiseAbs();
  const Matrix da = (traj.accelerations() - differentiate(traj.velocities(), traj.dt())).cwiseAbs();
  r.max_velocity_deviation = dv.maxCoeff();
  r.max_acceleration_deviation = da.maxCoeff();
  if (v_scale && a_scale) {
    const double nv = (dv.array().rowwise() / v_scale->transpose().array()).maxCoeff();
    const double na = (da.array().rowwise() / a_scale->transpose().array()).maxCoeff();
    r.max_normalized_deviation = std::max(nv, na);
    r.pass = r.max_normalized_deviation <= tol;
  } else {
    r.pass = r.max_velocity_deviation <= tol && r.max_acceleration_deviation <= tol;
  }
  return r;
}

}  // namespace

ConsistencyReport check_consistency(const Trajectory& traj, double tol) {
  return consistency(traj, nullptr, nullptr, tol);
}

ConsistencyReport check_consistency(const Trajectory& traj, const RobotModel& model, double tol) {
  require_dim(traj.n_dof(), model.n_dof(), "check_consistency n_dof");
  const Vector v = model.v_max(), a = model.a_max();
  return consistency(traj, &v, &a, tol);
}

Trajectory time_scale(const Trajectory& traj, double s) {
  if (!(s > 0.0)) throw DomainError("time_scale: factor must be > 0");
  Matrix st = traj.states();
  const int n = traj.n_dof();
  st.middleCols(n, n) /= s;
  st.rightCols(n) /= s * s;
  return Trajectory(n, traj.dt() * s, std::move(st));
}

// ---------------------------------------------------------------------------

void SynchronizedProfile::state_at(double t, Vector& q, Vector& qd, Vector& qdd) const {
  const ScalarState s = progress.at(t);
  q = start + s.x * delta;
  qd = s.v * delta;
  qdd = s.a * delta;
}

namespace {

ScalarLimits progress_limits(const RobotModel& model, const Vector& d1_max) {
  ScalarLimits lim{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                   std::numeric_limits<double>::infinity()};
  for (int i = 0; i < model.n_dof(); ++i) {
    if (d1_max(i) <= 0.0) continue;
    const JointLimits& l = model.limits()[static_cast<std::size_t>(i)];
    lim.v_max = std::min(lim.v_max, l.v_max / d1_max(i));
    lim.a_max = std::min(lim.a_max, l.a_max / d1_max(i));
    lim.j_max = std::min(lim.j_max, l.j_max / d1_max(i));
  }
  if (!std::isfinite(lim.v_max)) lim = {1.0, 1.0, 1.0};
  return lim;
}

}  // namespace

SynchronizedProfile synchronized_profile(const RobotModel& model, const Vector& start, const Vector& goal) {
  require_dim(start.size(), model.n_dof(), "synchronized_profile start");
  require_dim(goal.size(), model.n_dof(), "synchronized_profile goal");
  SynchronizedProfile p;
  p.start = start;
  p.delta = goal - start;
  const ScalarLimits lim = progress_limits(model, p.delta.cwiseAbs());
  p.progress = jerk_limited_profile(ScalarState{}, p.delta.isZero(0.0) ? 0.0 : 1.0, lim);
  return p;
}

// ---------------------------------------------------------------------------

JointSpline::JointSpline(const std::vector<Vector>& waypoints) {
  const std::size_t m = waypoints.size();
  if (m < 2) throw DomainError("spline: need at least two waypoints");
  const Eigen::Index n = waypoints[0].size();
  knots_.assign(m, 0.0);
  for (std::size_t k = 1; k < m; ++k) knots_[k] = knots_[k - 1] + (waypoints[k] - waypoints[k - 1]).norm();
  const double total = knots_.back();
  if (!(total > 0.0)) throw DomainError("spline: degenerate path");
  for (auto& u : knots_) u /= total;
  knots_.back() = 1.0;

  const std::size_t intervals = m - 1;
  coeffs_.assign(static_cast<std::size_t>(n), std::vector<Eigen::Vector4d>(intervals));
  std::vector<double> h(intervals);
  for (std::size_t k = 0; k < intervals; ++k) h[k] = knots_[k + 1] - knots_[k];

  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<double> y(m), M(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) y[k] = waypoints[k](j);
    if (m > 2) {
      // Natural end conditions; Thomas algorithm on the interior second derivatives.
      const std::size_t r = m - 2;
      std::vector<double> diag(r), upper(r), rhs(r);
      for (std::size_t i = 0; i < r; ++i) {
        diag[i] = 2.0 * (h[i] + h[i + 1]);
        upper[i] = h[i + 1];
        rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
      }
      for (std::size_t i = 1; i < r; ++i) {
        const double w = h[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
      }
      std::vector<double> sol(r);
      sol[r - 1] = rhs[r - 1] / diag[r - 1];
      for (std::size_t i = r - 1; i-- > 0;) sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
      for (std::size_t i = 0; i < r; ++i) M[i + 1] = sol[i];
    }
    for (std::size_t k = 0; k < intervals; ++k) {
      const double H = h[k];
      coeffs_[static_cast<std::size_t>(j)][k] =
          Eigen::Vector4d(y[k], (y[k + 1] - y[k]) / H - H * (2.0 * M[k] + M[k + 1]) / 6.0, M[k] / 2.0,
                          (M[k + 1] - M[k]) / (6.0 * H));
    }
  }
}

void JointSpline::eval(double u, Vector& p, Vector& d1, Vector& d2, Vector& d3) const {
  u = std::clamp(u, 0.0, 1.0);
  auto it = std::upper_bound(knots_.begin(), knots_.end(), u);
  std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, std::distance(knots_.begin(), it) - 1));
  k = std::min(k, knots_.size() - 2);
  const double h = u - knots_[k];
  const auto n = static_cast<Eigen::Index>(coeffs_.size());
  p.resize(n);
  d1.resize(n);
  d2.resize(n);
  d3.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Vector4d& c = coeffs_[static_cast<std::size_t>(j)][k];
    p(j) = c(0) + h * (c(1) + h * (c(2) + h * c(3)));
    d1(j) = c(1) + h * (2.0 * c(2) + 3.0 * h * c(3));
    d2(j) = 2.0 * c(2) + 6.0 * h * c(3);
    d3(j) = 6.0 * c(3);
  }
}

Vector JointSpline::position(double u) const {
  Vector p, a, b, c;
  eval(u, p, a, b, c);
  return p;
}

ParameterizedPath::ParameterizedPath(JointSpline spline, JerkProfile progress, double time_scale)
    : spline_(std::move(spline)), progress_(std::move(progress)), scale_(time_scale) {}

void ParameterizedPath::state_at(double t, Vector& q, Vector& qd, Vector& qdd, Vector* jerk) const {
  const ScalarState s = progress_.at(t / scale_);
  const double sd = s.v / scale_, sdd = s.a / (scale_ * scale_), sddd = s.j / (scale_ * scale_ * scale_);
  Vector d1, d2, d3;
  spline_.eval(s.x, q, d1, d2, d3);
  qd = d1 * sd;
  qdd = d2 * sd * sd + d1 * sdd;
  if (jerk) *jerk = d3 * sd * sd * sd + 3.0 * d2 * sd * sdd + d1 * sddd;
}

double ParameterizedPath::time_at(double u) const {
  double lo = 0.0, hi = progress_.duration();
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (progress_.at(mid).x < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi * scale_;
}

Trajectory ParameterizedPath::resample(double dt) const {
  if (!(dt > 0.0)) throw DomainError("resample: dt must be > 0");
  const double T = duration();
  const int H = static_cast<int>(std::llround(T / dt)) + 1;
  const int n = spline_.n_dof();
  Trajectory traj = Trajectory::zeros(n, std::max(H, 2), dt);
  Vector q, qd, qdd;
  for (int t = 0; t < traj.horizon(); ++t) {
    state_at(std::min(t * dt, T), q, qd, qdd);
    traj.set_state(t, q, qd, qdd);
  }
  const Vector zero = Vector::Zero(n);
  traj.set_state(0, spline_.position(0.0), zero, zero);
  traj.set_state(traj.horizon() - 1, spline_.position(1.0), zero, zero);
  return traj;
}

std::vector<Vector> collapse_waypoints(const std::vector<Vector>& path, double tol) {
  std::vector<Vector> out;
  for (const auto& p : path) {
    if (out.empty() || (p - out.back()).norm() > tol) out.push_back(p);
  }
  if (out.size() < 2) throw DomainError("time_parameterize: degenerate path (fewer than two distinct waypoints)");
  return out;
}

ParameterizedPath parameterize_path(const RobotModel& model, const std::vector<Vector>& path,
                                    std::optional<double> duration) {
  for (const auto& p : path) require_dim(p.size(), model.n_dof(), "time_parameterize waypoint");
  const std::vector<Vector> pts = collapse_waypoints(path);
  JointSpline spline(pts);
  const int n = model.n_dof();

  constexpr int kGrid = 2000;
  Vector d1_max = Vector::Zero(n);
  Vector p, d1, d2, d3;
  for (int k = 0; k <= kGrid; ++k) {
    spline.eval(static_cast<double>(k) / kGrid, p, d1, d2, d3);
    d1_max = d1_max.cwiseMax(d1.cwiseAbs());
  }
  const JerkProfile progress = jerk_limited_profile(ScalarState{}, 1.0, progress_limits(model, d1_max));

  double scale = 1.0;
  if (pts.size() > 2) {
    // Uniform stretch so that every sampled state obeys v, a and j limits.
    const ParameterizedPath unit(spline, progress, 1.0);
    const Vector vmax = model.v_max(), amax = model.a_max(), jmax = model.j_max();
    Vector q, qd, qdd, jerk;
    double ratio = 0.0;
    const double T = progress.duration();
    for (int k = 0; k <= 4 * kGrid; ++k) {
      unit.state_at(T * k / (4.0 * kGrid), q, qd, qdd, &jerk);
      for (int i = 0; i < n; ++i) {
        ratio = std::max({ratio, std::abs(qd(i)) / vmax(i), std::sqrt(std::abs(qdd(i)) / amax(i)),
                          std::cbrt(std::abs(jerk(i)) / jmax(i))});
      }
    }
    scale = std::max(1.0, ratio * (1.0 + 1e-3));
  }
  if (duration) {
    const double t_min = progress.duration() * scale;
    if (*duration < t_min * (1.0 - 1e-9)) {
      throw DomainError("time_parameterize: duration " + std::to_string(*duration) +
                        " s is shorter than the limit-respecting minimum " + std::to_string(t_min) + " s");
    }
    scale = *duration / progress.duration();
  }
  return ParameterizedPath(std::move(spline), progress, scale);
}

Trajectory time_parameterize(const RobotModel& model, const std::vector<Vector>& path, double dt,
                             std::optional<double> duration) {
  if (!(dt > 0.0)) throw DomainError("time_parameterize: dt must be > 0");
  if (duration) {
    const double steps = *duration / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
      throw DomainError("time_parameterize: duration must be a multiple of dt");
    }
    return parameterize_path(model, path, duration).resample(dt);
  }
  const ParameterizedPath fastest = parameterize_path(model, path);
  const double T = std::ceil(fastest.duration() / dt - 1e-9) * dt;
  return parameterize_path(model, path, std::max(T, dt)).resample(dt);
}

LimitReport check_limits(const RobotModel& model, const Trajectory& traj, double tol) {
  require_dim(traj.n_dof(), model.n_dof(), "check_limits n_dof");
  LimitReport r;
  const Vector qmin = model.q_min(), qmax = model.q_max(), vmax = model.v_max(), amax = model.a_max();
  for (int t = 0; t < traj.horizon(); ++t) {
    const Vector q = traj.q(t), qd = traj.qd(t), qdd = traj.qdd(t);
    for (int i = 0; i < model.n_dof(); ++i) {
      r.max_position_violation = std::max({r.max_position_violation, qmin(i) - q(i), q(i) - qmax(i)});
      r.max_velocity_ratio = std::max(r.max_velocity_ratio, std::abs(qd(i)) / vmax(i));
      r.max_acceleration_ratio = std::max(r.max_acceleration_ratio, std::abs(qdd(i)) / amax(i));
    }
  }
  r.pass = r.max_position_violation <= tol && r.max_velocity_ratio <= 1.0 + tol && r.max_acceleration_ratio <= 1.0 + tol;
  return r;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kTrajMagic[9] = "PDTRAJ\0\0";
constexpr std::uint32_t kTrajVersion = 1;
}  // namespace

void write_trajectory(std::ostream& out, const Trajectory& traj) {
  binio::put_magic(out, kTrajMagic);
  binio::put<std::uint32_t>(out, kTrajVersion);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.n_dof()));
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.horizon()));
  binio::put<double>(out, traj.dt());
  for (int t = 0; t < traj.horizon(); ++t) {
    for (Eigen::Index c = 0; c < traj.states().cols(); ++c) binio::put<double>(out, traj.states()(t, c));
  }
}

Trajectory read_trajectory(std::istream& in) {
  binio::expect_magic(in, kTrajMagic, "trajectory");
  const auto version = binio::get<std::uint32_t>(in, "trajectory version");
  if (version != kTrajVersion) throw FormatError("trajectory: unsupported version " + std::to_string(version));
  const auto n = binio::get<std::uint32_t>(in, "trajectory n_dof");
  const auto H = binio::get<std::uint32_t>(in, "trajectory horizon");
  const double dt = binio::get<double>(in, "trajectory dt");
  if (n == 0 || n > 64 || H > (1u << 24)) throw FormatError("trajectory: implausible header");
  Matrix st(H, 3 * n);
  for (std::uint32_t t = 0; t < H; ++t) {
    for (std::uint32_t c = 0; c < 3 * n; ++c) st(t, c) = binio::get<double>(in, "trajectory states");
  }
  return Trajectory(static_cast<int>(n), dt, std::move(st));
}

void save_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_trajectory(out, traj);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open trajectory file " + path.string());
  return read_trajectory(in);
}

nlohmann::json trajectory_to_json(const Trajectory& traj) {
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < traj.horizon(); ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < traj.states().cols(); ++c) row.push_back(traj.states()(t, c));
    rows.push_back(row);
  }
  return {{"n_dof", traj.n_dof()}, {"dt", traj.dt()}, {"horizon", traj.horizon()}, {"states", rows}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  const int n = j.at("n_dof").get<int>();
  const double dt = j.at("dt").get<double>();
  const auto& rows = j.at("states");
  Matrix st(static_cast<Eigen::Index>(rows.size()), 3 * n);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != static_cast<std::size_t>(3 * n)) throw FormatError("trajectory json: bad row width");
    for (int c = 0; c < 3 * n; ++c) st(static_cast<Eigen::Index>(t), c) = rows[t][static_cast<std::size_t>(c)].get<double>();
  }
  return Trajectory(n, dt, std::move(st));
}

}  // namespace paydiff
