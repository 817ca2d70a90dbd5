#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Dense>

#include "paydiff/dynamics.hpp"
#include "paydiff/planners.hpp"

namespace paydiff {

double jerk_cost(const Trajectory& traj) {
  const Matrix a = traj.accelerations();
  double c = 0.0;
  for (int k = 0; k + 1 < traj.horizon(); ++k) c += (a.row(k + 1) - a.row(k)).squaredNorm() / traj.dt();
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

// Piecewise-constant jerk on K intervals of length dt, starting from rest.
// Per joint, knot states are linear in that joint's jerks: q_k = q0 + Cq(k,:) u.
struct JerkBasis {
  int K = 0;
  double dt = 0.0;
  Matrix cq, cv, ca;  // (K+1) x K

  JerkBasis(int intervals, double step) : K(intervals), dt(step), cq(Matrix::Zero(K + 1, K)), cv(cq), ca(cq) {
    for (int j = 0; j < K; ++j) {
      double x = 0.0, v = 0.0, a = 0.0;
      for (int k = 0; k < K; ++k) {
        const double u = (k == j) ? 1.0 : 0.0;
        x += v * dt + a * dt * dt / 2.0 + u * dt * dt * dt / 6.0;
        v += a * dt + u * dt * dt / 2.0;
        a += u * dt;
        cq(k + 1, j) = x;
        cv(k + 1, j) = v;
        ca(k + 1, j) = a;
      }
    }
  }
};

enum class Kind { position, velocity, acceleration, jerk, torque, collision };

struct Problem2 {
  const RobotModel& model;
  const CollisionProxySet& proxies;
  const Scene& scene;
  const JerkBasis& basis;
  Vector start, goal;
  double payload;
  double inflation;
  int n;
  Vector qlo, qhi, vmax, amax, jmax, tau_max;

  int nvar() const { return n * basis.K; }

  // U is K x n (column i = jerks of joint i).
  void states(const Matrix& U, Matrix& Q, Matrix& V, Matrix& A) const {
    Q = basis.cq * U;
    Q.rowwise() += start.transpose();
    V = basis.cv * U;
    A = basis.ca * U;
  }
};

struct Constraints {
  Vector g;          // all constraint values, fixed ordering
  std::vector<std::pair<int, Vector>> rows;  // (index, gradient) for the requested subset
};

// Evaluates every constraint; gradients only for indices where want(g_i) holds.
template <class Want>
Constraints evaluate(const Problem2& P, const Vector& u, Want want) {
  const int n = P.n, K = P.basis.K;
  const Matrix U = u.reshaped(K, n);
  Matrix Q, V, A;
  P.states(U, Q, V, A);
  Constraints c;
  std::vector<double> g;
  auto add = [&](double value, auto&& grad_fn) {
    const int idx = static_cast<int>(g.size());
    g.push_back(value);
    if (want(idx, value)) {
      Vector row = Vector::Zero(n * K);
      grad_fn(row);
      c.rows.emplace_back(idx, std::move(row));
    }
  };
  const Matrix& cq = P.basis.cq;
  const Matrix& cv = P.basis.cv;
  const Matrix& ca = P.basis.ca;
  // kinematic boxes at interior knots
  for (int k = 1; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      add(Q(k, i) - P.qhi(i), [&](Vector& r) { r.segment(i * K, K) = cq.row(k).transpose(); });
      add(P.qlo(i) - Q(k, i), [&](Vector& r) { r.segment(i * K, K) = -cq.row(k).transpose(); });
      add((V(k, i) - P.vmax(i)) / P.vmax(i), [&](Vector& r) { r.segment(i * K, K) = cv.row(k).transpose() / P.vmax(i); });
      add((-V(k, i) - P.vmax(i)) / P.vmax(i), [&](Vector& r) { r.segment(i * K, K) = -cv.row(k).transpose() / P.vmax(i); });
      add((A(k, i) - P.amax(i)) / P.amax(i), [&](Vector& r) { r.segment(i * K, K) = ca.row(k).transpose() / P.amax(i); });
      add((-A(k, i) - P.amax(i)) / P.amax(i), [&](Vector& r) { r.segment(i * K, K) = -ca.row(k).transpose() / P.amax(i); });
    }
  }
  for (int j = 0; j < K; ++j) {
    for (int i = 0; i < n; ++i) {
      add((U(j, i) - P.jmax(i)) / P.jmax(i), [&](Vector& r) { r(i * K + j) = 1.0 / P.jmax(i); });
      add((-U(j, i) - P.jmax(i)) / P.jmax(i), [&](Vector& r) { r(i * K + j) = -1.0 / P.jmax(i); });
    }
  }
  // torque at every knot
  const double h = 1e-6;
  for (int k = 0; k <= K; ++k) {
    const Vector q = Q.row(k).transpose(), v = V.row(k).transpose(), a = A.row(k).transpose();
    const Vector tau = inverse_dynamics(P.model, q, v, a) + payload_torque(P.model, q, P.payload);
    bool need = false;
    for (int r = 0; r < n; ++r) {
      need = need || want(static_cast<int>(g.size()) + 2 * r, (tau(r) - P.tau_max(r)) / P.tau_max(r)) ||
             want(static_cast<int>(g.size()) + 2 * r + 1, (-tau(r) - P.tau_max(r)) / P.tau_max(r));
    }
    Matrix dq, dv, da;
    if (need && k > 0 && k < K) {
      dq.resize(n, n);
      dv.resize(n, n);
      for (int i = 0; i < n; ++i) {
        Vector qp = q, qm = q, vp = v, vm = v;
        qp(i) += h;
        qm(i) -= h;
        vp(i) += h;
        vm(i) -= h;
        dq.col(i) = (inverse_dynamics(P.model, qp, v, a) + payload_torque(P.model, qp, P.payload) -
                     inverse_dynamics(P.model, qm, v, a) - payload_torque(P.model, qm, P.payload)) /
                    (2.0 * h);
        dv.col(i) = (inverse_dynamics(P.model, q, vp, a) - inverse_dynamics(P.model, q, vm, a)) / (2.0 * h);
      }
      da = mass_matrix(P.model, q);
    }
    for (int r = 0; r < n; ++r) {
      for (double sgn : {1.0, -1.0}) {
        add((sgn * tau(r) - P.tau_max(r)) / P.tau_max(r), [&](Vector& row) {
          if (k == 0 || k == K) return;  // pinned states
          for (int i = 0; i < n; ++i) {
            row.segment(i * K, K) = sgn / P.tau_max(r) *
                                    (dq(r, i) * cq.row(k).transpose() + dv(r, i) * cv.row(k).transpose() +
                                     da(r, i) * ca.row(k).transpose());
          }
        });
      }
    }
  }
  // collision: one row per knot, proxy and obstacle
  constexpr double kCollisionScale = 0.05;
  const double clearance = P.scene.margin + P.inflation;
  for (int k = 1; k < K; ++k) {
    if (P.scene.obstacles.empty()) break;
    const Vector q = Q.row(k).transpose();
    const Frames frames = forward_kinematics(P.model, q);
    for (const auto& pr : P.proxies.proxies) {
      const Vector3 center = frames.joints[static_cast<std::size_t>(pr.link)] * pr.local_offset;
      for (const auto& o : P.scene.obstacles) {
        Vector3 nrm;
        const double d = signed_distance(o, center, &nrm);
        add((pr.radius + clearance - d) / kCollisionScale, [&](Vector& row) {
          const Vector dg = -(point_jacobian(P.model, frames, pr.link, center).transpose() * nrm) / kCollisionScale;
          for (int i = 0; i < n; ++i) row.segment(i * K, K) = dg(i) * cq.row(k).transpose();
        });
      }
    }
  }
  c.g = Eigen::Map<Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
  return c;
}

}  // namespace

PlannerResult sqp_optimize(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                           double payload, double duration, const std::optional<Trajectory>& init,
                           const SqpConfig& cfg, SqpDiagnostics* diag) {
  if (!(payload >= 0.0)) throw DomainError("sqp_optimize: payload must be >= 0");
  if (!(duration > 0.0)) throw DomainError("sqp_optimize: duration must be > 0");
  if (cfg.horizon < 3) throw DomainError("sqp_optimize: horizon must be >= 3");
  require_dim(problem.start.size(), model.n_dof(), "sqp_optimize start");
  require_dim(problem.goal.size(), model.n_dof(), "sqp_optimize goal");
  const auto t0 = Clock::now();
  const int n = model.n_dof();
  const int K = cfg.horizon - 1;
  const double dt = duration / K;
  const JerkBasis basis(K, dt);

  // Internal bounds sit slightly inside the true limits so that a solution at
  // the feasibility tolerance still passes the strict validity gate.
  constexpr double shrink = 1e-5;
  Problem2 P{model, proxies, problem.scene, basis, problem.start, problem.goal, payload, cfg.collision_inflation, n,
             model.q_min().array() + shrink, model.q_max().array() - shrink, model.v_max() * (1 - shrink),
             model.a_max() * (1 - shrink), model.j_max() * (1 - shrink), model.tau_max() * (1 - shrink)};
  const int nv = P.nvar();

  // Linear equalities: rest at the goal.
  Matrix E = Matrix::Zero(3 * n, nv);
  Vector b = Vector::Zero(3 * n);
  for (int i = 0; i < n; ++i) {
    E.block(3 * i, i * K, 1, K) = basis.cq.row(K);
    E.block(3 * i + 1, i * K, 1, K) = basis.cv.row(K);
    E.block(3 * i + 2, i * K, 1, K) = basis.ca.row(K);
    b(3 * i) = problem.goal(i) - problem.start(i);
  }
  const Eigen::LDLT<Matrix> EEt((E * E.transpose()).eval());
  auto project = [&](const Vector& u) -> Vector { return u - E.transpose() * EEt.solve(E * u - b); };

  Vector u;
  if (init) {
    if (init->horizon() != cfg.horizon || init->n_dof() != n) throw DimensionError("sqp_optimize: init shape mismatch");
    const Matrix A = init->accelerations();
    Matrix U(K, n);
    for (int k = 0; k < K; ++k) U.row(k) = (A.row(k + 1) - A.row(k)) / dt;
    u = project(U.reshaped());
  } else {
    u = project(Vector::Zero(nv));  // minimum-norm jerk: straight-line minimum-jerk motion
  }

  auto objective = [&](const Vector& x) { return dt * x.squaredNorm(); };
  Vector lambda;  // sized after the first evaluation
  double rho = cfg.initial_penalty;
  {
    const Constraints c0 = evaluate(P, u, [](int, double) { return false; });
    lambda = Vector::Zero(c0.g.size());
  }
  auto merit = [&](const Vector& x, Constraints* out) {
    auto want = [&](int idx, double g) { return lambda(idx) + rho * g > 0.0; };
    Constraints c = out ? evaluate(P, x, want) : evaluate(P, x, [](int, double) { return false; });
    double m = objective(x);
    for (Eigen::Index i = 0; i < c.g.size(); ++i) {
      const double s = std::max(0.0, lambda(i) + rho * c.g(i));
      m += (s * s - lambda(i) * lambda(i)) / (2.0 * rho);
    }
    if (out) *out = std::move(c);
    return m;
  };

  PlannerResult result;
  SqpDiagnostics local;
  SqpDiagnostics& d = diag ? *diag : local;
  int inner_total = 0;
  double kkt = std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();
  double prev_violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  const Matrix Pcq = basis.cq;

  for (int outer = 0; outer < cfg.max_outer && inner_total < cfg.max_iter; ++outer) {
    for (int inner = 0; inner < 40 && inner_total < cfg.max_iter; ++inner) {
      ++inner_total;
      Constraints c;
      const double m0 = merit(u, &c);
      Vector grad = 2.0 * dt * u;
      Matrix H = Matrix::Identity(nv, nv) * (2.0 * dt);
      for (const auto& [idx, row] : c.rows) {
        const double s = std::max(0.0, lambda(idx) + rho * c.g(idx));
        grad += s * row;
        H.noalias() += rho * row * row.transpose();
      }
      // reduced-gradient KKT residual
      const Vector nu = EEt.solve(E * grad);
      kkt = (grad - E.transpose() * nu).cwiseAbs().maxCoeff();
      if (kkt < cfg.kkt_tolerance) break;

      Matrix KKT = Matrix::Zero(nv + 3 * n, nv + 3 * n);
      KKT.topLeftCorner(nv, nv) = H;
      KKT.topRightCorner(nv, 3 * n) = E.transpose();
      KKT.bottomLeftCorner(3 * n, nv) = E;
      Vector rhs = Vector::Zero(nv + 3 * n);
      rhs.head(nv) = -grad;
      rhs.tail(3 * n) = b - E * u;
      Vector step = KKT.partialPivLu().solve(rhs).head(nv);

      // trust region on the largest position change
      const double dq = (Pcq * step.reshaped(K, n)).cwiseAbs().maxCoeff();
      if (dq > cfg.trust_region) step *= cfg.trust_region / dq;

      const double slope = grad.dot(step);
      double alpha = 1.0, m1 = m0;
      bool accepted = false;
      while (alpha > 1e-10) {
        m1 = merit(u + alpha * step, nullptr);
        if (m1 <= m0 + 1e-4 * alpha * std::min(slope, 0.0)) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;
      u += alpha * step;
      d.objective.push_back(objective(u));
      d.merit.push_back(m1);
      d.outer_round.push_back(outer);
      if ((alpha * step).cwiseAbs().maxCoeff() < cfg.step_tolerance) break;
    }
    const Constraints c = evaluate(P, u, [](int, double) { return false; });
    violation = c.g.size() ? std::max(0.0, c.g.maxCoeff()) : 0.0;
    for (Eigen::Index i = 0; i < c.g.size(); ++i) lambda(i) = std::max(0.0, lambda(i) + rho * c.g(i));
    if (violation <= cfg.feasibility_tolerance && kkt < 1e3 * cfg.kkt_tolerance) {
      converged = true;
      break;
    }
    if (violation > 0.25 * prev_violation) rho = std::min(rho * 10.0, 1e9);
    prev_violation = violation;
  }
  d.max_violation = violation;
  d.kkt_residual = kkt;
  result.iterations = inner_total;

  Matrix Q, V, A;
  P.states(u.reshaped(K, n), Q, V, A);
  Trajectory traj = Trajectory::zeros(n, K + 1, dt);
  for (int k = 0; k <= K; ++k) traj.set_state(k, Q.row(k).transpose(), V.row(k).transpose(), A.row(k).transpose());
  traj.set_state(K, problem.goal, Vector::Zero(n), Vector::Zero(n));

  result.planning_time = std::chrono::duration<double>(Clock::now() - t0).count();
  const ValidityReport v = validate(model, proxies, problem, traj, payload, cfg.tolerances);
  if (violation <= cfg.feasibility_tolerance && v.valid) {
    result.status = PlannerStatus::success;
    result.trajectory = std::move(traj);
    result.message = converged ? "converged" : "feasible at iteration limit";
  } else {
    result.status = PlannerStatus::infeasible;
    result.message = "converged-infeasible: violation " + std::to_string(violation) +
                     (v.valid ? "" : ", failing " + v.failures());
  }
  return result;
}

}  // namespace paydiff
