#include <algorithm>
#include <chrono>
#include <cmath>

#include "paydiff/dynamics.hpp"
#include "paydiff/planners.hpp"

namespace paydiff {

void SteeringMotion::state_at(double t, Vector& q, Vector& qd, Vector& qdd) const {
  const auto n = static_cast<Eigen::Index>(joints.size());
  q.resize(n);
  qd.resize(n);
  qdd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ScalarState s = joints[static_cast<std::size_t>(i)].at(t);
    q(i) = s.x;
    qd(i) = s.v;
    qdd(i) = s.a;
  }
}

SteeringMotion steer(const RobotModel& model, const Vector& q, const Vector& qd, const Vector& qdd,
                     const Vector& target, double dt) {
  const int n = model.n_dof();
  SteeringMotion m;
  double T = 0.0;
  std::vector<ScalarLimits> lims(static_cast<std::size_t>(n));
  std::vector<ScalarState> starts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const JointLimits& l = model.limits()[ui];
    lims[ui] = {l.v_max, l.a_max, l.j_max};
    starts[ui] = {q(i), qd(i), qdd(i), 0.0};
    T = std::max(T, time_optimal_duration(starts[ui], target(i), lims[ui]));
  }
  T = std::max(dt, std::ceil(T / dt - 1e-9) * dt);
  m.duration = T;
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    m.joints.push_back(jerk_limited_profile(starts[ui], target(i), lims[ui], T));
  }
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Node {
  Vector q, qd, qdd;
  int parent = -1;
  SteeringMotion edge;  // from the parent
  double edge_time = 0.0;
};

class EdgeChecker {
 public:
  EdgeChecker(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, double payload)
      : model_(model), proxies_(proxies), scene_(scene), payload_(payload), qmin_(model.q_min()),
        qmax_(model.q_max()), vmax_(model.v_max()), amax_(model.a_max()), jmax_(model.j_max()),
        tau_max_(model.tau_max()) {}

  // Samples k dt for k = 1..steps (the start state was checked with its own edge).
  bool ok(const SteeringMotion& m, double until, double dt) const {
    for (std::size_t i = 0; i < m.joints.size(); ++i) {
      for (const auto& s : m.joints[i].segments()) {
        if (std::abs(s.jerk) > jmax_(static_cast<Eigen::Index>(i)) * (1.0 + 1e-9)) return false;
      }
    }
    const int steps = static_cast<int>(std::lround(until / dt));
    Vector q, qd, qdd;
    for (int k = 1; k <= steps; ++k) {
      m.state_at(k * dt, q, qd, qdd);
      if (!state_ok(q, qd, qdd)) return false;
    }
    return true;
  }

  bool state_ok(const Vector& q, const Vector& qd, const Vector& qdd) const {
    constexpr double slack = 1e-9;
    if ((q.array() < qmin_.array() - slack).any() || (q.array() > qmax_.array() + slack).any()) return false;
    if ((qd.cwiseAbs().array() > vmax_.array() * (1.0 + slack)).any()) return false;
    if ((qdd.cwiseAbs().array() > amax_.array() * (1.0 + slack)).any()) return false;
    if (in_collision(model_, proxies_, scene_, q)) return false;
    const Vector tau = inverse_dynamics(model_, q, qd, qdd) + payload_torque(model_, q, payload_);
    return (tau.cwiseAbs().array() <= tau_max_.array() + kTorqueTolerance).all();
  }

 private:
  const RobotModel& model_;
  const CollisionProxySet& proxies_;
  const Scene& scene_;
  double payload_;
  Vector qmin_, qmax_, vmax_, amax_, jmax_, tau_max_;
};

Trajectory assemble(const std::vector<Node>& nodes, int leaf, const SteeringMotion& final_edge, const Vector& goal,
                    double dt) {
  std::vector<const Node*> chain;
  for (int i = leaf; i > 0; i = nodes[static_cast<std::size_t>(i)].parent) chain.push_back(&nodes[static_cast<std::size_t>(i)]);
  std::reverse(chain.begin(), chain.end());
  std::vector<std::pair<const SteeringMotion*, int>> edges;
  int total = 0;
  for (const Node* n : chain) {
    const int k = static_cast<int>(std::lround(n->edge_time / dt));
    edges.emplace_back(&n->edge, k);
    total += k;
  }
  const int kf = static_cast<int>(std::lround(final_edge.duration / dt));
  edges.emplace_back(&final_edge, kf);
  total += kf;

  const int n = static_cast<int>(goal.size());
  Trajectory traj = Trajectory::zeros(n, total + 1, dt);
  const Node& root = nodes.front();
  traj.set_state(0, root.q, root.qd, root.qdd);
  int row = 1;
  Vector q, qd, qdd;
  for (const auto& [edge, k] : edges) {
    for (int s = 1; s <= k; ++s) {
      edge->state_at(s * dt, q, qd, qdd);
      traj.set_state(row++, q, qd, qdd);
    }
  }
  traj.set_state(total, goal, Vector::Zero(n), Vector::Zero(n));
  return traj;
}

}  // namespace

PlannerResult kinodynamic_rrt(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                              double payload, const KinodynamicConfig& cfg) {
  if (!(payload >= 0.0)) throw DomainError("kinodynamic_rrt: payload must be >= 0");
  require_dim(problem.start.size(), model.n_dof(), "kinodynamic_rrt start");
  require_dim(problem.goal.size(), model.n_dof(), "kinodynamic_rrt goal");
  const auto t0 = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };
  const int n = model.n_dof();
  const double dt = cfg.dt;
  PlannerResult r;
  auto finish = [&](PlannerStatus s, std::string msg) {
    r.status = s;
    r.message = std::move(msg);
    r.planning_time = elapsed();
    return r;
  };

  EdgeChecker checker(model, proxies, problem.scene, payload);
  const Vector zero = Vector::Zero(n);
  if (!checker.state_ok(problem.start, zero, zero) || !checker.state_ok(problem.goal, zero, zero)) {
    return finish(PlannerStatus::infeasible, "start or goal invalid at this payload");
  }
  if ((problem.goal - problem.start).cwiseAbs().maxCoeff() <= cfg.tolerances.endpoint) {
    Trajectory t = Trajectory::zeros(n, 2, dt);
    t.set_state(0, problem.start, zero, zero);
    t.set_state(1, problem.start, zero, zero);
    r.trajectory = std::move(t);
    return finish(PlannerStatus::success, "start equals goal");
  }

  std::vector<Node> nodes;
  nodes.push_back({problem.start, zero, zero, -1, {}, 0.0});
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vector qmin = model.q_min(), qspan = model.q_max() - model.q_min();
  const Vector inv_v = model.v_max().cwiseInverse(), inv_a = model.a_max().cwiseInverse();
  const double ext = std::max(dt, std::round(cfg.max_extension_time / dt) * dt);

  auto try_goal = [&](int leaf) -> bool {
    const Node& nd = nodes[static_cast<std::size_t>(leaf)];
    const SteeringMotion m = steer(model, nd.q, nd.qd, nd.qdd, problem.goal, dt);
    if (!checker.ok(m, m.duration, dt)) return false;
    Trajectory traj = assemble(nodes, leaf, m, problem.goal, dt);
    if (!validate(model, proxies, problem, traj, payload, cfg.tolerances).valid) return false;
    r.trajectory = std::move(traj);
    return true;
  };

  if (cfg.greedy_goal_connection && try_goal(0)) return finish(PlannerStatus::success, "direct steering");

  for (long it = 0; it < cfg.max_iterations; ++it) {
    r.iterations = it + 1;
    if (elapsed() > cfg.timeout) return finish(PlannerStatus::timeout, "timeout after " + std::to_string(nodes.size()) + " nodes");
    Vector target(n);
    const bool to_goal = unit(rng) < cfg.goal_bias;
    if (to_goal) {
      target = problem.goal;
    } else {
      for (int i = 0; i < n; ++i) target(i) = qmin(i) + qspan(i) * unit(rng);
    }
    int near = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& nd = nodes[i];
      const double d = ((target - nd.q).cwiseProduct(inv_v)).squaredNorm() +
                       cfg.velocity_weight * (nd.qd.cwiseProduct(inv_a)).squaredNorm();
      if (d < best) {
        best = d;
        near = static_cast<int>(i);
      }
    }
    if (to_goal && !cfg.greedy_goal_connection) {
      const Node& nd = nodes[static_cast<std::size_t>(near)];
      if (steer(model, nd.q, nd.qd, nd.qdd, target, dt).duration <= ext && try_goal(near)) {
        return finish(PlannerStatus::success, std::to_string(nodes.size()) + " nodes");
      }
    }
    const Node& nn = nodes[static_cast<std::size_t>(near)];
    SteeringMotion m = steer(model, nn.q, nn.qd, nn.qdd, target, dt);
    const double until = std::min(m.duration, ext);
    if (!checker.ok(m, until, dt)) continue;
    Node child;
    m.state_at(until, child.q, child.qd, child.qdd);
    child.parent = near;
    child.edge = std::move(m);
    child.edge_time = until;
    nodes.push_back(std::move(child));
    if (cfg.greedy_goal_connection && try_goal(static_cast<int>(nodes.size()) - 1)) {
      return finish(PlannerStatus::success, std::to_string(nodes.size()) + " nodes");
    }
  }
  return finish(PlannerStatus::timeout, "iteration budget exhausted");
}

}  // namespace paydiff
