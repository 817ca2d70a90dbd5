#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "paydiff/planners.hpp"

namespace paydiff {

std::string to_string(PlannerStatus s) {
  switch (s) {
    case PlannerStatus::success:
      return "success";
    case PlannerStatus::timeout:
      return "timeout";
    case PlannerStatus::infeasible:
      return "infeasible";
  }
  return "unknown";
}

nlohmann::json planner_result_to_json(const PlannerResult& r, bool include_trajectory) {
  nlohmann::json j{{"status", to_string(r.status)},
                   {"planning_time", r.planning_time},
                   {"iterations", r.iterations},
                   {"message", r.message}};
  if (include_trajectory && r.trajectory) j["trajectory"] = trajectory_to_json(*r.trajectory);
  return j;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0, f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
    f /= base;
  }
  return result;
}

class ConfigSampler {
 public:
  ConfigSampler(const RobotModel& model, const RrtConfig& cfg)
      : lo_(model.q_min()), span_(model.q_max() - model.q_min()), kind_(cfg.sampler), index_(cfg.halton_offset + 1),
        rng_(cfg.seed) {
    if (model.n_dof() > static_cast<int>(std::size(kPrimes))) throw DomainError("halton sampler: too many joints");
  }

  Vector next() {
    Vector q(lo_.size());
    if (kind_ == Sampler::halton) {
      for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = lo_(i) + span_(i) * radical_inverse(index_, kPrimes[i]);
      ++index_;
    } else {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = lo_(i) + span_(i) * u(rng_);
    }
    return q;
  }

 private:
  Vector lo_, span_;
  Sampler kind_;
  std::uint64_t index_;
  Rng rng_;
};

struct Tree {
  std::vector<Vector> nodes;
  std::vector<int> parent;

  int nearest(const Vector& q) const {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = (nodes[i] - q).squaredNorm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  int add(Vector q, int par) {
    nodes.push_back(std::move(q));
    parent.push_back(par);
    return static_cast<int>(nodes.size()) - 1;
  }

  std::vector<Vector> path_to_root(int i) const {
    std::vector<Vector> out;
    for (; i >= 0; i = parent[static_cast<std::size_t>(i)]) out.push_back(nodes[static_cast<std::size_t>(i)]);
    return out;
  }
};

enum class Extend { reached, advanced, trapped };

}  // namespace

bool edge_free(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& a,
               const Vector& b, double resolution) {
  if (scene.obstacles.empty()) return true;
  const double span = (b - a).cwiseAbs().maxCoeff();
  const int steps = std::max(1, static_cast<int>(std::ceil(span / resolution)));
  for (int i = 1; i <= steps; ++i) {
    const Vector q = a + (b - a) * (static_cast<double>(i) / steps);
    if (in_collision(model, proxies, scene, q)) return false;
  }
  return true;
}

std::vector<Vector> shortcut_path(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                                  const std::vector<Vector>& path, double resolution) {
  if (path.size() <= 2) return path;
  std::vector<Vector> out{path.front()};
  std::size_t i = 0;
  while (i + 1 < path.size()) {
    std::size_t j = path.size() - 1;
    while (j > i + 1 && !edge_free(model, proxies, scene, path[i], path[j], resolution)) --j;
    out.push_back(path[j]);
    i = j;
  }
  return out;
}

GeometricPath rrt_connect(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                          const RrtConfig& cfg) {
  require_dim(problem.start.size(), model.n_dof(), "rrt_connect start");
  require_dim(problem.goal.size(), model.n_dof(), "rrt_connect goal");
  const auto t0 = Clock::now();
  GeometricPath result;
  const Scene& scene = problem.scene;
  auto finish = [&](PlannerStatus s) {
    result.status = s;
    result.planning_time = seconds_since(t0);
    return result;
  };
  if (in_collision(model, proxies, scene, problem.start) || in_collision(model, proxies, scene, problem.goal)) {
    return finish(PlannerStatus::infeasible);
  }
  if (edge_free(model, proxies, scene, problem.start, problem.goal, cfg.resolution)) {
    result.waypoints = {problem.start, problem.goal};
    return finish(PlannerStatus::success);
  }

  Tree trees[2];
  trees[0].add(problem.start, -1);
  trees[1].add(problem.goal, -1);
  ConfigSampler sampler(model, cfg);

  auto extend = [&](Tree& tree, const Vector& target, int& added) {
    const int near = tree.nearest(target);
    const Vector& qn = tree.nodes[static_cast<std::size_t>(near)];
    Vector d = target - qn;
    const double len = d.norm();
    Extend status = Extend::reached;
    Vector qnew = target;
    if (len > cfg.range) {
      qnew = qn + d * (cfg.range / len);
      status = Extend::advanced;
    }
    if (!edge_free(model, proxies, scene, qn, qnew, cfg.resolution)) return Extend::trapped;
    added = tree.add(std::move(qnew), near);
    return status;
  };

  int a = 0;
  for (long it = 0; it < cfg.max_iterations; ++it) {
    result.iterations = it + 1;
    if ((it & 15) == 0 && seconds_since(t0) > cfg.timeout) return finish(PlannerStatus::timeout);
    const Vector target = sampler.next();
    int ia = -1;
    if (extend(trees[a], target, ia) != Extend::trapped) {
      const Vector qa = trees[a].nodes[static_cast<std::size_t>(ia)];
      int ib = -1;
      Extend s = Extend::advanced;
      while (s == Extend::advanced) s = extend(trees[1 - a], qa, ib);
      if (s == Extend::reached) {
        std::vector<Vector> pa = trees[a].path_to_root(ia);
        std::vector<Vector> pb = trees[1 - a].path_to_root(ib);
        std::reverse(pa.begin(), pa.end());
        // pa ends at qa, pb starts at the same configuration
        pa.insert(pa.end(), pb.begin() + 1, pb.end());
        if (a == 1) std::reverse(pa.begin(), pa.end());
        result.waypoints = cfg.shortcut ? shortcut_path(model, proxies, scene, pa, cfg.resolution) : pa;
        return finish(PlannerStatus::success);
      }
    }
    a = 1 - a;
  }
  return finish(PlannerStatus::timeout);
}

PlannerResult plan_and_filter(const RobotModel& model, const CollisionProxySet& proxies, const Problem& problem,
                              double payload, const PlanFilterConfig& cfg) {
  if (!(payload >= 0.0)) throw DomainError("plan_and_filter: payload must be >= 0");
  const auto t0 = Clock::now();
  PlannerResult r;
  std::string last;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    RrtConfig rc = cfg.rrt;
    rc.seed = derive_seed(cfg.rrt.seed, static_cast<std::uint64_t>(attempt));
    rc.halton_offset = cfg.rrt.halton_offset + static_cast<std::uint64_t>(attempt) * 7919u;
    rc.timeout = std::max(0.0, cfg.rrt.timeout - seconds_since(t0));
    const GeometricPath path = rrt_connect(model, proxies, problem, rc);
    r.iterations += path.iterations;
    if (path.status != PlannerStatus::success) {
      last = "geometric planning " + to_string(path.status);
      if (path.status == PlannerStatus::infeasible) break;
      continue;
    }
    Trajectory traj;
    try {
      std::vector<Vector> pts = path.waypoints;
      if ((pts.front() - pts.back()).norm() == 0.0 && pts.size() <= 2) {
        traj = Trajectory::zeros(model.n_dof(), cfg.duration ? static_cast<int>(std::lround(*cfg.duration / cfg.dt)) + 1 : 2,
                                 cfg.dt);
        for (int t = 0; t < traj.horizon(); ++t) traj.set_state(t, problem.start, Vector::Zero(model.n_dof()),
                                                                Vector::Zero(model.n_dof()));
      } else {
        traj = time_parameterize(model, pts, cfg.dt, cfg.duration);
      }
    } catch (const DomainError& e) {
      last = e.what();
      continue;
    }
    const ValidityReport v = validate(model, proxies, problem, traj, payload, cfg.tolerances);
    if (v.valid) {
      r.trajectory = std::move(traj);
      r.status = PlannerStatus::success;
      r.message = "attempt " + std::to_string(attempt + 1);
      r.planning_time = seconds_since(t0);
      return r;
    }
    last = "filtered: " + v.failures();
  }
  r.status = PlannerStatus::infeasible;
  r.message = "attempts exhausted (" + last + ")";
  r.planning_time = seconds_since(t0);
  return r;
}

}  // namespace paydiff
