#include "paydiff/world.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "paydiff/trajectory.hpp"

namespace paydiff {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double box_distance(const BoxObstacle& b, const Vector3& p, Vector3* grad) {
  const Vector3 c = 0.5 * (b.min + b.max);
  const Vector3 h = 0.5 * (b.max - b.min);
  const Vector3 d = p - c;
  const Vector3 q = d.cwiseAbs() - h;
  const Vector3 outside = q.cwiseMax(0.0);
  const double out_norm = outside.norm();
  if (out_norm > 0.0) {
    if (grad) {
      for (int k = 0; k < 3; ++k) (*grad)(k) = (d(k) >= 0.0 ? 1.0 : -1.0) * outside(k) / out_norm;
    }
    return out_norm;
  }
  Eigen::Index axis = 0;
  const double inside = q.maxCoeff(&axis);
  if (grad) {
    grad->setZero();
    (*grad)(axis) = d(axis) >= 0.0 ? 1.0 : -1.0;
  }
  return inside;
}

struct ProxyPoint {
  int link;
  Vector3 center;
  double radius;
};

std::vector<ProxyPoint> proxy_points(const CollisionProxySet& proxies, const Frames& frames) {
  std::vector<ProxyPoint> pts;
  pts.reserve(proxies.proxies.size());
  for (const auto& p : proxies.proxies) {
    pts.push_back({p.link, frames.joints[static_cast<std::size_t>(p.link)] * p.local_offset, p.radius});
  }
  return pts;
}

}  // namespace

double signed_distance(const Obstacle& obstacle, const Vector3& p, Vector3* gradient) {
  return std::visit(overloaded{[&](const SphereObstacle& s) {
                                 const Vector3 d = p - s.center;
                                 const double n = d.norm();
                                 if (gradient) *gradient = n > 0.0 ? Vector3(d / n) : Vector3(Vector3::UnitZ());
                                 return n - s.radius;
                               },
                               [&](const BoxObstacle& b) { return box_distance(b, p, gradient); },
                               [&](const HalfSpaceObstacle& h) {
                                 if (gradient) *gradient = h.normal;
                                 return h.normal.dot(p) - h.offset;
                               }},
                    obstacle);
}

void Scene::validate() const {
  if (!(margin >= 0.0)) throw DomainError("scene.margin: must be >= 0");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const std::string path = "scene.obstacles[" + std::to_string(i) + "]";
    std::visit(overloaded{[&](const SphereObstacle& s) {
                            if (!(s.radius > 0.0)) throw DomainError(path + ".radius: must be > 0");
                          },
                          [&](const BoxObstacle& b) {
                            if (!(b.min.array() < b.max.array()).all())
                              throw DomainError(path + ": box min must be < max componentwise");
                          },
                          [&](const HalfSpaceObstacle& h) {
                            if (std::abs(h.normal.norm() - 1.0) > 1e-9)
                              throw DomainError(path + ".normal: not unit norm");
                          }},
               obstacles[i]);
  }
}

void CollisionProxySet::validate(const RobotModel& model) const {
  for (std::size_t i = 0; i < proxies.size(); ++i) {
    const auto& p = proxies[i];
    const std::string path = "proxies[" + std::to_string(i) + "]";
    if (p.link < 0 || p.link >= model.n_dof()) throw DomainError(path + ".link: out of range");
    if (!(p.radius > 0.0)) throw DomainError(path + ".radius: must be > 0");
  }
}

CollisionProxySet default_proxies(const RobotModel& model) {
  CollisionProxySet set;
  auto along_x = [&](int link, std::initializer_list<double> xs, double r) {
    for (double x : xs) set.proxies.push_back({link, Vector3(x, 0.0, 0.0), r});
  };
  if (model.name() == "planar2") {
    along_x(0, {0.25, 0.5, 0.75, 1.0}, 0.08);
    along_x(1, {0.25, 0.5, 0.75, 1.0}, 0.08);
  } else if (model.name() == "planar3") {
    along_x(0, {0.15, 0.30, 0.45}, 0.06);
    along_x(1, {0.12, 0.24, 0.35}, 0.05);
    along_x(2, {0.10, 0.18, 0.25}, 0.04);
  } else if (model.name() == "arm7") {
    set.proxies = {{0, Vector3(0.0, 0.0, -0.06), 0.09},  {1, Vector3(0.0, -0.08, 0.0), 0.09},
                   {2, Vector3(0.0, 0.0, -0.12), 0.08},  {3, Vector3(0.0, 0.0, 0.0), 0.08},
                   {4, Vector3(0.0, 0.08, -0.2), 0.07},  {4, Vector3(0.0, 0.0, -0.05), 0.07},
                   {5, Vector3(0.08, 0.0, 0.0), 0.07},   {6, Vector3(0.0, 0.0, 0.12), 0.07},
                   {6, Vector3(0.0, 0.0, 0.2), 0.05}};
  } else {
    // Generic fallback: one sphere at each link origin and one at the COM.
    for (int i = 0; i < model.n_dof(); ++i) {
      set.proxies.push_back({i, Vector3::Zero(), 0.05});
      set.proxies.push_back({i, model.links()[static_cast<std::size_t>(i)].com, 0.05});
    }
  }
  return set;
}

Scene tabletop_scene(const RobotModel& model) {
  Scene s;
  if (model.name() == "planar2") {
    s.obstacles.push_back(HalfSpaceObstacle{Vector3::UnitY(), -1.5});
  } else if (model.name() == "planar3") {
    s.obstacles.push_back(HalfSpaceObstacle{Vector3::UnitY(), -0.3});
    s.obstacles.push_back(BoxObstacle{Vector3(-0.52, -0.35, -0.5), Vector3(-0.40, -0.02, 0.5)});
  } else {
    s.obstacles.push_back(HalfSpaceObstacle{Vector3::UnitZ(), 0.0});
    s.obstacles.push_back(BoxObstacle{Vector3(0.35, -0.1, -0.05), Vector3(0.45, 0.1, 0.25)});
  }
  return s;
}

bool in_collision(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& q) {
  if (scene.obstacles.empty()) return false;
  const Frames frames = forward_kinematics(model, q);
  for (const auto& p : proxy_points(proxies, frames)) {
    for (const auto& o : scene.obstacles) {
      if (signed_distance(o, p.center) - p.radius < scene.margin) return true;
    }
  }
  return false;
}

double min_clearance(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& q) {
  double best = std::numeric_limits<double>::infinity();
  const Frames frames = forward_kinematics(model, q);
  for (const auto& p : proxy_points(proxies, frames)) {
    for (const auto& o : scene.obstacles) best = std::min(best, signed_distance(o, p.center) - p.radius);
  }
  return best;
}

double collision_cost(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene, const Vector& q,
                      Vector* gradient) {
  require_dim(q.size(), model.n_dof(), "collision_cost q");
  if (gradient) gradient->setZero(model.n_dof());
  if (scene.obstacles.empty()) return 0.0;
  const Frames frames = forward_kinematics(model, q);
  double cost = 0.0;
  for (const auto& p : proxy_points(proxies, frames)) {
    for (const auto& o : scene.obstacles) {
      Vector3 n;
      const double d = signed_distance(o, p.center, gradient ? &n : nullptr);
      const double pen = p.radius + scene.margin - d;
      if (pen <= 0.0) continue;
      cost += pen * pen;
      if (gradient) {
        // d(pen^2)/dq = -2 pen n^T J_p
        *gradient -= 2.0 * pen * (point_jacobian(model, frames, p.link, p.center).transpose() * n);
      }
    }
  }
  return cost;
}

double collision_cost(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                      const Trajectory& traj) {
  double c = 0.0;
  for (int t = 0; t < traj.horizon(); ++t) c += collision_cost(model, proxies, scene, traj.q(t));
  return c;
}

Matrix collision_cost_gradient(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                               const Trajectory& traj) {
  Matrix g = Matrix::Zero(traj.horizon(), model.n_dof());
  Vector row;
  for (int t = 0; t < traj.horizon(); ++t) {
    collision_cost(model, proxies, scene, traj.q(t), &row);
    g.row(t) = row.transpose();
  }
  return g;
}

// ---------------------------------------------------------------------------

json scene_to_json(const Scene& scene) {
  json obs = json::array();
  for (const auto& o : scene.obstacles) {
    std::visit(overloaded{[&](const SphereObstacle& s) {
                            obs.push_back({{"type", "sphere"},
                                           {"center", {s.center.x(), s.center.y(), s.center.z()}},
                                           {"radius", s.radius}});
                          },
                          [&](const BoxObstacle& b) {
                            obs.push_back({{"type", "box"},
                                           {"min", {b.min.x(), b.min.y(), b.min.z()}},
                                           {"max", {b.max.x(), b.max.y(), b.max.z()}}});
                          },
                          [&](const HalfSpaceObstacle& h) {
                            obs.push_back({{"type", "halfspace"},
                                           {"normal", {h.normal.x(), h.normal.y(), h.normal.z()}},
                                           {"offset", h.offset}});
                          }},
               o);
  }
  return json{{"margin", scene.margin}, {"obstacles", obs}};
}

namespace {

Vector3 read_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw FormatError(path + ": expected an array of 3 numbers");
  Vector3 v;
  for (int k = 0; k < 3; ++k) {
    const auto& e = j[static_cast<std::size_t>(k)];
    if (!e.is_number()) throw FormatError(path + ": expected numbers");
    v(k) = e.get<double>();
  }
  return v;
}

}  // namespace

Scene scene_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("scene: expected an object");
  Scene s;
  if (j.contains("margin")) s.margin = j["margin"].get<double>();
  if (j.contains("obstacles")) {
    const json& arr = j["obstacles"];
    if (!arr.is_array()) throw FormatError("obstacles: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "obstacles[" + std::to_string(i) + "]";
      const json& e = arr[i];
      const std::string type = e.value("type", std::string());
      if (type == "sphere") {
        s.obstacles.push_back(SphereObstacle{read_vec3(e.at("center"), path + ".center"), e.at("radius").get<double>()});
      } else if (type == "box") {
        s.obstacles.push_back(BoxObstacle{read_vec3(e.at("min"), path + ".min"), read_vec3(e.at("max"), path + ".max")});
      } else if (type == "halfspace") {
        Vector3 n = read_vec3(e.at("normal"), path + ".normal");
        if (n.norm() <= 0.0) throw FormatError(path + ".normal: zero vector");
        s.obstacles.push_back(HalfSpaceObstacle{n.normalized(), e.at("offset").get<double>()});
      } else {
        throw FormatError(path + ".type: unknown obstacle type '" + type + "'");
      }
    }
  }
  s.validate();
  return s;
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scene file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
  return scene_from_json(j);
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << scene_to_json(scene).dump(2) << "\n";
}

}  // namespace paydiff
