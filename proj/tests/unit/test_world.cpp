#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "finite_difference.hpp"
#include "paydiff/world.hpp"
#include "test_helpers.hpp"

using namespace paydiff;
using namespace testing_util;

namespace {

// Distance from p to a solid, estimated by sampling the solid densely.
double sampled_distance(const BoxObstacle& b, const Vector3& p, int n = 40) {
  double best = 1e9;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k) {
        const Vector3 s = b.min + (b.max - b.min).cwiseProduct(Vector3(i, j, k) / n);
        best = std::min(best, (s - p).norm());
      }
  return best;
}

CollisionProxySet single_proxy(double radius) {
  CollisionProxySet s;
  s.proxies.push_back({0, Vector3(1.0, 0.0, 0.0), radius});
  return s;
}

}  // namespace

TEST_CASE("signed distances") {
  const SphereObstacle s{Vector3(1, 0, 0), 0.5};
  CHECK(signed_distance(s, Vector3(3, 0, 0)) == doctest::Approx(1.5));
  CHECK(signed_distance(s, Vector3(1, 0, 0)) == doctest::Approx(-0.5));
  const HalfSpaceObstacle h{Vector3(0, 0, 1), 0.0};
  CHECK(signed_distance(h, Vector3(0.3, 2, 0.2)) == doctest::Approx(0.2));
  const BoxObstacle b{Vector3(-1, -1, -1), Vector3(1, 1, 1)};
  CHECK(signed_distance(b, Vector3(0, 0, 0.5)) == doctest::Approx(-0.5));
  CHECK(signed_distance(b, Vector3(2, 2, 0)) == doctest::Approx(std::sqrt(2.0)));

  Rng rng(1);
  for (int k = 0; k < 30; ++k) {
    const Vector3 p = Vector3::Random() * 2.5;
    const double d = signed_distance(b, p);
    if (d > 0.05) {
      const double sampled = sampled_distance(b, p);
      CHECK(d <= sampled + 1e-12);
      CHECK(sampled - d < 0.05);
    }
    Vector3 g;
    signed_distance(b, p, &g);
    const Vector fd = oracle::fd_gradient([&](const Vector& x) { return signed_distance(b, Vector3(x)); }, p, 1e-7);
    if (std::abs(d) > 1e-3) CHECK((g - fd).norm() < 1e-5);
  }
}

TEST_CASE("in_collision basics") {
  const RobotModel m = builtin_model("planar2");
  const Scene empty;
  CHECK_FALSE(in_collision(m, default_proxies(m), empty, Vector::Zero(2)));

  // proxy of radius 0.1 whose center sits 0.05 above a table plane
  Scene table;
  table.obstacles.push_back(HalfSpaceObstacle{Vector3(0, 1, 0), -0.05});
  CHECK(in_collision(m, single_proxy(0.1), table, Vector::Zero(2)));
  CHECK_FALSE(in_collision(m, single_proxy(0.02), table, Vector::Zero(2)));
}

TEST_CASE("collision cost definition and gradient") {
  const RobotModel m = builtin_model("planar2");
  Scene scene;
  scene.margin = 0.01;
  scene.obstacles.push_back(SphereObstacle{Vector3(1.0, 0.15, 0.0), 0.1});
  const CollisionProxySet p = single_proxy(0.1);
  // proxy center at (1,0,0); sphere surface 0.05 away; penetration d = 0.05
  const double expect = std::pow(0.1 + 0.01 - 0.05, 2);
  CHECK(collision_cost(m, p, scene, Vector::Zero(2)) == doctest::Approx(expect).epsilon(1e-12));

  const Trajectory clear = static_trajectory(testing_util::vec({-1.0, 0.0}), 4);
  CHECK(collision_cost(m, p, scene, clear) == 0.0);
  CHECK(collision_cost_gradient(m, p, scene, clear).isZero(0.0));
}

TEST_CASE("trajectory collision gradient matches finite differences") {
  const RobotModel m = builtin_model("planar3");
  const CollisionProxySet proxies = default_proxies(m);
  const Scene scene = tabletop_scene(m);
  Rng rng(3);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 50; ++trial) {
    Trajectory t = Trajectory::zeros(3, 6, 0.1);
    for (int i = 0; i < t.horizon(); ++i) t.set_state(i, random_q(m, rng), Vector::Zero(3), Vector::Zero(3));
    if (collision_cost(m, proxies, scene, t) <= 1e-6) continue;
    ++checked;
    const Matrix g = collision_cost_gradient(m, proxies, scene, t);
    const Vector x = t.positions().reshaped();
    auto f = [&](const Vector& y) {
      Trajectory u = t;
      u.states().leftCols(3) = y.reshaped(t.horizon(), 3);
      return collision_cost(m, proxies, scene, u);
    };
    const Vector fd = oracle::fd_gradient(f, x, 1e-6);
    const Vector gv = g.reshaped();
    CHECK((gv - fd).norm() / std::max(1e-8, fd.norm()) < 1e-4);
    for (int i = 0; i < t.horizon(); ++i) {
      if (collision_cost(m, proxies, scene, t.q(i)) == 0.0) CHECK(g.row(i).isZero(0.0));
    }
    // small step against the gradient lowers the cost
    Trajectory step = t;
    step.states().leftCols(3) -= 1e-4 * g / g.norm();
    CHECK(collision_cost(m, proxies, scene, step) < collision_cost(m, proxies, scene, t));
  }
  CHECK(checked == 50);
}

TEST_CASE("cost ignores obstacle order") {
  const RobotModel m = builtin_model("planar3");
  Scene a = tabletop_scene(m);
  Scene b = a;
  std::reverse(b.obstacles.begin(), b.obstacles.end());
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const Vector q = random_q(m, rng);
    CHECK(collision_cost(m, default_proxies(m), a, q) == doctest::Approx(collision_cost(m, default_proxies(m), b, q)));
  }
}

TEST_CASE("scene json") {
  const Scene s = tabletop_scene(builtin_model("arm7"));
  const Scene back = scene_from_json(scene_to_json(s));
  CHECK(back.obstacles.size() == s.obstacles.size());
  CHECK(scene_to_json(back) == scene_to_json(s));
  nlohmann::json bad = scene_to_json(s);
  bad["obstacles"][0] = {{"type", "sphere"}, {"center", {0, 0, 0}}, {"radius", -1.0}};
  CHECK_THROWS_AS(scene_from_json(bad), Error);
}
