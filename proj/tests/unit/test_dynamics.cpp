#include <cmath>
#include <numbers>

#include "doctest.h"
#include "payload_grid.hpp"
#include "paydiff/dynamics.hpp"
#include "planar_lagrangian.hpp"
#include "test_helpers.hpp"

using namespace paydiff;
using namespace testing_util;

namespace {

double rel_err(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

struct State {
  Vector q, qd, qdd;
};

State random_state(const RobotModel& m, Rng& rng) {
  return {random_q(m, rng), uniform_vec(-m.v_max(), m.v_max(), rng), uniform_vec(-m.a_max(), m.a_max(), rng)};
}

}  // namespace

TEST_CASE("pendulum gravity torque") {
  const RobotModel p = pendulum(1.0, 100.0);
  const Vector z = Vector::Zero(1);
  CHECK(inverse_dynamics(p, z, z, z)(0) == doctest::Approx(9.81).epsilon(1e-12));
  CHECK(std::abs(inverse_dynamics(p, vec({std::numbers::pi / 2}), z, z)(0)) < 1e-12);
}

TEST_CASE("planar2 matches the two-link closed form") {
  const RobotModel m = builtin_model("planar2");
  const RobotModel mf = without_friction(m);
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const State s = random_state(m, rng);
    const Vector expect = oracle::two_link_torque(1, 1, 1, 1, 9.81, s.q, s.qd, s.qdd);
    CHECK(rel_err(inverse_dynamics(mf, s.q, s.qd, s.qdd), expect) < 1e-8);
    CHECK(rel_err(mass_matrix(m, s.q).reshaped(), Matrix(oracle::two_link_mass(1, 1, 1, 1, s.q(1))).reshaped()) < 1e-9);
  }
}

TEST_CASE("planar presets match the Lagrangian oracle including friction") {
  for (const char* name : {"planar2", "planar3"}) {
    const RobotModel m = builtin_model(name);
    const oracle::PlanarChain chain = planar_chain(m);
    Rng rng(2);
    for (int k = 0; k < 300; ++k) {
      const State s = random_state(m, rng);
      CHECK(rel_err(inverse_dynamics(m, s.q, s.qd, s.qdd), oracle::planar_torque(chain, s.q, s.qd, s.qdd)) < 1e-8);
    }
  }
}

TEST_CASE("mass matrix is symmetric positive definite") {
  for (const auto& name : builtin_model_names()) {
    const RobotModel m = builtin_model(name);
    Rng rng(4);
    for (int k = 0; k < 100; ++k) {
      const Matrix M = mass_matrix(m, random_q(m, rng));
      CHECK((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-9);
      for (int r = 0; r < 5; ++r) {
        const Vector x = Vector::Random(m.n_dof());
        CHECK(x.dot(M * x) > 0.0);
      }
    }
  }
}

TEST_CASE("payload torque") {
  const RobotModel m = builtin_model("arm7");
  Rng rng(6);
  const Vector z = Vector::Zero(7);
  CHECK(payload_torque(m, random_q(m, rng), 0.0).isZero(0.0));
  CHECK_THROWS_AS(payload_torque(m, z, -1.0), DomainError);

  const PayloadWrench w = payload_wrench(m, 2.0);
  Vector6 expect;
  expect << 0, 0, -19.62, 0, 0, 0;
  CHECK((w.wrench_world - expect).norm() < 1e-12);

  for (int k = 0; k < 50; ++k) {
    const Vector q = random_q(m, rng);
    const Vector diff = inverse_dynamics(m, q, z, z, w.wrench_world) - inverse_dynamics(m, q, z, z);
    CHECK((payload_torque(m, q, 2.0) - diff).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((payload_torque(m, q, 2.0) + jacobian(m, q).transpose() * w.wrench_world).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("torque is affine in payload mass") {
  const RobotModel m = builtin_model("planar3");
  Rng rng(7);
  for (int k = 0; k < 50; ++k) {
    const State s = random_state(m, rng);
    auto tau = [&](double mass) {
      return Vector(inverse_dynamics(m, s.q, s.qd, s.qdd) + payload_torque(m, s.q, mass));
    };
    CHECK((tau(2.0) - 2.0 * tau(1.0) + tau(0.0)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("friction is odd") {
  const RobotModel m = builtin_model("planar3");
  const Vector qd = vec({0.3, -0.01, 1.2});
  CHECK(friction_torque(m, -qd) == -friction_torque(m, qd));
}

TEST_CASE("power balance without friction") {
  const RobotModel m = without_friction(builtin_model("arm7"));
  auto motion = [](double t, int i) { return 0.3 * std::sin(1.3 * t + i) + 0.1 * i; };
  auto state = [&](double t, Vector& q, Vector& qd, Vector& qdd) {
    q.resize(7);
    qd.resize(7);
    qdd.resize(7);
    for (int i = 0; i < 7; ++i) {
      q(i) = motion(t, i);
      qd(i) = 0.3 * 1.3 * std::cos(1.3 * t + i);
      qdd(i) = -0.3 * 1.69 * std::sin(1.3 * t + i);
    }
  };
  auto energy = [&](double t) {
    Vector q, qd, qdd;
    state(t, q, qd, qdd);
    const Frames f = forward_kinematics(m, q);
    double pe = 0.0;
    for (int i = 0; i < 7; ++i) {
      const auto& L = m.links()[static_cast<std::size_t>(i)];
      pe -= L.mass * m.gravity().dot(f.joints[static_cast<std::size_t>(i)] * L.com);
    }
    return 0.5 * qd.dot(mass_matrix(m, q) * qd) + pe;
  };
  for (double t : {0.1, 0.7, 1.9}) {
    Vector q, qd, qdd;
    state(t, q, qd, qdd);
    const double power = inverse_dynamics(m, q, qd, qdd).dot(qd);
    const double h = 1e-5;
    CHECK(std::abs(power - (energy(t + h) - energy(t - h)) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("validate_torques") {
  CHECK(validate_torques(builtin_model("planar2"), static_trajectory(Vector::Zero(2)), 0.0).feasible);
  const RobotModel weak = pendulum(1.0, 5.0);
  const TorqueProfile tp = validate_torques(weak, static_trajectory(Vector::Zero(1)), 0.0);
  CHECK_FALSE(tp.feasible);
  CHECK(tp.min_margin() == doctest::Approx(5.0 - 9.81));
  CHECK_FALSE(max_supported_payload(weak, static_trajectory(Vector::Zero(1))).has_value());
}

TEST_CASE("feasibility is monotone in payload") {
  const RobotModel m = builtin_model("planar3");
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const Trajectory t = random_trajectory(m, rng);
    bool prev = true;
    for (double mass = 0.0; mass <= 18.0; mass += 0.5) {
      const bool ok = validate_torques(m, t, mass).feasible;
      CHECK((prev || !ok));
      prev = ok;
    }
  }
}

TEST_CASE("max supported payload") {
  const RobotModel p = pendulum(0.0, 50.0);
  const auto mm = max_supported_payload(p, static_trajectory(Vector::Zero(1)));
  REQUIRE(mm.has_value());
  CHECK(*mm == doctest::Approx(50.0 / 9.81).epsilon(1e-12));
  CHECK(std::abs(oracle::grid_max_payload(p, static_trajectory(Vector::Zero(1))) - *mm) < 1e-3);

  // hanging straight down: no payload moment anywhere
  const auto down = max_supported_payload(p, static_trajectory(vec({-std::numbers::pi / 2})));
  REQUIRE(down.has_value());
  CHECK(*down == 18.0);

  const RobotModel m = builtin_model("planar3");
  Rng rng(9);
  for (int k = 0; k < 20; ++k) {
    const Trajectory t = random_trajectory(m, rng);
    const auto label = max_supported_payload(m, t);
    if (!label) continue;
    CHECK(std::abs(oracle::grid_max_payload(m, t) - *label) < 1e-3);
  }
}

// Slowing a motion down does not always raise its label: a decelerating link
// can offset gravity. What does hold is convergence to the quasi-static label.
TEST_CASE("very slow motion approaches the static label") {
  const RobotModel m = without_friction(builtin_model("planar3"));
  Rng rng(10);
  for (int k = 0; k < 20; ++k) {
    const Trajectory t = random_trajectory(m, rng);
    double static_label = kPayloadCap;
    for (int i = 0; i < t.horizon(); ++i) {
      static_label = std::min(static_label, max_supported_payload(m, static_trajectory(t.q(i), 2)).value_or(0.0));
    }
    const auto slow = max_supported_payload(m, time_scale(t, 1e4));
    REQUIRE(slow.has_value());
    CHECK(*slow == doctest::Approx(static_label).epsilon(1e-6));
  }
}
