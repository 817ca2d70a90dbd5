#include <filesystem>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "paydiff/dataset.hpp"
#include "paydiff/dynamics.hpp"
#include "test_helpers.hpp"

using namespace paydiff;
using namespace testing_util;

namespace {

struct Setup {
  RobotModel model = builtin_model("planar3");
  CollisionProxySet proxies = default_proxies(model);
  Scene scene = tabletop_scene(model);
  WorkspaceSpec workspace = WorkspaceSpec::defaults(model);
};

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("paydiff_test_" + name);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DatasetConfig small_config(int n, std::uint64_t seed, int threads = 1) {
  DatasetConfig cfg;
  cfg.count = n;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.workspace = WorkspaceSpec::defaults(builtin_model("planar3"));
  cfg.audit_every = 10;
  return cfg;
}

}  // namespace

TEST_CASE("sample_problem") {
  Setup s;
  Rng a(42), b(42);
  const Problem pa = sample_problem(s.model, s.proxies, s.scene, s.workspace, a);
  const Problem pb = sample_problem(s.model, s.proxies, s.scene, s.workspace, b);
  CHECK(pa.start == pb.start);
  CHECK(pa.goal == pb.goal);

  const auto suite = problem_suite(s.model, s.proxies, s.scene, s.workspace, 1000, 9);
  REQUIRE(suite.size() == 1000);
  int pick_first = 0;
  for (const Problem& p : suite) {
    CHECK_FALSE(in_collision(s.model, s.proxies, s.scene, p.start));
    CHECK_FALSE(in_collision(s.model, s.proxies, s.scene, p.goal));
    CHECK((p.start.array() >= s.model.q_min().array()).all());
    CHECK((p.start.array() <= s.model.q_max().array()).all());
    const Vector3 e0 = forward_kinematics(s.model, p.start).ee.translation();
    const Vector3 e1 = forward_kinematics(s.model, p.goal).ee.translation();
    const bool forward = s.workspace.pick.contains(e0) && s.workspace.place.contains(e1);
    const bool backward = s.workspace.place.contains(e0) && s.workspace.pick.contains(e1);
    CHECK((forward || backward));
    pick_first += forward;
  }
  CHECK(pick_first > 400);
  CHECK(pick_first < 600);
  CHECK(suite[7].id == 7);
}

TEST_CASE("ik-based sampling for the spatial arm") {
  const RobotModel m = builtin_model("arm7");
  const auto px = default_proxies(m);
  const Scene sc = tabletop_scene(m);
  const WorkspaceSpec ws = WorkspaceSpec::defaults(m);
  CHECK_FALSE(ws.direct_joint_sampling);
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    const Problem p = sample_problem(m, px, sc, ws, rng);
    CHECK_FALSE(in_collision(m, px, sc, p.start));
    const Vector3 e = forward_kinematics(m, p.start).ee.translation();
    CHECK((ws.pick.contains(e) || ws.place.contains(e)));
  }
}

TEST_CASE("rejection budget") {
  Setup s;
  WorkspaceSpec ws = s.workspace;
  ws.pick = Region{Vector3(5, 5, 0), Vector3(6, 6, 0)};  // unreachable
  ws.max_rejections = 100;
  Rng rng(1);
  CHECK_THROWS_AS(sample_problem(s.model, s.proxies, s.scene, ws, rng), DomainError);
}

TEST_CASE("workspace json round trip") {
  Setup s;
  const WorkspaceSpec back = workspace_from_json(workspace_to_json(s.workspace));
  CHECK(back.pick.lo == s.workspace.pick.lo);
  CHECK(back.place.hi == s.workspace.place.hi);
  CHECK(back.direct_joint_sampling == s.workspace.direct_joint_sampling);
  nlohmann::json bad = workspace_to_json(s.workspace);
  bad["pick"]["lo"][0] = 10.0;
  CHECK_THROWS_AS(workspace_from_json(bad), DomainError);
}

TEST_CASE("normalization from limits") {
  Setup s;
  const NormalizationStats st = NormalizationStats::from_limits(s.model);
  Rng rng(4);
  const Trajectory t = random_trajectory(s.model, rng);
  const Matrix x = st.normalize(t.states());
  CHECK((st.denormalize(x) - t.states()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(x.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  Matrix limits(2, 9);
  limits.row(0) << s.model.q_min().transpose(), -s.model.v_max().transpose(), -s.model.a_max().transpose();
  limits.row(1) << s.model.q_max().transpose(), s.model.v_max().transpose(), s.model.a_max().transpose();
  const Matrix n = st.normalize(limits);
  CHECK((n.row(0).array() + 1.0).abs().maxCoeff() < 1e-12);
  CHECK((n.row(1).array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(st.normalize(Matrix::Zero(2, 4)), DimensionError);
}

TEST_CASE("generate_dataset") {
  Setup s;
  SUBCASE("single sample") {
    const Dataset ds = generate_dataset(s.model, s.proxies, s.scene, small_config(1, 5));
    REQUIRE(ds.size() == 1);
    const Sample& smp = ds.samples.front();
    CHECK(smp.planner_tag == "plan_and_filter");
    CHECK(ds.horizon == kDefaultHorizon);
    CHECK(ds.model_hash == s.model.hash());
  }
  SUBCASE("labels, validity and determinism") {
    const Dataset ds = generate_dataset(s.model, s.proxies, s.scene, small_config(60, 11));
    REQUIRE(ds.size() == 60);
    for (const Sample& smp : ds.samples) {
      const Trajectory& t = smp.trajectory;
      Problem p;
      p.start = t.q(0);
      p.goal = t.q(t.horizon() - 1);
      p.scene = s.scene;
      CHECK(validate(s.model, s.proxies, p, t, 0.0).valid);
      CHECK(smp.m_max >= 0.0);
      CHECK(smp.m_max <= kPayloadCap);
      CHECK(std::abs(*max_supported_payload(s.model, t) - smp.m_max) <= 1e-6);
      CHECK(validate_torques(s.model, t, smp.m_max).feasible);
      if (smp.m_max < kPayloadCap) CHECK_FALSE(validate_torques(s.model, t, smp.m_max + 0.01).feasible);
      for (double m = 0.0; m <= smp.m_max; m += 1.0) CHECK(validate_torques(s.model, t, m).feasible);
    }
    const auto hist = payload_histogram(ds);
    int above = 0;
    for (std::size_t b = static_cast<std::size_t>(s.model.nominal_payload()); b < hist.size(); ++b) above += hist[b];
    CHECK(above > 0);

    const auto f1 = temp_file("ds1.bin"), f2 = temp_file("ds2.bin");
    save_dataset(ds, f1);
    save_dataset(generate_dataset(s.model, s.proxies, s.scene, small_config(60, 11, 3)), f2);
    CHECK(file_bytes(f1) == file_bytes(f2));
    std::filesystem::remove(f2);

    const Dataset back = load_dataset(f1, &s.model);
    CHECK(back == ds);

    const RobotModel other = builtin_model("planar2");
    CHECK_THROWS_AS(load_dataset(f1, &other), FormatError);

    const std::string bytes = file_bytes(f1);
    const auto cut = temp_file("ds_cut.bin");
    {
      std::ofstream out(cut, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    try {
      load_dataset(cut);
      FAIL("truncated file loaded");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("corrupt file") != std::string::npos);
    }
    {
      std::ofstream out(cut, std::ios::binary);
      out << "definitely not a dataset";
    }
    CHECK_THROWS_AS(load_dataset(cut), FormatError);
    std::filesystem::remove(cut);
    std::filesystem::remove(f1);
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(generate_dataset(s.model, s.proxies, s.scene, small_config(0, 1)), DomainError);
    CHECK_THROWS_AS(generate_dataset(s.model, s.proxies, s.scene, small_config(1, 1, 0)), DomainError);
  }
  SUBCASE("planner failures abort with diagnostics") {
    DatasetConfig cfg = small_config(30, 2);
    cfg.planner.duration = 0.4;  // far too short for any pick-and-place motion
    try {
      generate_dataset(s.model, s.proxies, s.scene, cfg);
      FAIL("expected an abort");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("failure rate") != std::string::npos);
    }
  }
}
