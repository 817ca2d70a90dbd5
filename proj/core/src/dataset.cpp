#include "paydiff/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "paydiff/binary_io.hpp"
#include "paydiff/dynamics.hpp"

namespace paydiff {

namespace {

Region region(double x0, double y0, double z0, double x1, double y1, double z1) {
  return {Vector3(x0, y0, z0), Vector3(x1, y1, z1)};
}

nlohmann::json region_json(const Region& r) {
  return {{"lo", {r.lo.x(), r.lo.y(), r.lo.z()}}, {"hi", {r.hi.x(), r.hi.y(), r.hi.z()}}};
}

Region region_from(const nlohmann::json& j) {
  Region r;
  for (int i = 0; i < 3; ++i) {
    r.lo(i) = j.at("lo").at(static_cast<std::size_t>(i)).get<double>();
    r.hi(i) = j.at("hi").at(static_cast<std::size_t>(i)).get<double>();
  }
  if ((r.lo.array() > r.hi.array()).any()) throw DomainError("workspace region: lo must not exceed hi");
  return r;
}

Vector3 uniform_in(const Region& r, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector3 p;
  for (int i = 0; i < 3; ++i) p(i) = r.lo(i) + (r.hi(i) - r.lo(i)) * u(rng);
  return p;
}

Vector random_configuration(const RobotModel& model, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vector lo = model.q_min(), hi = model.q_max();
  Vector q(lo.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
  return q;
}

// Position-only damped least squares from q, clamped to the joint limits.
bool solve_ik(const RobotModel& model, const Vector3& target, Vector& q) {
  const Vector lo = model.q_min(), hi = model.q_max();
  constexpr double damping = 0.05;
  for (int it = 0; it < 300; ++it) {
    const Vector3 err = target - forward_kinematics(model, q).ee.translation();
    if (err.norm() < 1e-5) return true;
    const Matrix J = jacobian(model, q).topRows(3);
    const Matrix JJt = J * J.transpose() + damping * damping * Matrix::Identity(3, 3);
    q = (q + J.transpose() * JJt.ldlt().solve(err)).cwiseMax(lo).cwiseMin(hi);
  }
  return false;
}

}  // namespace

WorkspaceSpec WorkspaceSpec::defaults(const RobotModel& model) {
  WorkspaceSpec s;
  if (model.name() == "planar2") {
    s.pick = region(0.8, -1.2, 0.0, 1.6, -0.2, 0.0);
    s.place = region(-1.6, -1.2, 0.0, -0.8, -0.2, 0.0);
  } else if (model.name() == "planar3") {
    s.pick = region(0.2, -0.2, 0.0, 0.9, 0.2, 0.0);
    s.place = region(-0.9, -0.2, 0.0, -0.55, 0.2, 0.0);
  } else {
    s.pick = region(0.35, 0.2, 0.1, 0.6, 0.45, 0.35);
    s.place = region(0.35, -0.45, 0.1, 0.6, -0.2, 0.35);
    s.direct_joint_sampling = false;
  }
  return s;
}

nlohmann::json workspace_to_json(const WorkspaceSpec& spec) {
  return {{"pick", region_json(spec.pick)},
          {"place", region_json(spec.place)},
          {"direct_joint_sampling", spec.direct_joint_sampling},
          {"max_rejections", spec.max_rejections}};
}

WorkspaceSpec workspace_from_json(const nlohmann::json& j) {
  WorkspaceSpec s;
  s.pick = region_from(j.at("pick"));
  s.place = region_from(j.at("place"));
  s.direct_joint_sampling = j.value("direct_joint_sampling", true);
  s.max_rejections = j.value("max_rejections", 200000);
  if (s.max_rejections < 1) throw DomainError("workspace max_rejections must be >= 1");
  return s;
}

Vector sample_configuration(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                            const Region& reg, const WorkspaceSpec& spec, Rng& rng) {
  for (int tries = 0; tries < spec.max_rejections; ++tries) {
    Vector q = random_configuration(model, rng);
    if (!spec.direct_joint_sampling) {
      const Vector3 target = uniform_in(reg, rng);
      if (!solve_ik(model, target, q)) continue;
    }
    if (!reg.contains(forward_kinematics(model, q).ee.translation())) continue;
    if (in_collision(model, proxies, scene, q)) continue;
    return q;
  }
  throw DomainError("sample_configuration: rejection budget exhausted");
}

Problem sample_problem(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                       const WorkspaceSpec& spec, Rng& rng) {
  Problem p;
  p.scene = scene;
  p.start = sample_configuration(model, proxies, scene, spec.pick, spec, rng);
  p.goal = sample_configuration(model, proxies, scene, spec.place, spec, rng);
  if (std::uniform_int_distribution<int>(0, 1)(rng) == 1) std::swap(p.start, p.goal);
  return p;
}

std::vector<Problem> problem_suite(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                                   const WorkspaceSpec& spec, int count, std::uint64_t seed) {
  std::vector<Problem> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(sample_problem(model, proxies, scene, spec, rng));
    out.back().id = static_cast<std::uint64_t>(i);
  }
  return out;
}

NormalizationStats NormalizationStats::from_limits(const RobotModel& model) {
  const int n = model.n_dof();
  NormalizationStats s;
  s.center = Vector::Zero(3 * n);
  s.scale = Vector::Zero(3 * n);
  s.center.head(n) = (model.q_min() + model.q_max()) / 2.0;
  s.scale.head(n) = (model.q_max() - model.q_min()) / 2.0;
  s.scale.segment(n, n) = model.v_max();
  s.scale.tail(n) = model.a_max();
  return s;
}

Matrix NormalizationStats::normalize(const Matrix& states) const {
  require_dim(states.cols(), center.size(), "normalize states");
  return (states.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix NormalizationStats::denormalize(const Matrix& x) const {
  require_dim(x.cols(), center.size(), "denormalize states");
  Matrix out = x.array().rowwise() * scale.transpose().array();
  return out.rowwise() + center.transpose();
}

Dataset generate_dataset(const RobotModel& model, const CollisionProxySet& proxies, const Scene& scene,
                         const DatasetConfig& cfg, const std::function<void(int, int)>& progress) {
  if (cfg.count < 1) throw DomainError("generate_dataset: count must be >= 1");
  if (cfg.threads < 1) throw DomainError("generate_dataset: threads must be >= 1");
  if (cfg.problems_per_sample < 1) throw DomainError("generate_dataset: problems_per_sample must be >= 1");
  PlanFilterConfig planner = cfg.planner;
  planner.rrt.timeout = std::numeric_limits<double>::infinity();

  std::vector<Sample> samples(static_cast<std::size_t>(cfg.count));
  std::atomic<int> next{0}, done{0}, tried{0}, failed{0};
  std::atomic<bool> abort{false};
  std::mutex err_mu;
  std::string error;

  auto fail = [&](std::string msg) {
    std::lock_guard lock(err_mu);
    if (error.empty()) error = std::move(msg);
    abort = true;
  };

  auto worker = [&] {
    for (int i = next++; i < cfg.count && !abort; i = next++) {
      try {
        const auto ui = static_cast<std::uint64_t>(i);
        bool ok = false;
        for (int k = 0; k < cfg.problems_per_sample && !ok && !abort; ++k) {
          const std::uint64_t stream = derive_seed(cfg.seed, ui * 64 + static_cast<std::uint64_t>(k));
          Rng rng(stream);
          Problem prob = sample_problem(model, proxies, scene, cfg.workspace, rng);
          PlanFilterConfig pc = planner;
          pc.rrt.seed = derive_seed(stream, 1);
          pc.rrt.halton_offset = splitmix64(stream) % 1000003;
          const PlannerResult r = plan_and_filter(model, proxies, prob, 0.0, pc);
          const int t = ++tried;
          if (!r.ok()) {
            const int f = ++failed;
            if (t >= 20 && static_cast<double>(f) / t > cfg.max_failure_rate) {
              fail("generate_dataset: planner failure rate " + std::to_string(f) + "/" + std::to_string(t) +
                   " exceeds " + std::to_string(cfg.max_failure_rate) + " (last: " + r.message + ")");
            }
            continue;
          }
          const std::optional<double> m = max_supported_payload(model, *r.trajectory);
          if (!m) continue;
          if (cfg.audit_every > 0 && i % cfg.audit_every == 0) {
            const bool at = validate_torques(model, *r.trajectory, *m).feasible;
            const bool above = *m >= kPayloadCap || !validate_torques(model, *r.trajectory, *m + 0.01).feasible;
            if (!at || !above) fail("generate_dataset: label audit failed for sample " + std::to_string(i));
          }
          Sample& s = samples[static_cast<std::size_t>(i)];
          s.trajectory = *r.trajectory;
          s.m_max = *m;
          s.problem_id = ui;
          s.planner_tag = "plan_and_filter";
          ok = true;
        }
        if (!ok && !abort) {
          fail("generate_dataset: no feasible problem for sample " + std::to_string(i) + " after " +
               std::to_string(cfg.problems_per_sample) + " tries (planner failure rate " +
               std::to_string(failed.load()) + "/" + std::to_string(tried.load()) + ")");
        }
        const int d = ++done;
        if (progress) progress(d, cfg.count);
      } catch (const std::exception& e) {
        fail(e.what());
      }
    }
  };

  if (cfg.threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
  }
  if (abort) throw Error(error);

  Dataset ds;
  ds.model_name = model.name();
  ds.model_hash = model.hash();
  ds.n_dof = model.n_dof();
  ds.horizon = samples.front().trajectory.horizon();
  ds.dt = samples.front().trajectory.dt();
  ds.normalization = NormalizationStats::from_limits(model);
  ds.samples = std::move(samples);
  return ds;
}

namespace {

constexpr char kMagic[9] = "PDDATA\0\0";
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  using namespace binio;
  put_magic(out, kMagic);
  put<std::uint32_t>(out, kVersion);
  put_string(out, ds.model_name);
  put<std::uint64_t>(out, ds.model_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.n_dof));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.horizon));
  put<double>(out, ds.dt);
  const int c = 3 * ds.n_dof;
  require_dim(ds.normalization.center.size(), c, "dataset normalization");
  put_bytes(out, ds.normalization.center.data(), sizeof(double) * static_cast<std::size_t>(c));
  put_bytes(out, ds.normalization.scale.data(), sizeof(double) * static_cast<std::size_t>(c));
  put<std::uint64_t>(out, ds.samples.size());
  for (const Sample& s : ds.samples) {
    const Trajectory& t = s.trajectory;
    if (t.n_dof() != ds.n_dof || t.horizon() != ds.horizon || t.dt() != ds.dt) {
      throw DimensionError("save_dataset: sample " + std::to_string(s.problem_id) + " does not match the header");
    }
    put<double>(out, s.m_max);
    put<std::uint64_t>(out, s.problem_id);
    put_string(out, s.planner_tag);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = t.states();
    put_bytes(out, rows.data(), sizeof(double) * static_cast<std::size_t>(rows.size()));
  }
  if (!out) throw Error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path, const RobotModel* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  using namespace binio;
  expect_magic(in, kMagic, "dataset");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw FormatError("dataset version " + std::to_string(version) + " is not supported");
  Dataset ds;
  ds.model_name = get_string(in, "model name", 4096);
  ds.model_hash = get<std::uint64_t>(in, "model hash");
  if (expected && expected->hash() != ds.model_hash) {
    throw FormatError("dataset was generated for a different model ('" + ds.model_name + "', hash mismatch)");
  }
  const auto n = get<std::uint32_t>(in, "n_dof");
  const auto h = get<std::uint32_t>(in, "horizon");
  if (n < 1 || n > 64 || h < 2 || h > (1u << 20)) throw FormatError("corrupt file: implausible dataset header");
  ds.n_dof = static_cast<int>(n);
  ds.horizon = static_cast<int>(h);
  ds.dt = get<double>(in, "dt");
  const int c = 3 * ds.n_dof;
  ds.normalization.center.resize(c);
  ds.normalization.scale.resize(c);
  get_bytes(in, ds.normalization.center.data(), sizeof(double) * static_cast<std::size_t>(c), "normalization");
  get_bytes(in, ds.normalization.scale.data(), sizeof(double) * static_cast<std::size_t>(c), "normalization");
  const auto count = get<std::uint64_t>(in, "sample count");
  if (count > (1u << 24)) throw FormatError("corrupt file: implausible sample count");
  ds.samples.reserve(static_cast<std::size_t>(count));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(ds.horizon, c);
  for (std::uint64_t i = 0; i < count; ++i) {
    Sample s;
    s.m_max = get<double>(in, "m_max");
    s.problem_id = get<std::uint64_t>(in, "problem id");
    s.planner_tag = get_string(in, "planner tag", 4096);
    get_bytes(in, rows.data(), sizeof(double) * static_cast<std::size_t>(rows.size()), "sample states");
    s.trajectory = Trajectory(ds.n_dof, ds.dt, Matrix(rows));
    ds.samples.push_back(std::move(s));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("corrupt file: trailing bytes after dataset");
  return ds;
}

std::vector<int> payload_histogram(const Dataset& ds) {
  std::vector<int> bins(static_cast<std::size_t>(kPayloadCap), 0);
  for (const Sample& s : ds.samples) {
    const int b = std::clamp(static_cast<int>(std::floor(s.m_max)), 0, static_cast<int>(kPayloadCap) - 1);
    ++bins[static_cast<std::size_t>(b)];
  }
  return bins;
}

}  // namespace paydiff
