#include "paydiff/model_io.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace paydiff {

using nlohmann::json;

namespace {

json vec_json(const Vector3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_json(const Matrix3& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return rows;
}

json transform_json(const Transform& t) {
  return json{{"xyz", vec_json(t.translation())}, {"rotation", mat_json(t.linear())}};
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw FormatError(path + ": " + msg); }

const json& member(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double number_or(const json& j, const char* key, const std::string& path, double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  return number(*it, path + "." + key);
}

Vector3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  return Vector3(number(j[0], path + "[0]"), number(j[1], path + "[1]"), number(j[2], path + "[2]"));
}

Matrix3 mat3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected a 3x3 array");
  Matrix3 m;
  for (int r = 0; r < 3; ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    const Vector3 row = vec3(j[static_cast<std::size_t>(r)], row_path);
    m.row(r) = row.transpose();
  }
  return m;
}

Transform transform(const json& j, const std::string& path) {
  Transform t = Transform::Identity();
  if (!j.is_object()) fail(path, "expected an object");
  if (j.contains("xyz")) t.translation() = vec3(j["xyz"], path + ".xyz");
  if (j.contains("rotation")) {
    const Matrix3 r = mat3(j["rotation"], path + ".rotation");
    if ((r.transpose() * r - Matrix3::Identity()).cwiseAbs().maxCoeff() > 1e-9 || r.determinant() < 0.0) {
      fail(path + ".rotation", "not a proper rotation matrix");
    }
    t.linear() = r;
  } else if (j.contains("rpy")) {
    const Vector3 rpy = vec3(j["rpy"], path + ".rpy");
    t.linear() = (Eigen::AngleAxisd(rpy.z(), Vector3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vector3::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Vector3::UnitX()))
                     .toRotationMatrix();
  }
  return t;
}

const json& array_member(const json& j, const char* key) {
  const json& a = member(j, key, "");
  if (!a.is_array()) fail(key, "expected an array");
  return a;
}

std::string idx(const char* group, std::size_t i) { return std::string(group) + "[" + std::to_string(i) + "]"; }

}  // namespace

json model_to_json(const RobotModel& model) {
  json j;
  j["name"] = model.name();
  j["nominal_payload"] = model.nominal_payload();
  j["gravity"] = vec_json(model.gravity());
  j["ee_offset"] = transform_json(model.ee_offset());
  json joints = json::array(), links = json::array(), limits = json::array(), friction = json::array();
  for (int i = 0; i < model.n_dof(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const Joint& jt = model.joints()[k];
    joints.push_back({{"type", "revolute"}, {"origin", transform_json(jt.origin)}, {"axis", vec_json(jt.axis)}});
    const LinkInertia& l = model.links()[k];
    links.push_back({{"mass", l.mass}, {"com", vec_json(l.com)}, {"inertia", mat_json(l.inertia)}});
    const JointLimits& lim = model.limits()[k];
    limits.push_back({{"q_min", lim.q_min},
                      {"q_max", lim.q_max},
                      {"v_max", lim.v_max},
                      {"a_max", lim.a_max},
                      {"j_max", lim.j_max},
                      {"tau_max", lim.tau_max}});
    const FrictionParams& f = model.friction()[k];
    friction.push_back({{"viscous", f.viscous}, {"coulomb", f.coulomb}, {"smoothing_eps", f.smoothing_eps}});
  }
  j["joints"] = joints;
  j["links"] = links;
  j["limits"] = limits;
  j["friction"] = friction;
  return j;
}

RobotModel model_from_json(const json& j) {
  if (!j.is_object()) fail("<root>", "expected an object");
  const std::string name = j.value("name", std::string("custom"));
  const Vector3 gravity = j.contains("gravity") ? vec3(j["gravity"], "gravity") : Vector3(0.0, 0.0, -9.81);
  const double nominal = j.contains("nominal_payload") ? number(j["nominal_payload"], "nominal_payload") : 0.0;
  const Transform ee = j.contains("ee_offset") ? transform(j["ee_offset"], "ee_offset") : Transform::Identity();

  std::vector<Joint> joints;
  const json& jj = array_member(j, "joints");
  for (std::size_t i = 0; i < jj.size(); ++i) {
    const std::string p = idx("joints", i);
    const std::string type = jj[i].value("type", std::string("revolute"));
    if (type != "revolute") fail(p + ".type", "only revolute joints are supported, got '" + type + "'");
    Joint joint;
    if (jj[i].contains("origin")) joint.origin = transform(jj[i]["origin"], p + ".origin");
    joint.axis = vec3(member(jj[i], "axis", p), p + ".axis");
    joints.push_back(joint);
  }

  std::vector<LinkInertia> links;
  const json& jl = array_member(j, "links");
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const std::string p = idx("links", i);
    LinkInertia l;
    l.mass = number(member(jl[i], "mass", p), p + ".mass");
    l.com = jl[i].contains("com") ? vec3(jl[i]["com"], p + ".com") : Vector3::Zero();
    l.inertia = jl[i].contains("inertia") ? mat3(jl[i]["inertia"], p + ".inertia") : Matrix3::Zero();
    links.push_back(l);
  }

  std::vector<JointLimits> limits;
  const json& jlim = array_member(j, "limits");
  for (std::size_t i = 0; i < jlim.size(); ++i) {
    const std::string p = idx("limits", i);
    const json& e = jlim[i];
    limits.push_back({number(member(e, "q_min", p), p + ".q_min"), number(member(e, "q_max", p), p + ".q_max"),
                      number(member(e, "v_max", p), p + ".v_max"), number(member(e, "a_max", p), p + ".a_max"),
                      number(member(e, "j_max", p), p + ".j_max"), number(member(e, "tau_max", p), p + ".tau_max")});
  }

  std::vector<FrictionParams> friction;
  if (j.contains("friction")) {
    const json& jf = array_member(j, "friction");
    for (std::size_t i = 0; i < jf.size(); ++i) {
      const std::string p = idx("friction", i);
      friction.push_back({number_or(jf[i], "viscous", p, 0.0), number_or(jf[i], "coulomb", p, 0.0),
                          number_or(jf[i], "smoothing_eps", p, 0.05)});
    }
  } else {
    friction.assign(joints.size(), FrictionParams{});
  }

  return RobotModel::create(name, joints, links, limits, friction, ee, gravity, nominal);
}

RobotModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
  return model_from_json(j);
}

void save_model(const RobotModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << model_to_json(model).dump(2) << "\n";
}

RobotModel resolve_model(const std::string& preset_or_path) {
  for (const auto& n : builtin_model_names()) {
    if (n == preset_or_path) return builtin_model(n);
  }
  return load_model(preset_or_path);
}

}  // namespace paydiff
