#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "fabsim/errors.hpp"
#include "fabsim/geometry.hpp"

namespace fabsim {

using Json = nlohmann::json;

inline Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigurationError("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void save_json_file(const std::string& path, const Json& j, int indent = 2) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write file: " + path);
  out << j.dump(indent) << "\n";
}

inline const Json& require_field(const Json& j, const std::string& key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigurationError(ctx + ": missing field '" + key + "'");
  return *it;
}

namespace geom {

inline Json to_json(const Pose3& p) {
  return Json{{"xyz", {p.t.x(), p.t.y(), p.t.z()}},
              {"quat_wxyz", {p.q.w(), p.q.x(), p.q.y(), p.q.z()}}};
}

inline Pose3 pose3_from_json(const Json& j) {
  Pose3 p;
  if (j.contains("xyz")) {
    const auto& v = j.at("xyz");
    p.t = Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
  }
  if (j.contains("quat_wxyz")) {
    const auto& v = j.at("quat_wxyz");
    p.q = Quat(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>(),
               v.at(3).get<double>())
              .normalized();
  } else if (j.contains("rpy")) {
    const auto& v = j.at("rpy");
    p = Pose3::from_xyz_rpy(p.t.x(), p.t.y(), p.t.z(), v.at(0).get<double>(),
                            v.at(1).get<double>(), v.at(2).get<double>());
  }
  return p;
}

inline Json to_json(const Pose2& p) { return Json{{"xy", {p.x, p.y}}, {"theta", p.theta}}; }

inline Pose2 pose2_from_json(const Json& j) {
  const auto& v = j.at("xy");
  return Pose2(v.at(0).get<double>(), v.at(1).get<double>(), j.at("theta").get<double>());
}

}  // namespace geom
}  // namespace fabsim
