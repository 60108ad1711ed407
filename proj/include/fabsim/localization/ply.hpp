#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "fabsim/errors.hpp"
#include "fabsim/localization/icp.hpp"

namespace fabsim::loc {

// ASCII PLY with double-precision vertex coordinates (round-trips exactly).
inline void write_ply(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw ConfigurationError("cannot write PLY file: " + path);
  out.precision(17);
  out << "ply\nformat ascii 1.0\n";
  out << "comment frame " << cloud.frame << "\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "end_header\n";
  for (const auto& p : cloud.points) out << p.x() << " " << p.y() << " " << p.z() << "\n";
}

inline PointCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open PLY file: " + path);
  std::string line;
  std::size_t count = 0;
  PointCloud cloud;
  bool header_done = false;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw ConfigurationError("not a PLY file: " + path);
  }
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw ConfigurationError("only ASCII PLY is supported: " + path);
    } else if (tok == "comment") {
      std::string key;
      ss >> key;
      if (key == "frame") ss >> cloud.frame;
    } else if (tok == "element") {
      std::string kind;
      ss >> kind >> count;
      if (kind != "vertex") throw ConfigurationError("unsupported PLY element in " + path);
    } else if (tok == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw ConfigurationError("PLY header not terminated: " + path);
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    if (!(in >> p.x() >> p.y() >> p.z())) {
      throw ConfigurationError("PLY vertex data truncated: " + path);
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace fabsim::loc
