#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "humotion/geom.hpp"

namespace humotion {

using Json = nlohmann::json;

namespace json_util {

inline Json vec3_to_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Eigen::Vector3d vec3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() ||
      !j[2].is_number()) {
    throw ParseError(where + ": expected array of 3 numbers");
  }
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

/// Quaternions are serialized in (w, x, y, z) order everywhere.
inline Json quat_to_json(const UnitQuaternion& q) {
  return Json::array({q.w(), q.x(), q.y(), q.z()});
}

inline UnitQuaternion quat_from_json(const Json& j, const std::string& where,
                                     double norm_tolerance = 1e-6) {
  if (!j.is_array() || j.size() != 4) {
    throw ParseError(where + ": expected quaternion array [w,x,y,z]");
  }
  for (const auto& c : j) {
    if (!c.is_number()) throw ParseError(where + ": non-numeric quaternion component");
  }
  const double w = j[0].get<double>(), x = j[1].get<double>(), y = j[2].get<double>(),
               z = j[3].get<double>();
  const double norm = std::sqrt(w * w + x * x + y * y + z * z);
  if (std::abs(norm - 1.0) > norm_tolerance) {
    throw ValidationError(where + ": quaternion norm " + std::to_string(norm) + " is not 1");
  }
  return UnitQuaternion(w, x, y, z);
}

inline Json pose_to_json(const Pose6D& pose) {
  return Json{{"p", vec3_to_json(pose.position)}, {"q", quat_to_json(pose.orientation)}};
}

inline Pose6D pose_from_json(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("p") || !j.contains("q")) {
    throw ParseError(where + ": expected pose object with 'p' and 'q'");
  }
  return Pose6D(vec3_from_json(j.at("p"), where + ".p"), quat_from_json(j.at("q"), where + ".q"));
}

}  // namespace json_util
}  // namespace humotion
