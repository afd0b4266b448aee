#pragma once

#include <fstream>
#include <string>

#include "humotion/json_util.hpp"
#include "humotion/skeleton.hpp"

namespace humotion {

/// Parses a robot spec from its JSON form. Lengths in meters, angles in
/// radians, quaternions (w,x,y,z). Prismatic or otherwise non-revolute joints
/// are not representable: every joint is a rotation about `axis`.
inline RobotSpec robot_spec_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("robot spec: expected a JSON object");
  for (const char* key : {"name", "joints", "keypoint_map", "torso_joints", "arm_joints",
                          "end_effectors"}) {
    if (!j.contains(key)) throw ParseError(std::string("robot spec: missing field '") + key + "'");
  }
  std::vector<RobotJoint> joints;
  for (std::size_t i = 0; i < j.at("joints").size(); ++i) {
    const Json& jj = j.at("joints")[i];
    const std::string where = "robot spec joint " + std::to_string(i);
    RobotJoint joint;
    joint.name = jj.at("name").get<std::string>();
    joint.parent = jj.value("parent", std::string(kRootFrame));
    joint.offset = json_util::pose_from_json(jj.at("offset"), where + ".offset");
    joint.axis = json_util::vec3_from_json(jj.at("axis"), where + ".axis");
    const Json& lim = jj.at("limits");
    if (!lim.is_array() || lim.size() != 2) {
      throw ParseError(where + ".limits: expected [lo, hi]");
    }
    joint.lower_limit = lim[0].get<double>();
    joint.upper_limit = lim[1].get<double>();
    joints.push_back(std::move(joint));
  }
  std::map<KeypointId, std::string> keypoint_map;
  for (const auto& [key, value] : j.at("keypoint_map").items()) {
    auto id = keypoint_from_name(key);
    if (!id) throw ParseError("robot spec keypoint_map: unknown keypoint '" + key + "'");
    keypoint_map[*id] = value.get<std::string>();
  }
  const Json& ee = j.at("end_effectors");
  EndEffectorFrames effectors{ee.at("head").get<std::string>(),
                              ee.at("l_wrist").get<std::string>(),
                              ee.at("r_wrist").get<std::string>()};
  return RobotSpec(j.at("name").get<std::string>(), std::move(joints), std::move(keypoint_map),
                   j.at("torso_joints").get<std::vector<std::string>>(),
                   j.at("arm_joints").get<std::vector<std::string>>(), std::move(effectors));
}

inline RobotSpec load_robot_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open robot spec file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("robot spec '" + path + "': " + e.what());
  }
  return robot_spec_from_json(j);
}

}  // namespace humotion
