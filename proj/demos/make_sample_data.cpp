// Generates the sample human motions shipped under data/motions/. Each motion
// is a smooth joint-space trajectory of a human-proportioned upper-body chain.
//
//   make_sample_data <output-dir>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "humotion/humotion.hpp"

using namespace humotion;

namespace {

RobotSpec human_chain() {
  auto pose = [](double x, double y, double z) {
    return Pose6D(Eigen::Vector3d(x, y, z), UnitQuaternion::identity());
  };
  std::vector<RobotJoint> joints;
  auto add = [&](const std::string& n, const std::string& parent, const Pose6D& offset,
                 const Eigen::Vector3d& axis, double lo, double hi) {
    joints.push_back(RobotJoint{n, parent, offset, axis, lo, hi});
  };
  add("waist_yaw", "root", pose(0, 0, 0.13), {0, 0, 1}, -1.0, 1.0);
  add("chest_pitch", "waist_yaw", pose(0, 0, 0.17), {0, 1, 0}, -0.6, 0.6);
  add("neck_yaw", "chest_pitch", pose(0, 0, 0.26), {0, 0, 1}, -1.2, 1.2);
  add("head_pitch", "neck_yaw", pose(0, 0, 0.13), {0, 1, 0}, -0.8, 0.8);
  for (const auto& [side, sgn] : {std::pair<std::string, double>{"l", 1.0}, {"r", -1.0}}) {
    add(side + "_shoulder_pitch", "chest_pitch", pose(0, sgn * 0.19, 0.02), {1, 0, 0}, -1.5, 1.5);
    add(side + "_shoulder_roll", side + "_shoulder_pitch", pose(0, 0, 0), {0, 0, 1}, -1.3, 1.3);
    add(side + "_shoulder_yaw", side + "_shoulder_roll", pose(0, 0, 0), {0, 1, 0}, -1.4, 1.4);
    add(side + "_elbow", side + "_shoulder_yaw", pose(0, sgn * 0.28, 0), {0, 0, 1},
        sgn > 0 ? 0.0 : -2.4, sgn > 0 ? 2.4 : 0.0);
    add(side + "_wrist_yaw", side + "_elbow", pose(0, sgn * 0.25, 0), {0, 1, 0}, -2.0, 2.0);
    add(side + "_wrist_pitch", side + "_wrist_yaw", pose(0, 0, 0), {1, 0, 0}, -1.3, 1.3);
    add(side + "_wrist_roll", side + "_wrist_pitch", pose(0, 0, 0), {0, 0, 1}, -1.3, 1.3);
  }
  std::map<KeypointId, std::string> kp{
      {KeypointId::kPelvis, "root"},         {KeypointId::kSpine, "waist_yaw"},
      {KeypointId::kChest, "chest_pitch"},   {KeypointId::kNeck, "neck_yaw"},
      {KeypointId::kHead, "head_pitch"},     {KeypointId::kLShoulder, "l_shoulder_yaw"},
      {KeypointId::kLElbow, "l_elbow"},      {KeypointId::kLWrist, "l_wrist_roll"},
      {KeypointId::kRShoulder, "r_shoulder_yaw"}, {KeypointId::kRElbow, "r_elbow"},
      {KeypointId::kRWrist, "r_wrist_roll"}};
  std::vector<std::string> arm_joints;
  for (const char* side : {"l", "r"}) {
    for (const char* j : {"shoulder_pitch", "shoulder_roll", "shoulder_yaw", "elbow",
                          "wrist_yaw", "wrist_pitch", "wrist_roll"}) {
      arm_joints.push_back(std::string(side) + "_" + j);
    }
  }
  return RobotSpec("human", std::move(joints), std::move(kp),
                   {"waist_yaw", "chest_pitch", "neck_yaw", "head_pitch"}, std::move(arm_joints),
                   EndEffectorFrames{"head_pitch", "l_wrist_roll", "r_wrist_roll"});
}

MotionSequence sample_motion(const RobotSpec& human,
                             const std::map<std::string, std::pair<double, double>>& waves,
                             int n_frames, double fps, const std::string& annotation) {
  MotionSequence motion;
  motion.fps = fps;
  motion.annotation = annotation;
  for (int f = 0; f < n_frames; ++f) {
    const double t = f / fps;
    JointConfig q = zero_config(human);
    for (const auto& [joint, wave] : waves) {
      const RobotJoint& j = human.joint(joint);
      q[joint] = std::clamp(wave.first * std::sin(wave.second * t), j.lower_limit, j.upper_limit);
    }
    motion.frames.push_back(robot_keypoint_frame(human, q));
  }
  return motion;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "data/motions";
  std::filesystem::create_directories(out_dir);
  const RobotSpec human = human_chain();

  const MotionSequence wave = sample_motion(
      human,
      {{"r_shoulder_roll", {0.9, 2.2}}, {"r_elbow", {-0.7, 2.2}}, {"r_wrist_pitch", {0.4, 4.4}}},
      40, 20.0, "a person waves hello with the right hand raised");
  save_motion(wave, out_dir + "/wave_right_hand.json");

  const MotionSequence reach = sample_motion(
      human,
      {{"l_shoulder_roll", {-0.8, 1.4}}, {"l_elbow", {0.9, 1.4}},
       {"waist_yaw", {0.3, 1.4}},       {"head_pitch", {0.2, 1.4}}},
      40, 20.0, "a person leans and reaches forward with the left hand to grab a cup");
  save_motion(reach, out_dir + "/reach_left_hand.json");

  std::cout << "wrote " << out_dir << "/wave_right_hand.json and " << out_dir
            << "/reach_left_hand.json\n";
  return 0;
}
