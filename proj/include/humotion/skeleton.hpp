#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "humotion/geom.hpp"

namespace humotion {

/// The canonical 11-keypoint upper-body set. Wrists double as hand keypoints.
enum class KeypointId : int {
  kPelvis = 0,
  kSpine,
  kChest,
  kNeck,
  kHead,
  kLShoulder,
  kLElbow,
  kLWrist,
  kRShoulder,
  kRElbow,
  kRWrist,
};

inline constexpr int kNumKeypoints = 11;

inline constexpr std::array<KeypointId, kNumKeypoints> kAllKeypoints = {
    KeypointId::kPelvis,    KeypointId::kSpine,  KeypointId::kChest,  KeypointId::kNeck,
    KeypointId::kHead,      KeypointId::kLShoulder, KeypointId::kLElbow, KeypointId::kLWrist,
    KeypointId::kRShoulder, KeypointId::kRElbow, KeypointId::kRWrist,
};

inline const char* keypoint_name(KeypointId id) {
  static constexpr std::array<const char*, kNumKeypoints> names = {
      "pelvis", "spine",   "chest",   "neck",    "head",   "l_shoulder",
      "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"};
  return names[static_cast<std::size_t>(id)];
}

inline std::optional<KeypointId> keypoint_from_name(const std::string& name) {
  for (KeypointId id : kAllKeypoints) {
    if (name == keypoint_name(id)) return id;
  }
  return std::nullopt;
}

/// Complete 11-keypoint snapshot of 6D poses. Always holds all entries;
/// masked variants live in the dataset module.
class KeypointFrame {
 public:
  Pose6D& operator[](KeypointId id) { return poses_[static_cast<std::size_t>(id)]; }
  const Pose6D& operator[](KeypointId id) const { return poses_[static_cast<std::size_t>(id)]; }

  auto begin() { return poses_.begin(); }
  auto end() { return poses_.end(); }
  auto begin() const { return poses_.begin(); }
  auto end() const { return poses_.end(); }

 private:
  std::array<Pose6D, kNumKeypoints> poses_{};
};

enum class BoneClass { kFixed, kFloating };

struct Bone {
  KeypointId parent;
  KeypointId child;
  BoneClass cls;
};

using BonePair = std::pair<KeypointId, KeypointId>;

/// Directed bone tree over the 11 keypoints, rooted at the pelvis. Bones are
/// stored parent-before-child so a single pass visits parents first.
class SkeletonTopology {
 public:
  explicit SkeletonTopology(std::vector<Bone> bones) : bones_(std::move(bones)) {
    if (bones_.size() != kNumKeypoints - 1) {
      throw SpecError("SkeletonTopology: expected 10 bones");
    }
    std::set<KeypointId> reached = {KeypointId::kPelvis};
    for (const Bone& b : bones_) {
      if (!reached.count(b.parent)) {
        throw SpecError("SkeletonTopology: bone parent not yet reached (bones must be "
                        "listed parent-first and form a tree rooted at pelvis)");
      }
      if (reached.count(b.child)) {
        throw SpecError("SkeletonTopology: duplicate child keypoint");
      }
      reached.insert(b.child);
    }
    if (reached.size() != kNumKeypoints) {
      throw SpecError("SkeletonTopology: tree does not cover all keypoints");
    }
  }

  /// The canonical upper-body chain: floating spine chain, fixed limbs.
  static const SkeletonTopology& canonical() {
    static const SkeletonTopology topo(std::vector<Bone>{
        {KeypointId::kPelvis, KeypointId::kSpine, BoneClass::kFloating},
        {KeypointId::kSpine, KeypointId::kChest, BoneClass::kFloating},
        {KeypointId::kChest, KeypointId::kNeck, BoneClass::kFloating},
        {KeypointId::kNeck, KeypointId::kHead, BoneClass::kFloating},
        {KeypointId::kChest, KeypointId::kLShoulder, BoneClass::kFixed},
        {KeypointId::kLShoulder, KeypointId::kLElbow, BoneClass::kFixed},
        {KeypointId::kLElbow, KeypointId::kLWrist, BoneClass::kFixed},
        {KeypointId::kChest, KeypointId::kRShoulder, BoneClass::kFixed},
        {KeypointId::kRShoulder, KeypointId::kRElbow, BoneClass::kFixed},
        {KeypointId::kRElbow, KeypointId::kRWrist, BoneClass::kFixed},
    });
    return topo;
  }

  const std::vector<Bone>& bones() const { return bones_; }

 private:
  std::vector<Bone> bones_;
};

/// One revolute joint of a robot kinematic tree. The joint frame is the
/// parent frame composed with `offset`, then rotated by the joint angle about
/// `axis`.
struct RobotJoint {
  std::string name;
  std::string parent;  // another joint's name, or kRootFrame
  Pose6D offset;
  Eigen::Vector3d axis{0.0, 0.0, 1.0};
  double lower_limit = -3.141592653589793;
  double upper_limit = 3.141592653589793;
};

inline constexpr const char* kRootFrame = "root";

/// Joint name -> angle (radians). Limits are enforced by solvers, not here.
class JointConfig {
 public:
  JointConfig() = default;
  explicit JointConfig(std::map<std::string, double> values) : values_(std::move(values)) {}

  double& operator[](const std::string& name) { return values_[name]; }

  double at(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) {
      throw std::invalid_argument("JointConfig: missing joint value for '" + name + "'");
    }
    return it->second;
  }

  bool contains(const std::string& name) const { return values_.count(name) > 0; }
  const std::map<std::string, double>& values() const { return values_; }

 private:
  std::map<std::string, double> values_;
};

struct EndEffectorFrames {
  std::string head;
  std::string l_wrist;
  std::string r_wrist;
};

/// Robot kinematic tree with joint limits, torso/arm partitions and the
/// mapping from canonical keypoints to robot frames. Immutable after
/// construction; the constructor validates tree structure and coverage.
class RobotSpec {
 public:
  RobotSpec(std::string name, std::vector<RobotJoint> joints,
            std::map<KeypointId, std::string> keypoint_map, std::vector<std::string> torso_joints,
            std::vector<std::string> arm_joints, EndEffectorFrames end_effectors)
      : name_(std::move(name)),
        joints_(std::move(joints)),
        keypoint_map_(std::move(keypoint_map)),
        torso_joints_(std::move(torso_joints)),
        arm_joints_(std::move(arm_joints)),
        end_effectors_(std::move(end_effectors)) {
    validate();
  }

  const std::string& name() const { return name_; }
  const std::vector<RobotJoint>& joints() const { return joints_; }
  const std::vector<std::size_t>& traversal_order() const { return order_; }
  const std::map<KeypointId, std::string>& keypoint_map() const { return keypoint_map_; }
  const std::vector<std::string>& torso_joints() const { return torso_joints_; }
  const std::vector<std::string>& arm_joints() const { return arm_joints_; }
  const EndEffectorFrames& end_effectors() const { return end_effectors_; }

  const RobotJoint& joint(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw SpecError("RobotSpec: unknown joint '" + name + "'");
    }
    return joints_[it->second];
  }

  bool has_frame(const std::string& frame) const {
    return frame == kRootFrame || index_.count(frame) > 0;
  }

 private:
  void validate() {
    for (std::size_t i = 0; i < joints_.size(); ++i) {
      if (joints_[i].name == kRootFrame || joints_[i].name.empty()) {
        throw SpecError("RobotSpec: joint name '" + joints_[i].name + "' is reserved or empty");
      }
      if (!index_.emplace(joints_[i].name, i).second) {
        throw SpecError("RobotSpec: duplicate joint name '" + joints_[i].name + "'");
      }
      if (joints_[i].axis.norm() < 1e-9) {
        throw SpecError("RobotSpec: zero rotation axis on joint '" + joints_[i].name + "'");
      }
      if (!(joints_[i].lower_limit <= joints_[i].upper_limit)) {
        throw SpecError("RobotSpec: inverted limits on joint '" + joints_[i].name + "'");
      }
    }
    // Topological order; a leftover joint means a cycle or a missing parent.
    std::set<std::string> placed = {kRootFrame};
    std::vector<bool> done(joints_.size(), false);
    order_.clear();
    bool progress = true;
    while (order_.size() < joints_.size() && progress) {
      progress = false;
      for (std::size_t i = 0; i < joints_.size(); ++i) {
        if (done[i]) continue;
        const std::string& parent = joints_[i].parent.empty() ? kRootFrame : joints_[i].parent;
        if (placed.count(parent)) {
          order_.push_back(i);
          placed.insert(joints_[i].name);
          done[i] = true;
          progress = true;
        }
      }
    }
    if (order_.size() != joints_.size()) {
      throw SpecError("RobotSpec '" + name_ + "': joints do not form a tree (cycle or unknown parent)");
    }
    for (const std::string& j : torso_joints_) {
      if (!index_.count(j)) throw SpecError("RobotSpec: unknown torso joint '" + j + "'");
    }
    for (const std::string& j : arm_joints_) {
      if (!index_.count(j)) throw SpecError("RobotSpec: unknown arm joint '" + j + "'");
      for (const std::string& t : torso_joints_) {
        if (t == j) throw SpecError("RobotSpec: joint '" + j + "' in both torso and arm sets");
      }
    }
    for (KeypointId id : kAllKeypoints) {
      auto it = keypoint_map_.find(id);
      if (it == keypoint_map_.end()) {
        throw SpecError("RobotSpec '" + name_ + "': keypoint '" + keypoint_name(id) +
                        "' not mapped to a frame");
      }
      if (!has_frame(it->second)) {
        throw SpecError("RobotSpec: keypoint '" + std::string(keypoint_name(id)) +
                        "' mapped to unknown frame '" + it->second + "'");
      }
    }
    for (const std::string& f : {end_effectors_.head, end_effectors_.l_wrist, end_effectors_.r_wrist}) {
      if (!has_frame(f)) {
        throw SpecError("RobotSpec: end-effector frame '" + f + "' does not exist");
      }
    }
  }

  std::string name_;
  std::vector<RobotJoint> joints_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::size_t> order_;
  std::map<KeypointId, std::string> keypoint_map_;
  std::vector<std::string> torso_joints_;
  std::vector<std::string> arm_joints_;
  EndEffectorFrames end_effectors_;
};

/// Pose of every robot frame for configuration `q`: each joint contributes its
/// fixed offset followed by the rotation of q about its axis; the root frame
/// is the identity.
inline std::map<std::string, Pose6D> forward_kinematics(const RobotSpec& spec,
                                                        const JointConfig& q) {
  std::map<std::string, Pose6D> frames;
  frames[kRootFrame] = Pose6D::identity();
  for (std::size_t idx : spec.traversal_order()) {
    const RobotJoint& j = spec.joints()[idx];
    const double angle = q.at(j.name);  // throws invalid_argument when missing
    const std::string& parent = j.parent.empty() ? kRootFrame : j.parent;
    Pose6D rotated;
    rotated.orientation = UnitQuaternion::from_axis_angle(j.axis, angle);
    frames[j.name] = frames.at(parent) * j.offset * rotated;
  }
  return frames;
}

/// Euclidean length of every directed bone of `topology` in `frame`.
inline std::map<BonePair, double> bone_lengths(const KeypointFrame& frame,
                                               const SkeletonTopology& topology) {
  std::map<BonePair, double> out;
  for (const Bone& b : topology.bones()) {
    out[{b.parent, b.child}] = (frame[b.child].position - frame[b.parent].position).norm();
  }
  return out;
}

/// The 11 mapped keypoint poses of the robot at configuration `q`.
inline KeypointFrame robot_keypoint_frame(const RobotSpec& spec, const JointConfig& q) {
  const std::map<std::string, Pose6D> frames = forward_kinematics(spec, q);
  KeypointFrame out;
  for (KeypointId id : kAllKeypoints) {
    auto mapped = spec.keypoint_map().find(id);
    if (mapped == spec.keypoint_map().end() || !frames.count(mapped->second)) {
      throw SpecError("robot_keypoint_frame: keypoint '" + std::string(keypoint_name(id)) +
                      "' has no mapped frame");
    }
    out[id] = frames.at(mapped->second);
  }
  return out;
}

/// All-zero configuration covering every joint of `spec`.
inline JointConfig zero_config(const RobotSpec& spec) {
  JointConfig q;
  for (const RobotJoint& j : spec.joints()) {
    q[j.name] = 0.0;
  }
  return q;
}

/// Neutral configuration: every joint at the midpoint of its limits. Interior
/// by construction, which makes it a good solver seed.
inline JointConfig neutral_config(const RobotSpec& spec) {
  JointConfig q;
  for (const RobotJoint& j : spec.joints()) {
    q[j.name] = 0.5 * (j.lower_limit + j.upper_limit);
  }
  return q;
}

}  // namespace humotion
