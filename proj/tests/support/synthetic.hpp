#pragma once

// Synthetic corpora shared by the unit and acceptance suites: a human-sized
// skeleton spec, smooth sinusoidal upper-body motions with a gently varying
// spine chain, and a two-context corpus where the annotation disambiguates
// otherwise identical (state, goal) pairs.

#include <cmath>
#include <string>
#include <vector>

#include "humotion/augment.hpp"
#include "humotion/common.hpp"
#include "humotion/dataset.hpp"
#include "humotion/robot_io.hpp"
#include "humotion/skeleton.hpp"

namespace humotion::testsupport {

struct ChainDims {
  double d1, d2, d3, d4;  // pelvis->spine->chest->neck->head offsets
  double sy, sz;          // chest->shoulder offset
  double ua, fa;          // upper arm, forearm
};

/// Builds an upper-body spec with the standard joint layout used by the
/// shipped robot files.
inline RobotSpec make_chain_spec(const std::string& name, const ChainDims& dims) {
  auto pose = [](double x, double y, double z) {
    return Pose6D(Eigen::Vector3d(x, y, z), UnitQuaternion::identity());
  };
  std::vector<RobotJoint> joints;
  auto add = [&](const std::string& n, const std::string& parent, const Pose6D& offset,
                 const Eigen::Vector3d& axis, double lo, double hi) {
    joints.push_back(RobotJoint{n, parent, offset, axis, lo, hi});
  };
  add("waist_yaw", "root", pose(0, 0, dims.d1), {0, 0, 1}, -1.0, 1.0);
  add("chest_pitch", "waist_yaw", pose(0, 0, dims.d2), {0, 1, 0}, -0.6, 0.6);
  add("neck_yaw", "chest_pitch", pose(0, 0, dims.d3), {0, 0, 1}, -1.2, 1.2);
  add("head_pitch", "neck_yaw", pose(0, 0, dims.d4), {0, 1, 0}, -0.8, 0.8);
  for (const auto& [side, sgn] : {std::pair<std::string, double>{"l", 1.0}, {"r", -1.0}}) {
    // 7-DOF arm: spherical shoulder, one elbow, spherical wrist; limits stay
    // inside the gimbal range of each triplet
    add(side + "_shoulder_pitch", "chest_pitch", pose(0, sgn * dims.sy, dims.sz), {1, 0, 0},
        -1.5, 1.5);
    add(side + "_shoulder_roll", side + "_shoulder_pitch", pose(0, 0, 0), {0, 0, 1}, -1.3, 1.3);
    add(side + "_shoulder_yaw", side + "_shoulder_roll", pose(0, 0, 0), {0, 1, 0}, -1.4, 1.4);
    add(side + "_elbow", side + "_shoulder_yaw", pose(0, sgn * dims.ua, 0), {0, 0, 1},
        sgn > 0 ? 0.0 : -2.4, sgn > 0 ? 2.4 : 0.0);
    add(side + "_wrist_yaw", side + "_elbow", pose(0, sgn * dims.fa, 0), {0, 1, 0}, -2.0, 2.0);
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
  return RobotSpec(name, std::move(joints), std::move(kp),
                   {"waist_yaw", "chest_pitch", "neck_yaw", "head_pitch"}, std::move(arm_joints),
                   EndEffectorFrames{"head_pitch", "l_wrist_roll", "r_wrist_roll"});
}

/// Human-proportioned skeleton, deliberately distinct from all shipped robots.
inline const RobotSpec& human_spec() {
  static const RobotSpec spec =
      make_chain_spec("human", ChainDims{0.13, 0.17, 0.26, 0.13, 0.19, 0.02, 0.28, 0.25});
  return spec;
}

inline JointConfig random_config(const RobotSpec& spec, Rng& rng, double margin = 0.0) {
  JointConfig q;
  for (const RobotJoint& j : spec.joints()) {
    const double lo = j.lower_limit + margin * (j.upper_limit - j.lower_limit);
    const double hi = j.upper_limit - margin * (j.upper_limit - j.lower_limit);
    q[j.name] = rng.uniform(lo, hi);
  }
  return q;
}

/// Smooth sinusoidal joint trajectories: one frequency/phase per motion, per
/// joint amplitude and phase offset, all clipped inside the limits.
struct MotionParams {
  double frequency;  // rad/s
  double phase;
  std::map<std::string, double> center;
  std::map<std::string, double> amplitude;
  std::map<std::string, double> offset;
};

inline MotionParams random_motion_params(const RobotSpec& spec, Rng& rng) {
  MotionParams p;
  p.frequency = rng.uniform(0.8, 2.4);
  p.phase = rng.uniform(0.0, 6.283185307179586);
  for (const RobotJoint& j : spec.joints()) {
    const double mid = 0.5 * (j.lower_limit + j.upper_limit);
    const double half = 0.5 * (j.upper_limit - j.lower_limit);
    const double amp = half * rng.uniform(0.15, 0.55);
    p.center[j.name] = mid + rng.uniform(-0.3, 0.3) * (half - amp);
    p.amplitude[j.name] = amp;
    p.offset[j.name] = rng.uniform(0.0, 6.283185307179586);
  }
  return p;
}

inline JointConfig config_at(const RobotSpec& spec, const MotionParams& p, double t) {
  JointConfig q;
  for (const RobotJoint& j : spec.joints()) {
    const double v = p.center.at(j.name) +
                     p.amplitude.at(j.name) *
                         std::sin(p.frequency * t + p.phase + p.offset.at(j.name));
    q[j.name] = std::clamp(v, j.lower_limit, j.upper_limit);
  }
  return q;
}

/// A human motion: FK frames of a sinusoidal trajectory, with the floating
/// spine-chain bones gently stretched over time so their lengths genuinely
/// vary (the robot chain itself is rigid).
inline MotionSequence make_human_motion(Rng& rng, int n_frames, double fps,
                                        double spine_wobble = 0.04) {
  const RobotSpec& human = human_spec();
  const SkeletonTopology& topo = SkeletonTopology::canonical();
  const MotionParams params = random_motion_params(human, rng);
  const std::map<BonePair, double> nominal =
      bone_lengths(robot_keypoint_frame(human, zero_config(human)), topo);
  const double wobble_phase = rng.uniform(0.0, 6.283185307179586);
  const double wobble_freq = rng.uniform(0.6, 1.8);

  MotionSequence motion;
  motion.fps = fps;
  for (int f = 0; f < n_frames; ++f) {
    const double t = static_cast<double>(f) / fps;
    KeypointFrame frame = robot_keypoint_frame(human, config_at(human, params, t));
    if (spine_wobble > 0.0) {
      std::map<BonePair, double> targets = nominal;
      int k = 0;
      for (const Bone& b : topo.bones()) {
        if (b.cls == BoneClass::kFloating) {
          targets[{b.parent, b.child}] *=
              1.0 + spine_wobble * std::sin(wobble_freq * t + wobble_phase + 0.7 * k);
        }
        ++k;
      }
      frame = bone_scale_frame(frame, topo, BoneLengthTable(targets, topo));
    }
    motion.frames.push_back(frame);
  }
  return stub_annotate(motion);
}

inline std::vector<MotionSequence> make_human_corpus(Rng& rng, int n_motions, int n_frames,
                                                     double fps) {
  std::vector<MotionSequence> corpus;
  corpus.reserve(static_cast<std::size_t>(n_motions));
  for (int i = 0; i < n_motions; ++i) {
    corpus.push_back(make_human_motion(rng, n_frames, fps));
  }
  return corpus;
}

/// Two-context tuples: identical (s, g) pairs whose action differs only in
/// the elbow placement, selected by the annotation. The action is otherwise a
/// deterministic smooth function of (s, g): torso and shoulders are held, the
/// end-effectors move to the goal, and each elbow sits midway between its
/// shoulder and wrist, raised or lowered by the context.
inline constexpr const char* kContextOpen = "hugging a friend with open raised arms";
inline constexpr const char* kContextGuard = "boxing with a friend in a guarded stance";

inline std::vector<TrainingTuple> make_two_context_tuples(Rng& rng, int n_pairs,
                                                          double elbow_shift = 0.12) {
  const RobotSpec& human = human_spec();
  std::vector<TrainingTuple> tuples;
  tuples.reserve(2 * static_cast<std::size_t>(n_pairs));
  for (int i = 0; i < n_pairs; ++i) {
    const KeypointFrame s = robot_keypoint_frame(human, random_config(human, rng, 0.1));
    const KeypointFrame reach = robot_keypoint_frame(human, random_config(human, rng, 0.1));
    for (int c = 0; c < 2; ++c) {
      const double dz = (c == 0) ? elbow_shift : -elbow_shift;
      KeypointFrame a = s;
      a[KeypointId::kHead] = reach[KeypointId::kHead];
      a[KeypointId::kLWrist] = reach[KeypointId::kLWrist];
      a[KeypointId::kRWrist] = reach[KeypointId::kRWrist];
      a[KeypointId::kLElbow].position =
          0.5 * (s[KeypointId::kLShoulder].position + a[KeypointId::kLWrist].position) +
          Eigen::Vector3d(0, 0, dz);
      a[KeypointId::kRElbow].position =
          0.5 * (s[KeypointId::kRShoulder].position + a[KeypointId::kRWrist].position) +
          Eigen::Vector3d(0, 0, dz);
      tuples.push_back(
          TrainingTuple{s, GoalSet::from_frame(a), c == 0 ? kContextOpen : kContextGuard, a, 1});
    }
  }
  return tuples;
}

}  // namespace humotion::testsupport
