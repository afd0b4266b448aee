#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "humotion/json_util.hpp"
#include "humotion/skeleton.hpp"

namespace humotion {

/// A recorded motion: ordered keypoint frames plus the situational annotation
/// text. `source_spec` names the robot whose bone lengths the motion was
/// rescaled to, when it came out of augmentation.
struct MotionSequence {
  double fps = 30.0;
  std::vector<KeypointFrame> frames;
  std::string annotation;
  std::optional<std::string> source_spec;
};

/// Target poses of the three end-effectors: head and both wrists.
struct GoalSet {
  Pose6D head;
  Pose6D l_wrist;
  Pose6D r_wrist;

  static GoalSet from_frame(const KeypointFrame& frame) {
    return GoalSet{frame[KeypointId::kHead], frame[KeypointId::kLWrist],
                   frame[KeypointId::kRWrist]};
  }
};

/// One (s, g, l, a) training record. `g` is always the end-effector subset of
/// `a`; `horizon_k` is the frame gap between s and a (metadata only, never a
/// policy input).
struct TrainingTuple {
  KeypointFrame s;
  GoalSet g;
  std::string l;
  KeypointFrame a;
  int horizon_k = 1;
};

/// Keypoints to blank out of the state during evaluation. Only the state is
/// ever masked; goals stay intact.
struct ObservationMask {
  std::set<KeypointId> hidden;
  std::string label = "None";

  static ObservationMask none() { return ObservationMask{}; }

  static ObservationMask of(std::set<KeypointId> ids) {
    ObservationMask m;
    m.hidden = std::move(ids);
    if (m.hidden.empty()) return m;
    m.label.clear();
    for (KeypointId id : m.hidden) {
      if (!m.label.empty()) m.label += "+";
      m.label += keypoint_name(id);
    }
    return m;
  }
};

/// State with per-keypoint presence flags. Masked keypoints carry the sentinel
/// pose (zero position, identity orientation) and presence=false.
struct MaskedKeypointFrame {
  KeypointFrame poses;
  std::array<bool, kNumKeypoints> present;

  MaskedKeypointFrame() { present.fill(true); }
  MaskedKeypointFrame(const KeypointFrame& frame) : poses(frame) { present.fill(true); }
};

inline MaskedKeypointFrame apply_mask(const KeypointFrame& s, const ObservationMask& mask) {
  MaskedKeypointFrame out(s);
  for (KeypointId id : mask.hidden) {
    out.poses[id] = Pose6D::identity();
    out.present[static_cast<std::size_t>(id)] = false;
  }
  return out;
}

/// Successive-frame tuples: s = frame t, a = frame t+1, g = end-effectors of
/// a, horizon 1. A single-frame motion yields no tuples and sets the warning
/// flag when one is supplied.
inline std::vector<TrainingTuple> build_tuples(const MotionSequence& motion,
                                               bool* single_frame_warning = nullptr) {
  if (single_frame_warning) *single_frame_warning = motion.frames.size() < 2;
  std::vector<TrainingTuple> out;
  if (motion.frames.size() < 2) return out;
  out.reserve(motion.frames.size() - 1);
  for (std::size_t t = 0; t + 1 < motion.frames.size(); ++t) {
    const KeypointFrame& a = motion.frames[t + 1];
    out.push_back(TrainingTuple{motion.frames[t], GoalSet::from_frame(a), motion.annotation, a, 1});
  }
  return out;
}

/// Hindsight goal expansion: every future frame within `window_h` of t becomes
/// a goal/action for state t, clamped at the trajectory end. window_h = 1
/// reproduces build_tuples exactly.
inline std::vector<TrainingTuple> hindsight_expand(const MotionSequence& motion, int window_h) {
  if (window_h < 1) throw std::out_of_range("hindsight_expand: window_h must be >= 1");
  std::vector<TrainingTuple> out;
  if (motion.frames.size() < 2) return out;
  const int last = static_cast<int>(motion.frames.size()) - 1;
  for (int t = 0; t < last; ++t) {
    const int max_k = std::min(window_h, last - t);
    for (int k = 1; k <= max_k; ++k) {
      const KeypointFrame& a = motion.frames[t + k];
      out.push_back(
          TrainingTuple{motion.frames[t], GoalSet::from_frame(a), motion.annotation, a, k});
    }
  }
  return out;
}

// --- motion JSON format ----------------------------------------------------
//
// {"fps": number, "annotation": string, "source_spec": string|null,
//  "joint_order": [11 canonical names],
//  "frames": [[{"p":[x,y,z],"q":[w,x,y,z]} x11], ...]}

inline Json motion_to_json(const MotionSequence& motion) {
  Json joint_order = Json::array();
  for (KeypointId id : kAllKeypoints) joint_order.push_back(keypoint_name(id));
  Json frames = Json::array();
  for (const KeypointFrame& frame : motion.frames) {
    Json jf = Json::array();
    for (KeypointId id : kAllKeypoints) jf.push_back(json_util::pose_to_json(frame[id]));
    frames.push_back(std::move(jf));
  }
  Json j{{"fps", motion.fps},
         {"annotation", motion.annotation},
         {"source_spec", motion.source_spec ? Json(*motion.source_spec) : Json(nullptr)},
         {"joint_order", std::move(joint_order)},
         {"frames", std::move(frames)}};
  return j;
}

inline MotionSequence motion_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("motion: expected a JSON object");
  for (const char* key : {"fps", "annotation", "joint_order", "frames"}) {
    if (!j.contains(key)) throw ParseError(std::string("motion: missing field '") + key + "'");
  }
  MotionSequence motion;
  if (!j.at("fps").is_number() || j.at("fps").get<double>() <= 0.0) {
    throw ValidationError("motion: fps must be a positive number");
  }
  motion.fps = j.at("fps").get<double>();
  motion.annotation = j.at("annotation").get<std::string>();
  if (j.contains("source_spec") && !j.at("source_spec").is_null()) {
    motion.source_spec = j.at("source_spec").get<std::string>();
  }
  const Json& order = j.at("joint_order");
  if (!order.is_array() || order.size() != kNumKeypoints) {
    throw ParseError("motion: joint_order must list the 11 canonical keypoints");
  }
  std::array<KeypointId, kNumKeypoints> ids;
  std::set<KeypointId> seen;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    auto id = keypoint_from_name(order[i].get<std::string>());
    if (!id || !seen.insert(*id).second) {
      throw ParseError("motion: joint_order entry " + std::to_string(i) +
                       " is not a distinct canonical keypoint");
    }
    ids[i] = *id;
  }
  const Json& frames = j.at("frames");
  if (!frames.is_array()) throw ParseError("motion: frames must be an array");
  motion.frames.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string where = "motion frame " + std::to_string(f);
    if (!frames[f].is_array() || frames[f].size() != kNumKeypoints) {
      throw ParseError(where + ": expected 11 poses");
    }
    KeypointFrame frame;
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      frame[ids[i]] = json_util::pose_from_json(
          frames[f][i], where + " keypoint '" + keypoint_name(ids[i]) + "'");
    }
    motion.frames.push_back(frame);
  }
  return motion;
}

inline MotionSequence load_motion(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open motion file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("motion '" + path + "': " + e.what());
  }
  return motion_from_json(j);
}

inline void save_motion(const MotionSequence& motion, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open motion file for writing: " + path);
  out << motion_to_json(motion).dump();
  out << "\n";
}

// --- tuple JSON Lines format -------------------------------------------------
//
// One object per line:
// {"s": {keypoint: pose, ...}, "g": {"head":.., "l_wrist":.., "r_wrist":..},
//  "l": string, "a": {keypoint: pose, ...}, "k": int}

inline Json keyed_frame_to_json(const KeypointFrame& frame) {
  Json j = Json::object();
  for (KeypointId id : kAllKeypoints) j[keypoint_name(id)] = json_util::pose_to_json(frame[id]);
  return j;
}

inline KeypointFrame keyed_frame_from_json(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected keyed frame object");
  KeypointFrame frame;
  for (KeypointId id : kAllKeypoints) {
    const char* name = keypoint_name(id);
    if (!j.contains(name)) throw ParseError(where + ": missing keypoint '" + name + "'");
    frame[id] = json_util::pose_from_json(j.at(name), where + "." + name);
  }
  return frame;
}

inline Json tuple_to_json(const TrainingTuple& tuple) {
  Json g{{"head", json_util::pose_to_json(tuple.g.head)},
         {"l_wrist", json_util::pose_to_json(tuple.g.l_wrist)},
         {"r_wrist", json_util::pose_to_json(tuple.g.r_wrist)}};
  return Json{{"s", keyed_frame_to_json(tuple.s)},
              {"g", std::move(g)},
              {"l", tuple.l},
              {"a", keyed_frame_to_json(tuple.a)},
              {"k", tuple.horizon_k}};
}

inline TrainingTuple tuple_from_json(const Json& j, const std::string& where) {
  for (const char* key : {"s", "g", "l", "a", "k"}) {
    if (!j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  }
  TrainingTuple t;
  t.s = keyed_frame_from_json(j.at("s"), where + ".s");
  t.a = keyed_frame_from_json(j.at("a"), where + ".a");
  const Json& g = j.at("g");
  t.g.head = json_util::pose_from_json(g.at("head"), where + ".g.head");
  t.g.l_wrist = json_util::pose_from_json(g.at("l_wrist"), where + ".g.l_wrist");
  t.g.r_wrist = json_util::pose_from_json(g.at("r_wrist"), where + ".g.r_wrist");
  t.l = j.at("l").get<std::string>();
  t.horizon_k = j.at("k").get<int>();
  if (t.horizon_k < 1) throw ValidationError(where + ": k must be >= 1");
  return t;
}

inline void save_tuples(const std::vector<TrainingTuple>& tuples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open tuple file for writing: " + path);
  for (const TrainingTuple& t : tuples) out << tuple_to_json(t).dump() << "\n";
}

inline std::vector<TrainingTuple> load_tuples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tuple file: " + path);
  std::vector<TrainingTuple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("tuple file line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(tuple_from_json(j, "tuple line " + std::to_string(lineno)));
  }
  return out;
}

// --- rule-based annotation stub ----------------------------------------------

/// Fixed templates keyed by the dominant moving end-effector. Stand-in for
/// offline annotation of situational context; deterministic by construction.
struct AnnotationRules {
  std::string head_template = "a person tilts and turns the head while the arms stay at rest";
  std::string left_template = "a person reaches out and gestures with the left hand";
  std::string right_template = "a person reaches out and gestures with the right hand";
  std::string still_template = "a person holds the current pose without moving";
};

/// Annotates from motion statistics (dominant moving end-effector). A motion
/// that already carries an annotation is returned unchanged.
inline MotionSequence stub_annotate(const MotionSequence& motion,
                                    const AnnotationRules& rules = AnnotationRules{}) {
  if (!motion.annotation.empty()) return motion;
  MotionSequence out = motion;
  double head = 0.0, left = 0.0, right = 0.0;
  for (std::size_t t = 0; t + 1 < motion.frames.size(); ++t) {
    const KeypointFrame& a = motion.frames[t];
    const KeypointFrame& b = motion.frames[t + 1];
    head += (b[KeypointId::kHead].position - a[KeypointId::kHead].position).norm();
    left += (b[KeypointId::kLWrist].position - a[KeypointId::kLWrist].position).norm();
    right += (b[KeypointId::kRWrist].position - a[KeypointId::kRWrist].position).norm();
  }
  const double biggest = std::max({head, left, right});
  if (biggest < 1e-9) {
    out.annotation = rules.still_template;
  } else if (biggest == right) {
    out.annotation = rules.right_template;
  } else if (biggest == left) {
    out.annotation = rules.left_template;
  } else {
    out.annotation = rules.head_template;
  }
  return out;
}

}  // namespace humotion
