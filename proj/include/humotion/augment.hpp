#pragma once

#include <map>
#include <string>
#include <vector>

#include "humotion/dataset.hpp"
#include "humotion/skeleton.hpp"

namespace humotion {

/// Target length per directed bone. Covers every bone of the topology it was
/// built for; all lengths strictly positive.
class BoneLengthTable {
 public:
  BoneLengthTable(std::map<BonePair, double> lengths, const SkeletonTopology& topology)
      : lengths_(std::move(lengths)) {
    for (const Bone& b : topology.bones()) {
      auto it = lengths_.find({b.parent, b.child});
      if (it == lengths_.end()) {
        throw std::invalid_argument(std::string("BoneLengthTable: missing bone ") +
                                    keypoint_name(b.parent) + "->" + keypoint_name(b.child));
      }
      if (!(it->second > 0.0)) {
        throw std::invalid_argument(std::string("BoneLengthTable: non-positive length for ") +
                                    keypoint_name(b.parent) + "->" + keypoint_name(b.child));
      }
    }
  }

  double at(KeypointId parent, KeypointId child) const {
    auto it = lengths_.find({parent, child});
    if (it == lengths_.end()) {
      throw std::invalid_argument(std::string("BoneLengthTable: no entry for ") +
                                  keypoint_name(parent) + "->" + keypoint_name(child));
    }
    return it->second;
  }

  const std::map<BonePair, double>& lengths() const { return lengths_; }

 private:
  std::map<BonePair, double> lengths_;
};

/// Rescales a keypoint frame onto target bone lengths: the pelvis pose is
/// copied, then each child is placed along the source bone's unit direction at
/// the target length. Orientations are copied unchanged (the operation is
/// position-only).
inline KeypointFrame bone_scale_frame(const KeypointFrame& frame, const SkeletonTopology& topology,
                                      const BoneLengthTable& targets) {
  KeypointFrame out = frame;  // copies all orientations and the pelvis pose
  for (const Bone& b : topology.bones()) {
    const Eigen::Vector3d dir = frame[b.child].position - frame[b.parent].position;
    const double norm = dir.norm();
    if (norm < 1e-12) {
      throw DegenerateInputError(std::string("bone_scale_frame: zero-length source bone ") +
                                 keypoint_name(b.parent) + "->" + keypoint_name(b.child));
    }
    out[b.child].position =
        out[b.parent].position + dir * (targets.at(b.parent, b.child) / norm);
  }
  return out;
}

/// Bone-length targets of a robot, measured on its zero-configuration keypoint
/// frame. Floating bones use the zero configuration as their nominal length.
inline BoneLengthTable robot_bone_targets(const RobotSpec& spec,
                                          const SkeletonTopology& topology =
                                              SkeletonTopology::canonical()) {
  const KeypointFrame home = robot_keypoint_frame(spec, zero_config(spec));
  return BoneLengthTable(bone_lengths(home, topology), topology);
}

/// Rescales every motion onto every robot spec. The output keeps the original
/// motions first, then one rescaled copy per (spec, motion) pair tagged with
/// the spec name.
inline std::vector<MotionSequence> augment_corpus(const std::vector<MotionSequence>& motions,
                                                  const std::vector<const RobotSpec*>& specs,
                                                  const SkeletonTopology& topology =
                                                      SkeletonTopology::canonical()) {
  std::vector<MotionSequence> corpus = motions;
  corpus.reserve(motions.size() * (1 + specs.size()));
  for (const RobotSpec* spec : specs) {
    const BoneLengthTable targets = robot_bone_targets(*spec, topology);
    for (const MotionSequence& motion : motions) {
      MotionSequence scaled = motion;
      scaled.source_spec = spec->name();
      for (std::size_t f = 0; f < motion.frames.size(); ++f) {
        try {
          scaled.frames[f] = bone_scale_frame(motion.frames[f], topology, targets);
        } catch (const DegenerateInputError& e) {
          throw DegenerateInputError("augment_corpus: frame " + std::to_string(f) + ": " +
                                     e.what());
        }
      }
      corpus.push_back(std::move(scaled));
    }
  }
  return corpus;
}

}  // namespace humotion
