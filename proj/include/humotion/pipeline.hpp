#pragma once

#include <string>
#include <vector>

#include "humotion/dataset.hpp"
#include "humotion/policy.hpp"
#include "humotion/retarget.hpp"
#include "humotion/skeleton.hpp"

namespace humotion {

/// One step of the bi-level closed loop: generate an action from the current
/// robot state, retarget it to joints, and read the executed state back
/// through FK.
struct ClosedLoopStep {
  KeypointFrame state;      // s_t, from robot FK
  KeypointFrame generated;  // a_t, policy output
  IkResult ik;
  KeypointFrame next_state;  // robot FK keypoints of ik.q
};

struct ClosedLoopResult {
  std::vector<ClosedLoopStep> steps;
};

/// Runs generate -> retarget -> FK state feedback over a goal sequence. The
/// executed robot state, not the generated frame, is what the next generation
/// call observes.
inline ClosedLoopResult run_closed_loop(const RobotSpec& spec, const PolicyModel& model,
                                        const std::vector<GoalSet>& goals,
                                        const std::string& situation, const IkConfig& ik_config,
                                        const JointConfig* initial_q = nullptr) {
  model.require_initialized();
  ClosedLoopResult result;
  result.steps.reserve(goals.size());
  JointConfig q = initial_q ? *initial_q : zero_config(spec);
  KeypointFrame state = robot_keypoint_frame(spec, q);
  const IkResult* previous = nullptr;
  for (const GoalSet& goal : goals) {
    ClosedLoopStep step;
    step.state = state;
    step.generated = predict(model, state, goal, situation);
    step.ik = solve_pose(spec, step.generated, previous, ik_config);
    step.next_state = robot_keypoint_frame(spec, step.ik.q);
    state = step.next_state;
    result.steps.push_back(std::move(step));
    previous = &result.steps.back().ik;
  }
  return result;
}

/// The generated action frames of a closed-loop run as a motion sequence.
inline MotionSequence generated_motion(const ClosedLoopResult& result, double fps,
                                       const std::string& annotation) {
  MotionSequence m;
  m.fps = fps;
  m.annotation = annotation;
  for (const ClosedLoopStep& s : result.steps) m.frames.push_back(s.generated);
  return m;
}

/// The executed robot keypoint states of a closed-loop run.
inline MotionSequence executed_motion(const ClosedLoopResult& result, double fps,
                                      const std::string& annotation) {
  MotionSequence m;
  m.fps = fps;
  m.annotation = annotation;
  for (const ClosedLoopStep& s : result.steps) m.frames.push_back(s.next_state);
  return m;
}

}  // namespace humotion
