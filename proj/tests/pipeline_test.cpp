#include <catch2/catch_amalgamated.hpp>

#include "humotion/pipeline.hpp"
#include "humotion/robot_io.hpp"
#include "support/synthetic.hpp"

using namespace humotion;

namespace {

PolicyModel small_model(std::uint64_t seed) {
  PolicyConfig c;
  c.text_dim = 32;
  c.proprio_dim = 32;
  c.proprio_hidden = 48;
  c.text_hidden = 48;
  c.trunk_hidden = 48;
  return PolicyModel::initialize(c, seed);
}

}  // namespace

TEST_CASE("closed loop feeds executed robot state back", "[pipeline]") {
  const RobotSpec spec =
      load_robot_spec(std::string(HUMOTION_DATA_DIR) + "/robots/compact_humanoid.json");
  const PolicyModel model = small_model(3);

  Rng rng(5);
  std::vector<GoalSet> goals;
  for (int i = 0; i < 4; ++i) {
    goals.push_back(
        GoalSet::from_frame(robot_keypoint_frame(spec, testsupport::random_config(spec, rng))));
  }
  const ClosedLoopResult result =
      run_closed_loop(spec, model, goals, "a person gestures", IkConfig{});
  REQUIRE(result.steps.size() == goals.size());

  // s_{t+1} is exactly the FK keypoint frame of the recorded q_t
  for (const ClosedLoopStep& step : result.steps) {
    const KeypointFrame fk = robot_keypoint_frame(spec, step.ik.q);
    for (KeypointId id : kAllKeypoints) {
      CHECK((step.next_state[id].position - fk[id].position).norm() < 1e-12);
      CHECK(quat_geodesic_distance(step.next_state[id].orientation, fk[id].orientation) < 1e-12);
    }
  }
  // and the chain is consistent: each state is the previous step's next_state
  const KeypointFrame s0 = robot_keypoint_frame(spec, zero_config(spec));
  for (KeypointId id : kAllKeypoints) {
    CHECK(result.steps[0].state[id].position == s0[id].position);
  }
  for (std::size_t i = 1; i < result.steps.size(); ++i) {
    for (KeypointId id : kAllKeypoints) {
      CHECK(result.steps[i].state[id].position ==
            result.steps[i - 1].next_state[id].position);
    }
  }
}

TEST_CASE("closed loop determinism", "[pipeline]") {
  const RobotSpec spec =
      load_robot_spec(std::string(HUMOTION_DATA_DIR) + "/robots/mid_humanoid.json");
  const PolicyModel model = small_model(7);
  Rng rng(9);
  std::vector<GoalSet> goals;
  for (int i = 0; i < 3; ++i) {
    goals.push_back(
        GoalSet::from_frame(robot_keypoint_frame(spec, testsupport::random_config(spec, rng))));
  }
  const ClosedLoopResult a = run_closed_loop(spec, model, goals, "ctx", IkConfig{});
  const ClosedLoopResult b = run_closed_loop(spec, model, goals, "ctx", IkConfig{});
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    for (const auto& [name, angle] : a.steps[i].ik.q.values()) {
      CHECK(b.steps[i].ik.q.at(name) == angle);
    }
  }
}

TEST_CASE("motion extraction from a closed-loop run", "[pipeline]") {
  const RobotSpec spec =
      load_robot_spec(std::string(HUMOTION_DATA_DIR) + "/robots/large_humanoid.json");
  const PolicyModel model = small_model(11);
  std::vector<GoalSet> goals(3, GoalSet::from_frame(robot_keypoint_frame(spec, zero_config(spec))));
  const ClosedLoopResult result = run_closed_loop(spec, model, goals, "hold still", IkConfig{});

  const MotionSequence gen = generated_motion(result, 30.0, "hold still");
  const MotionSequence exec = executed_motion(result, 30.0, "hold still");
  CHECK(gen.frames.size() == 3);
  CHECK(exec.frames.size() == 3);
  CHECK(gen.fps == 30.0);
  CHECK(gen.annotation == "hold still");
  for (std::size_t i = 0; i < 3; ++i) {
    for (KeypointId id : kAllKeypoints) {
      CHECK(exec.frames[i][id].position == result.steps[i].next_state[id].position);
    }
  }
}
