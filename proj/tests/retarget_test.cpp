#include <catch2/catch_amalgamated.hpp>

#include "humotion/retarget.hpp"
#include "humotion/robot_io.hpp"
#include "support/synthetic.hpp"

using namespace humotion;
using testsupport::random_config;

namespace {

constexpr double kPi = 3.14159265358979323846;

RobotSpec planar_two_link() {
  std::vector<RobotJoint> joints;
  joints.push_back({"j1", "root", Pose6D(), {0, 0, 1}, -kPi, kPi});
  joints.push_back({"j2", "j1",
                    Pose6D(Eigen::Vector3d(0.3, 0, 0), UnitQuaternion::identity()),
                    {0, 0, 1}, -kPi, kPi});
  joints.push_back({"hand", "j2",
                    Pose6D(Eigen::Vector3d(0.2, 0, 0), UnitQuaternion::identity()),
                    {0, 0, 1}, 0.0, 0.0});
  std::map<KeypointId, std::string> kp;
  for (KeypointId id : kAllKeypoints) kp[id] = "j1";
  kp[KeypointId::kLWrist] = "hand";
  return RobotSpec("planar", std::move(joints), std::move(kp), {"j1"}, {"j2"},
                   EndEffectorFrames{"j1", "hand", "j1"});
}

RobotSpec shipped(const char* name) {
  return load_robot_spec(std::string(HUMOTION_DATA_DIR) + "/robots/" + name + ".json");
}

JointConfig random_arm_pose(const RobotSpec& spec, Rng& rng) {
  // margin keeps targets away from exact joint-limit boundaries
  return random_config(spec, rng, 0.08);
}

}  // namespace

TEST_CASE("clik stage fixed point", "[retarget]") {
  const RobotSpec spec = shipped("mid_humanoid");
  Rng rng(1);
  const JointConfig q = random_arm_pose(spec, rng);
  const auto fk = forward_kinematics(spec, q);
  const std::map<std::string, Pose6D> targets{
      {"l_wrist_roll", fk.at("l_wrist_roll")}, {"r_wrist_roll", fk.at("r_wrist_roll")}};
  const StageResult r =
      clik_stage(spec, spec.arm_joints(), q, targets, TaskWeights{1.0, 1.0}, IkConfig{});
  CHECK(r.iterations == 0);
  CHECK(r.converged);
  for (const auto& [name, angle] : q.values()) {
    CHECK(r.q.at(name) == angle);
  }
}

TEST_CASE("two-link planar analytic oracle", "[retarget]") {
  const RobotSpec spec = planar_two_link();
  JointConfig q0;
  q0["j1"] = 0.0;
  q0["j2"] = 0.0;
  q0["hand"] = 0.0;
  // target reachable at q = (0 deg, 90 deg): elbow at (0.3, 0), tip at (0.3, 0.2)
  const std::map<std::string, Pose6D> targets{
      {"hand", Pose6D(Eigen::Vector3d(0.3, 0.2, 0), UnitQuaternion::identity())}};
  IkConfig config;
  config.max_iterations = 300;
  const StageResult r = clik_stage(spec, {"j1", "j2"}, q0, targets,
                                   TaskWeights{1.0, 0.0},  // position-only task
                                   config);
  CHECK(r.converged);
  CHECK(r.residuals.at("hand").position < config.position_tolerance);
  CHECK(std::abs(r.q.at("j1") - 0.0) < 0.05);
  CHECK(std::abs(r.q.at("j2") - kPi / 2) < 0.05);
}

TEST_CASE("unreachable target reports the workspace gap", "[retarget]") {
  const RobotSpec spec = planar_two_link();
  JointConfig q0;
  q0["j1"] = 0.0;
  q0["j2"] = 0.0;
  q0["hand"] = 0.0;
  // 1 m beyond the 0.5 m reach
  const std::map<std::string, Pose6D> targets{
      {"hand", Pose6D(Eigen::Vector3d(1.5, 0, 0), UnitQuaternion::identity())}};
  const StageResult r =
      clik_stage(spec, {"j1", "j2"}, q0, targets, TaskWeights{1.0, 0.0}, IkConfig{});
  CHECK_FALSE(r.converged);
  CHECK(r.residuals.at("hand").position == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("clik stage argument errors", "[retarget]") {
  const RobotSpec spec = shipped("mid_humanoid");
  const JointConfig q = zero_config(spec);
  const std::map<std::string, Pose6D> targets{{"l_wrist_roll", Pose6D()}};
  CHECK_THROWS_AS(clik_stage(spec, {}, q, targets, TaskWeights{}, IkConfig{}),
                  std::invalid_argument);
  const std::map<std::string, Pose6D> bad_frame{{"no_such_frame", Pose6D()}};
  CHECK_THROWS_AS(clik_stage(spec, spec.arm_joints(), q, bad_frame, TaskWeights{}, IkConfig{}),
                  std::invalid_argument);
  IkConfig bad;
  bad.damping = 0.0;
  CHECK_THROWS_AS(clik_stage(spec, spec.arm_joints(), q, targets, TaskWeights{}, bad),
                  std::invalid_argument);
}

TEST_CASE("locked joints never change and limits are respected", "[retarget]") {
  const RobotSpec spec = shipped("compact_humanoid");
  Rng rng(3);
  JointConfig start = random_arm_pose(spec, rng);
  const KeypointFrame target_frame = robot_keypoint_frame(spec, random_arm_pose(spec, rng));
  const std::map<std::string, Pose6D> targets{
      {"l_wrist_roll", target_frame[KeypointId::kLWrist]},
      {"r_wrist_roll", target_frame[KeypointId::kRWrist]}};
  const StageResult r =
      clik_stage(spec, spec.arm_joints(), start, targets, TaskWeights{1.0, 1.0}, IkConfig{});
  for (const std::string& torso : spec.torso_joints()) {
    CHECK(r.q.at(torso) == start.at(torso));  // bitwise: locked joints untouched
  }
  for (const RobotJoint& j : spec.joints()) {
    CHECK(r.q.at(j.name) >= j.lower_limit);
    CHECK(r.q.at(j.name) <= j.upper_limit);
  }
}

TEST_CASE("solve_pose round trips FK-generated frames", "[retarget]") {
  const RobotSpec spec = shipped("mid_humanoid");
  Rng rng(5);
  IkConfig config;
  int converged = 0;
  const int trials = 20;
  for (int i = 0; i < trials; ++i) {
    const JointConfig q0 = random_arm_pose(spec, rng);
    const KeypointFrame generated = robot_keypoint_frame(spec, q0);
    const IkResult r = solve_pose(spec, generated, nullptr, config);
    const bool good = r.residuals.at("l_wrist").position < 1e-3 &&
                      r.residuals.at("r_wrist").position < 1e-3 &&
                      r.residuals.at("l_wrist").orientation < 1e-2 &&
                      r.residuals.at("r_wrist").orientation < 1e-2;
    converged += good ? 1 : 0;
  }
  CHECK(converged == trials);
}

TEST_CASE("solve_pose without previous equals the unfiltered solve", "[retarget]") {
  const RobotSpec spec = shipped("large_humanoid");
  Rng rng(7);
  const KeypointFrame generated = robot_keypoint_frame(spec, random_arm_pose(spec, rng));
  IkConfig a;
  a.filter_alpha = 0.3;
  IkConfig b;
  b.filter_alpha = 1.0;
  const IkResult ra = solve_pose(spec, generated, nullptr, a);
  const IkResult rb = solve_pose(spec, generated, nullptr, b);
  for (const auto& [name, angle] : ra.q.values()) {
    CHECK(rb.q.at(name) == angle);
  }
}

TEST_CASE("torso stage is bitwise invariant to arm-target perturbation", "[retarget]") {
  const RobotSpec spec = shipped("mid_humanoid");
  Rng rng(9);
  for (int i = 0; i < 5; ++i) {
    const KeypointFrame generated = robot_keypoint_frame(spec, random_arm_pose(spec, rng));
    KeypointFrame perturbed = generated;
    perturbed[KeypointId::kLWrist].position += Eigen::Vector3d(0.05, -0.03, 0.08);
    perturbed[KeypointId::kRWrist].position += Eigen::Vector3d(-0.04, 0.06, -0.02);
    const IkResult a = solve_pose(spec, generated, nullptr, IkConfig{});
    const IkResult b = solve_pose(spec, perturbed, nullptr, IkConfig{});
    for (const std::string& torso : spec.torso_joints()) {
      CHECK(a.q.at(torso) == b.q.at(torso));
    }
  }
}

TEST_CASE("solve_pose determinism", "[retarget]") {
  const RobotSpec spec = shipped("compact_humanoid");
  Rng rng(11);
  const KeypointFrame generated = robot_keypoint_frame(spec, random_arm_pose(spec, rng));
  const IkResult a = solve_pose(spec, generated, nullptr, IkConfig{});
  const IkResult b = solve_pose(spec, generated, nullptr, IkConfig{});
  for (const auto& [name, angle] : a.q.values()) CHECK(b.q.at(name) == angle);
  CHECK(a.iterations == b.iterations);
  CHECK(a.residuals.at("head").position == b.residuals.at("head").position);
}

TEST_CASE("retarget_motion settles on a constant frame", "[retarget]") {
  const RobotSpec spec = shipped("mid_humanoid");
  Rng rng(13);
  const KeypointFrame frame = robot_keypoint_frame(spec, random_arm_pose(spec, rng));
  const std::vector<KeypointFrame> frames(10, frame);
  const std::vector<IkResult> results = retarget_motion(spec, frames, IkConfig{});
  REQUIRE(results.size() == 10);
  double max_change = 0.0;
  for (const auto& [name, angle] : results[9].q.values()) {
    max_change = std::max(max_change, std::abs(angle - results[8].q.at(name)));
  }
  CHECK(max_change < 1e-6);

  // single frame == solve_pose with previous = none
  const std::vector<IkResult> single = retarget_motion(spec, {frame}, IkConfig{});
  const IkResult direct = solve_pose(spec, frame, nullptr, IkConfig{});
  for (const auto& [name, angle] : direct.q.values()) {
    CHECK(single[0].q.at(name) == angle);
  }
}

TEST_CASE("stronger filtering smooths a step-target sequence", "[retarget]") {
  const RobotSpec spec = shipped("mid_humanoid");
  Rng rng(15);
  const JointConfig qa = random_arm_pose(spec, rng);
  JointConfig qb = qa;
  for (const RobotJoint& j : spec.joints()) {
    qb[j.name] = std::clamp(qa.at(j.name) + rng.uniform(-0.45, 0.45), j.lower_limit,
                            j.upper_limit);
  }
  const KeypointFrame a = robot_keypoint_frame(spec, qa);
  const KeypointFrame b = robot_keypoint_frame(spec, qb);
  // step sequence: hold a, jump to b
  const std::vector<KeypointFrame> frames{a, a, b, b, b};

  auto max_step = [&](double alpha) {
    IkConfig config;
    config.filter_alpha = alpha;
    const std::vector<IkResult> results = retarget_motion(spec, frames, config);
    double worst = 0.0;
    for (std::size_t i = 1; i < results.size(); ++i) {
      for (const auto& [name, angle] : results[i].q.values()) {
        worst = std::max(worst, std::abs(angle - results[i - 1].q.at(name)));
      }
    }
    return worst;
  };
  CHECK(max_step(0.3) <= max_step(1.0) + 1e-12);
}

TEST_CASE("ik result serialization shape", "[retarget]") {
  const RobotSpec spec = shipped("compact_humanoid");
  Rng rng(17);
  const KeypointFrame frame = robot_keypoint_frame(spec, random_arm_pose(spec, rng));
  const IkResult r = solve_pose(spec, frame, nullptr, IkConfig{});
  const Json j = ik_result_to_json(r);
  CHECK(j.contains("q"));
  CHECK(j.contains("residuals"));
  CHECK(j.at("iters").size() == 2);
  CHECK(j.at("converged").size() == 2);
  CHECK(j.at("q").size() == spec.joints().size());
  for (const char* key : {"neck", "head", "l_wrist", "r_wrist"}) {
    CHECK(j.at("residuals").contains(key));
  }
}
