// End-to-end walkthrough on in-memory data: augment a sample motion onto a
// shipped robot, build hindsight tuples, train a small policy, run the
// closed loop and print similarity metrics.
//
//   closed_loop_demo <robot-spec.json> <motion.json>

#include <iostream>

#include "humotion/humotion.hpp"

using namespace humotion;

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: closed_loop_demo <robot-spec.json> <motion.json>\n";
    return 2;
  }
  const RobotSpec robot = load_robot_spec(argv[1]);
  const MotionSequence human_motion = load_motion(argv[2]);
  std::cout << "robot: " << robot.name() << ", motion frames: " << human_motion.frames.size()
            << "\n";

  // Rescale the human motion onto the robot's bone lengths.
  const std::vector<MotionSequence> corpus = augment_corpus({human_motion}, {&robot});
  const MotionSequence& robot_motion = corpus.back();

  // Hindsight-expanded training tuples from both variants.
  std::vector<TrainingTuple> tuples;
  for (const MotionSequence& m : corpus) {
    const std::vector<TrainingTuple> expanded = hindsight_expand(m, 4);
    tuples.insert(tuples.end(), expanded.begin(), expanded.end());
  }
  std::cout << "training tuples: " << tuples.size() << "\n";

  PolicyConfig pc;
  pc.text_dim = 64;
  pc.proprio_dim = 64;
  pc.proprio_hidden = 128;
  pc.text_hidden = 128;
  pc.trunk_hidden = 128;
  PolicyModel model = PolicyModel::initialize(pc, 7);

  TrainConfig tc;
  tc.epochs = 150;
  tc.batch_size = 32;
  tc.learning_rate = 3e-3;
  tc.seed = 7;
  const TrainReport report = train(model, tuples, tc);
  std::cout << "final training loss: " << report.epoch_loss.back() << "\n";

  // Closed loop: drive the robot through the motion's end-effector goals.
  std::vector<GoalSet> goals;
  for (const KeypointFrame& f : robot_motion.frames) goals.push_back(GoalSet::from_frame(f));
  const ClosedLoopResult loop =
      run_closed_loop(robot, model, goals, robot_motion.annotation, IkConfig{});

  const JointSubset ea = JointSubset::ea();
  const JointSubset hs = JointSubset::hs();
  double ea_err = 0.0, hs_err = 0.0;
  for (std::size_t i = 0; i < loop.steps.size(); ++i) {
    ea_err += mpjpe(loop.steps[i].generated, robot_motion.frames[i], ea);
    hs_err += mpjpe(loop.steps[i].generated, robot_motion.frames[i], hs);
  }
  std::cout << "closed-loop MPJPE vs rescaled motion: EA " << ea_err / loop.steps.size()
            << " m, HS " << hs_err / loop.steps.size() << " m\n";

  const BoneLengthTable targets = robot_bone_targets(robot);
  std::vector<KeypointFrame> generated;
  for (const ClosedLoopStep& s : loop.steps) generated.push_back(s.generated);
  std::cout << "generated fixed-bone deviation: "
            << bone_size_stability(generated, targets, BoneClass::kFixed) << " m\n";
  return 0;
}
