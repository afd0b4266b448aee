// humotion command line: augment, build-dataset, train, generate, retarget,
// evaluate. All file formats are documented in the library headers; every
// command is deterministic under a fixed --seed.

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "humotion/humotion.hpp"

namespace fs = std::filesystem;
using namespace humotion;

namespace {

// Exit codes: 0 ok, 1 internal error, 2 bad input path/schema, 3 empty input,
// 4 numeric failure.
enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kBadInput = 2,
  kEmptyInput = 3,
  kNumericFailure = 4,
};

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

std::vector<fs::path> list_json_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw CliError(kBadInput, "not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kBadInput, "cannot open file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kBadInput, path + ": " + e.what());
  }
  return j;
}

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string config_path;
  bool json_errors = false;
  Json config = Json::object();

  double config_number(const std::string& section, const std::string& key, double fallback) const {
    if (config.contains(section) && config.at(section).contains(key)) {
      return config.at(section).at(key).get<double>();
    }
    return fallback;
  }

  IkConfig ik_config() const {
    IkConfig c;
    c.max_iterations = static_cast<int>(config_number("ik", "max_iterations", c.max_iterations));
    c.damping = config_number("ik", "damping", c.damping);
    c.step_scale = config_number("ik", "step_scale", c.step_scale);
    c.position_tolerance = config_number("ik", "position_tolerance", c.position_tolerance);
    c.orientation_tolerance =
        config_number("ik", "orientation_tolerance", c.orientation_tolerance);
    c.rotation_weight_torso =
        config_number("ik", "rotation_weight_torso", c.rotation_weight_torso);
    c.rotation_weight_arms = config_number("ik", "rotation_weight_arms", c.rotation_weight_arms);
    c.filter_alpha = config_number("ik", "filter_alpha", c.filter_alpha);
    return c;
  }
};

int run_augment(const GlobalOptions&, const std::string& motions_dir, const std::string& specs_dir,
                const std::string& out_dir) {
  std::vector<MotionSequence> motions;
  std::vector<std::string> motion_names;
  for (const fs::path& p : list_json_files(motions_dir)) {
    motions.push_back(load_motion(p.string()));
    motion_names.push_back(p.stem().string());
  }
  if (motions.empty()) throw CliError(kEmptyInput, "no motion files in " + motions_dir);

  std::vector<RobotSpec> specs;
  for (const fs::path& p : list_json_files(specs_dir)) {
    specs.push_back(load_robot_spec(p.string()));
  }
  if (specs.empty()) throw CliError(kEmptyInput, "no robot spec files in " + specs_dir);

  std::vector<const RobotSpec*> spec_ptrs;
  for (const RobotSpec& s : specs) spec_ptrs.push_back(&s);
  const std::vector<MotionSequence> corpus = augment_corpus(motions, spec_ptrs);

  fs::create_directories(out_dir);
  const SkeletonTopology& topo = SkeletonTopology::canonical();
  double max_bone_error = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::string name;
    if (i < motions.size()) {
      name = motion_names[i] + ".json";
    } else {
      const std::size_t k = i - motions.size();
      const std::size_t spec_idx = k / motions.size();
      const std::size_t motion_idx = k % motions.size();
      name = motion_names[motion_idx] + "__" + specs[spec_idx].name() + ".json";
      const BoneLengthTable targets = robot_bone_targets(specs[spec_idx]);
      for (const KeypointFrame& frame : corpus[i].frames) {
        for (const auto& [pair, len] : bone_lengths(frame, topo)) {
          max_bone_error =
              std::max(max_bone_error, std::abs(len - targets.at(pair.first, pair.second)));
        }
      }
    }
    save_motion(corpus[i], (fs::path(out_dir) / name).string());
  }
  std::cout << Json{{"originals", motions.size()},
                    {"augmented", corpus.size() - motions.size()},
                    {"specs", specs.size()},
                    {"max_bone_error", max_bone_error}}
                   .dump()
            << "\n";
  return kOk;
}

int run_build_dataset(const GlobalOptions&, const std::string& corpus_dir, int window,
                      int subsample, const std::string& out_file) {
  if (window < 1) throw CliError(kBadInput, "--window must be >= 1");
  if (subsample < 1) throw CliError(kBadInput, "--subsample must be >= 1");
  const std::vector<fs::path> files = list_json_files(corpus_dir);
  if (files.empty()) throw CliError(kEmptyInput, "no motion files in " + corpus_dir);

  std::vector<TrainingTuple> tuples;
  std::set<double> effective_fps;
  for (const fs::path& p : files) {
    MotionSequence motion = load_motion(p.string());
    if (motion.annotation.empty()) motion = stub_annotate(motion);
    if (subsample > 1) {
      MotionSequence sampled = motion;
      sampled.frames.clear();
      for (std::size_t f = 0; f < motion.frames.size(); f += static_cast<std::size_t>(subsample)) {
        sampled.frames.push_back(motion.frames[f]);
      }
      sampled.fps = motion.fps / subsample;
      motion = std::move(sampled);
    }
    effective_fps.insert(motion.fps);
    const std::vector<TrainingTuple> expanded =
        window > 1 ? hindsight_expand(motion, window) : build_tuples(motion);
    tuples.insert(tuples.end(), expanded.begin(), expanded.end());
  }
  save_tuples(tuples, out_file);
  Json fps_list = Json::array();
  for (double f : effective_fps) fps_list.push_back(f);
  std::cout << Json{{"tuples", tuples.size()},
                    {"motions", files.size()},
                    {"window", window},
                    {"subsample", subsample},
                    {"effective_fps", std::move(fps_list)}}
                   .dump()
            << "\n";
  return kOk;
}

Json train_report_to_json(const TrainReport& report) {
  return Json{{"epochs", report.epoch_loss.size()},
              {"seed", report.seed},
              {"diverged", report.diverged},
              {"epoch_loss", report.epoch_loss},
              {"epoch_position_loss", report.epoch_position_loss},
              {"epoch_rotation_loss", report.epoch_rotation_loss},
              {"final_validation",
               Json{{"total", report.final_validation.total},
                    {"position", report.final_validation.position},
                    {"rotation", report.final_validation.rotation}}}};
}

int run_train(const GlobalOptions& global, const std::string& tuples_file,
              const std::string& out_ckpt, int epochs, int batch, double lr, double beta1,
              double lambda_rot, int text_dim, int hidden) {
  const std::vector<TrainingTuple> tuples = load_tuples(tuples_file);
  if (tuples.empty()) throw CliError(kEmptyInput, "no tuples in " + tuples_file);

  PolicyConfig pc;
  pc.text_dim = text_dim;
  pc.proprio_dim = text_dim;
  pc.proprio_hidden = hidden;
  pc.text_hidden = hidden;
  pc.trunk_hidden = hidden;
  PolicyModel model = PolicyModel::initialize(pc, global.seed);

  TrainConfig tc;
  tc.epochs = static_cast<int>(global.config_number("train", "epochs", epochs));
  tc.batch_size = static_cast<int>(global.config_number("train", "batch", batch));
  tc.learning_rate = global.config_number("train", "learning_rate", lr);
  tc.beta1 = global.config_number("train", "beta1", beta1);
  tc.lambda_rot = global.config_number("train", "lambda_rot", lambda_rot);
  tc.seed = global.seed;

  const TrainReport report = train(model, tuples, tc);
  if (report.diverged) {
    std::cout << train_report_to_json(report).dump() << "\n";
    throw CliError(kNumericFailure, "training diverged");
  }
  save_checkpoint(model, out_ckpt);
  std::cout << train_report_to_json(report).dump() << "\n";
  return kOk;
}

int run_generate(const GlobalOptions& global, const std::string& robot_file,
                 const std::string& ckpt_file, const std::string& goals_file,
                 const std::string& situation, const std::string& out_motion,
                 const std::string& out_joints, const std::string& out_log) {
  const RobotSpec spec = load_robot_spec(robot_file);
  const PolicyModel model = load_checkpoint(ckpt_file);
  const MotionSequence goal_motion = load_motion(goals_file);
  if (goal_motion.frames.empty()) throw CliError(kEmptyInput, "goal motion has no frames");

  std::vector<GoalSet> goals;
  goals.reserve(goal_motion.frames.size());
  for (const KeypointFrame& f : goal_motion.frames) goals.push_back(GoalSet::from_frame(f));

  const std::string text = situation.empty() ? goal_motion.annotation : situation;
  const ClosedLoopResult result =
      run_closed_loop(spec, model, goals, text, global.ik_config());

  if (!out_motion.empty()) {
    save_motion(generated_motion(result, goal_motion.fps, text), out_motion);
  }
  if (!out_joints.empty()) {
    std::vector<IkResult> ik;
    for (const ClosedLoopStep& s : result.steps) ik.push_back(s.ik);
    save_ik_results(ik, out_joints);
  }
  if (!out_log.empty()) {
    std::ofstream log(out_log);
    if (!log) throw CliError(kBadInput, "cannot open log for writing: " + out_log);
    for (const ClosedLoopStep& s : result.steps) {
      Json q = Json::object();
      for (const auto& [name, angle] : s.ik.q.values()) q[name] = angle;
      log << Json{{"q", std::move(q)}, {"s_next", keyed_frame_to_json(s.next_state)}}.dump()
          << "\n";
    }
  }
  double max_step = 0.0;
  for (std::size_t i = 1; i < result.steps.size(); ++i) {
    for (KeypointId id : kAllKeypoints) {
      max_step = std::max(max_step, (result.steps[i].generated[id].position -
                                     result.steps[i - 1].generated[id].position)
                                        .norm());
    }
  }
  std::cout << Json{{"steps", result.steps.size()}, {"max_generated_step", max_step}}.dump()
            << "\n";
  return kOk;
}

int run_retarget(const GlobalOptions& global, const std::string& robot_file,
                 const std::string& motion_file, const std::string& out_file) {
  const RobotSpec spec = load_robot_spec(robot_file);
  const MotionSequence motion = load_motion(motion_file);
  if (motion.frames.empty()) throw CliError(kEmptyInput, "motion has no frames");
  const std::vector<IkResult> results = retarget_motion(spec, motion.frames, global.ik_config());
  save_ik_results(results, out_file);
  int converged = 0;
  for (const IkResult& r : results) converged += (r.converged[0] && r.converged[1]) ? 1 : 0;
  std::cout << Json{{"frames", results.size()}, {"fully_converged", converged}}.dump() << "\n";
  return kOk;
}

int run_evaluate(const GlobalOptions& global, const std::string& pred_file,
                 const std::string& ref_file, const std::string& robot_file,
                 const std::string& ckpt_file, const std::string& out_file) {
  const MotionSequence pred = load_motion(pred_file);
  const MotionSequence ref = load_motion(ref_file);
  if (pred.frames.empty() || ref.frames.empty()) {
    throw CliError(kEmptyInput, "prediction or reference motion has no frames");
  }
  if (pred.frames.size() != ref.frames.size()) {
    throw CliError(kBadInput, "prediction and reference frame counts differ");
  }

  EvaluationReport report;
  const JointSubset ea = JointSubset::ea();
  const JointSubset hs = JointSubset::hs();
  for (std::size_t f = 0; f < pred.frames.size(); ++f) {
    report.ea_mpjpe += mpjpe(pred.frames[f], ref.frames[f], ea);
    report.ea_mpjoe += mpjoe(pred.frames[f], ref.frames[f], ea);
    report.hs_mpjpe += mpjpe(pred.frames[f], ref.frames[f], hs);
    report.hs_mpjoe += mpjoe(pred.frames[f], ref.frames[f], hs);
  }
  const double n = static_cast<double>(pred.frames.size());
  report.ea_mpjpe /= n;
  report.ea_mpjoe /= n;
  report.hs_mpjpe /= n;
  report.hs_mpjoe /= n;

  if (!robot_file.empty()) {
    const RobotSpec spec = load_robot_spec(robot_file);
    const BoneLengthTable targets = robot_bone_targets(spec);
    report.bone_fixed = bone_size_stability(pred.frames, targets, BoneClass::kFixed);
    report.bone_floating = bone_size_stability(pred.frames, targets, BoneClass::kFloating);
  }

  if (!ckpt_file.empty()) {
    const PolicyModel model = load_checkpoint(ckpt_file);
    // Distribution metrics need several samples; split both motions into
    // fixed-size windows and treat each window as one sample.
    const std::size_t window = std::max<std::size_t>(4, pred.frames.size() / 8);
    std::vector<Eigen::VectorXd> gen_features, real_features, text_embeds, motion_embeds;
    for (std::size_t start = 0; start + window <= pred.frames.size(); start += window) {
      const std::vector<KeypointFrame> pw(pred.frames.begin() + start,
                                          pred.frames.begin() + start + window);
      const std::vector<KeypointFrame> rw(ref.frames.begin() + start,
                                          ref.frames.begin() + start + window);
      gen_features.push_back(motion_features(model, pw, pred.annotation));
      real_features.push_back(motion_features(model, rw, ref.annotation));
    }
    if (gen_features.size() >= 2) {
      report.fmd_value = fmd(gen_features, real_features);
    } else {
      report.notes.push_back("fmd skipped: motion too short for windowed sampling");
    }
    text_embeds.push_back(text_features(model, ref.annotation));
    motion_embeds.push_back(motion_features(model, pred));
    const int dim = static_cast<int>(std::min(text_embeds[0].size(), motion_embeds[0].size()));
    std::vector<Eigen::VectorXd> t{text_embeds[0].head(dim)}, m{motion_embeds[0].head(dim)};
    report.mm_dist_value = mm_dist(t, m);
    report.notes.push_back(kEmbeddingSpaceNote);
    std::cerr << "note: " << kEmbeddingSpaceNote << "\n";
  }

  const Json j = evaluation_report_to_json(report);
  if (!out_file.empty()) {
    std::ofstream out(out_file);
    if (!out) throw CliError(kBadInput, "cannot open report for writing: " + out_file);
    out << j.dump(2) << "\n";
  }
  std::cout << j.dump() << "\n";
  return kOk;
}

int map_exception_code(const std::exception& e) {
  if (dynamic_cast<const CliError*>(&e)) return static_cast<const CliError&>(e).code;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const SpecError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const std::invalid_argument*>(&e) ||
      dynamic_cast<const std::out_of_range*>(&e)) {
    return kBadInput;
  }
  if (dynamic_cast<const NumericError*>(&e)) return kNumericFailure;
  return kInternalError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"human-to-humanoid upper-body pose generation and retargeting"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--seed", global.seed, "run seed (all commands are deterministic under it)");
  app.add_option("--config", global.config_path, "JSON config file with ik/train defaults");
  app.add_flag("--json-errors", global.json_errors, "emit errors as JSON on stderr");

  // augment
  std::string motions_dir, specs_dir, out_dir;
  CLI::App* augment = app.add_subcommand("augment", "rescale motions onto robot bone lengths");
  augment->add_option("--motions", motions_dir, "directory of motion JSON files")->required();
  augment->add_option("--specs", specs_dir, "directory of robot spec JSON files")->required();
  augment->add_option("--out", out_dir, "output directory")->required();

  // build-dataset
  std::string corpus_dir, tuples_out;
  int window = 8, subsample = 1;
  CLI::App* build = app.add_subcommand("build-dataset", "expand motions into (s,g,l,a) tuples");
  build->add_option("--corpus", corpus_dir, "directory of motion JSON files")->required();
  build->add_option("--window", window, "hindsight window H (1 = successive frames)");
  build->add_option("--subsample", subsample, "keep every n-th frame before expansion");
  build->add_option("--out", tuples_out, "output JSON Lines file")->required();

  // train
  std::string tuples_file, ckpt_out;
  int epochs = 40, batch = 64, text_dim = 256, hidden = 512;
  double lr = 1e-3, beta1 = 0.9, lambda_rot = 1.0;
  CLI::App* train_cmd = app.add_subcommand("train", "behavioral cloning of the pose policy");
  train_cmd->add_option("--tuples", tuples_file, "JSON Lines tuple file")->required();
  train_cmd->add_option("--out", ckpt_out, "checkpoint output path")->required();
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch", batch, "mini-batch size");
  train_cmd->add_option("--lr", lr, "step size");
  train_cmd->add_option("--beta1", beta1, "first-moment decay of the adaptive update");
  train_cmd->add_option("--lambda-rot", lambda_rot, "orientation loss weight");
  train_cmd->add_option("--text-dim", text_dim, "embedding dimension D_l (= D_p)");
  train_cmd->add_option("--hidden", hidden, "hidden layer width");

  // generate
  std::string robot_file, ckpt_file, goals_file, situation, out_motion, out_joints, out_log;
  CLI::App* generate = app.add_subcommand(
      "generate", "closed-loop generation: predict, retarget, feed robot state back");
  generate->add_option("--robot", robot_file, "robot spec JSON")->required();
  generate->add_option("--checkpoint", ckpt_file, "policy checkpoint")->required();
  generate->add_option("--goals", goals_file,
                       "motion JSON whose end-effector poses become the goal sequence")
      ->required();
  generate->add_option("--situation", situation, "context text (defaults to goal annotation)");
  generate->add_option("--out-motion", out_motion, "generated motion output");
  generate->add_option("--out-joints", out_joints, "IK result JSON Lines output");
  generate->add_option("--out-log", out_log, "closed-loop state log (q + executed state)");

  // retarget
  std::string rt_robot, rt_motion, rt_out;
  CLI::App* retarget_cmd = app.add_subcommand("retarget", "two-stage CLIK over a motion");
  retarget_cmd->add_option("--robot", rt_robot, "robot spec JSON")->required();
  retarget_cmd->add_option("--motion", rt_motion, "motion JSON to retarget")->required();
  retarget_cmd->add_option("--out", rt_out, "IK result JSON Lines output")->required();

  // evaluate
  std::string ev_pred, ev_ref, ev_robot, ev_ckpt, ev_out;
  CLI::App* evaluate = app.add_subcommand("evaluate", "similarity and appropriateness metrics");
  evaluate->add_option("--pred", ev_pred, "predicted/generated motion JSON")->required();
  evaluate->add_option("--ref", ev_ref, "reference motion JSON")->required();
  evaluate->add_option("--robot", ev_robot, "robot spec for bone-size stability");
  evaluate->add_option("--checkpoint", ev_ckpt, "policy checkpoint for feature-space metrics");
  evaluate->add_option("--out", ev_out, "write the JSON report here as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!global.config_path.empty()) global.config = load_json_file(global.config_path);
    if (augment->parsed()) return run_augment(global, motions_dir, specs_dir, out_dir);
    if (build->parsed()) return run_build_dataset(global, corpus_dir, window, subsample, tuples_out);
    if (train_cmd->parsed()) {
      return run_train(global, tuples_file, ckpt_out, epochs, batch, lr, beta1, lambda_rot,
                       text_dim, hidden);
    }
    if (generate->parsed()) {
      return run_generate(global, robot_file, ckpt_file, goals_file, situation, out_motion,
                          out_joints, out_log);
    }
    if (retarget_cmd->parsed()) return run_retarget(global, rt_robot, rt_motion, rt_out);
    if (evaluate->parsed()) return run_evaluate(global, ev_pred, ev_ref, ev_robot, ev_ckpt, ev_out);
    return kInternalError;
  } catch (const std::exception& e) {
    const int code = map_exception_code(e);
    if (global.json_errors) {
      std::cerr << Json{{"error", Json{{"code", code}, {"message", e.what()}}}}.dump() << "\n";
    } else {
      std::cerr << "error: " << e.what() << "\n";
    }
    return code;
  }
}
