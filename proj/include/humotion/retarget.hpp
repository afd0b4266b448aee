#pragma once

#include <Eigen/Dense>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "humotion/geom.hpp"
#include "humotion/json_util.hpp"
#include "humotion/skeleton.hpp"

namespace humotion {

struct IkConfig {
  int max_iterations = 200;           // per stage
  double damping = 1e-3;              // lambda of the damped least squares
  double step_scale = 0.5;
  double position_tolerance = 1e-4;   // meters
  double orientation_tolerance = 1e-3;  // radians
  double rotation_weight_torso = 10.0;
  double rotation_weight_arms = 1.0;
  double filter_alpha = 0.6;

  void validate() const {
    if (!(position_tolerance > 0.0) || !(orientation_tolerance > 0.0)) {
      throw std::invalid_argument("IkConfig: tolerances must be positive");
    }
    if (!(damping > 0.0)) throw std::invalid_argument("IkConfig: damping must be positive");
  }
};

struct TaskWeights {
  double position = 1.0;
  double rotation = 1.0;
};

struct TargetResidual {
  double position = 0.0;     // meters
  double orientation = 0.0;  // radians
};

struct StageResult {
  JointConfig q;  // full configuration; only active joints were updated
  std::map<std::string, TargetResidual> residuals;  // keyed by target frame
  int iterations = 0;
  bool converged = false;
};

namespace retarget_detail {

constexpr double kJacobianStep = 1e-6;  // rad, central differences
// Near-singular configurations can produce huge damped-least-squares updates
// (amplification up to 1/(2 lambda)); one iteration never moves a joint by
// more than this.
constexpr double kMaxJointStep = 0.5;  // rad

struct TaskError {
  Eigen::VectorXd weighted;  // stacked [w_pos * dp; w_rot * rotvec] per target
  std::map<std::string, TargetResidual> residuals;
  bool converged = false;
};

inline TaskError task_error(const RobotSpec& spec, const JointConfig& q,
                            const std::map<std::string, Pose6D>& targets,
                            const TaskWeights& weights, const IkConfig& config) {
  const std::map<std::string, Pose6D> fk = forward_kinematics(spec, q);
  TaskError out;
  out.weighted.resize(6 * static_cast<int>(targets.size()));
  out.converged = true;
  int row = 0;
  for (const auto& [frame, target] : targets) {
    auto it = fk.find(frame);
    if (it == fk.end()) {
      throw std::invalid_argument("clik_stage: target frame '" + frame + "' does not exist");
    }
    const Pose6D& cur = it->second;
    const Eigen::Vector3d dp = target.position - cur.position;
    const Eigen::Vector3d dr =
        (target.orientation * cur.orientation.conjugate()).to_rotation_vector();
    out.weighted.segment<3>(row) = weights.position * dp;
    out.weighted.segment<3>(row + 3) = weights.rotation * dr;
    row += 6;
    TargetResidual res{dp.norm(), dr.norm()};
    out.residuals[frame] = res;
    if (weights.position != 0.0 && res.position > config.position_tolerance) out.converged = false;
    if (weights.rotation != 0.0 && res.orientation > config.orientation_tolerance) {
      out.converged = false;
    }
  }
  return out;
}

}  // namespace retarget_detail

/// One damped-least-squares stage: iterates dq = J^T (J J^T + lambda^2 I)^-1 e
/// over the active joints, Jacobian by central finite differences over FK,
/// updates clamped to joint limits. Locked joints never change.
///
/// A stage that stalls in a local minimum (no error improvement over a short
/// window) restarts the active joints from a deterministic seed ladder and
/// keeps the best attempt; the iteration budget is shared across attempts, so
/// a stage never exceeds max_iterations in total.
inline StageResult clik_stage(const RobotSpec& spec, const std::vector<std::string>& active_joints,
                              const JointConfig& locked_q,
                              const std::map<std::string, Pose6D>& targets,
                              const TaskWeights& weights, const IkConfig& config) {
  using retarget_detail::task_error;
  config.validate();
  if (active_joints.empty()) throw std::invalid_argument("clik_stage: empty active joint set");
  if (targets.empty()) throw std::invalid_argument("clik_stage: no targets");

  const int n_active = static_cast<int>(active_joints.size());
  const int rows = 6 * static_cast<int>(targets.size());
  Eigen::MatrixXd jac(rows, n_active);

  JointConfig q = locked_q;
  for (const std::string& name : active_joints) {
    const RobotJoint& j = spec.joint(name);
    q[name] = std::clamp(q.at(name), j.lower_limit, j.upper_limit);
  }

  StageResult best;
  double best_norm = std::numeric_limits<double>::infinity();
  int iterations_used = 0;
  int attempt = 0;
  constexpr int kStallWindow = 12;
  constexpr double kStallImprovement = 1e-10;

  while (true) {
    double window_best = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
    bool stalled = false;

    while (true) {
      retarget_detail::TaskError err = task_error(spec, q, targets, weights, config);
      const double norm = err.weighted.norm();
      if (norm < best_norm) {
        best_norm = norm;
        best.q = q;
        best.residuals = err.residuals;
        best.converged = err.converged;
      }
      if (err.converged) {
        best.iterations = iterations_used;
        return best;
      }
      if (iterations_used == config.max_iterations) {
        best.iterations = iterations_used;
        return best;
      }
      if (norm < window_best - kStallImprovement) {
        window_best = norm;
        since_improvement = 0;
      } else if (++since_improvement >= kStallWindow) {
        stalled = true;
        break;
      }

      for (int a = 0; a < n_active; ++a) {
        const std::string& name = active_joints[static_cast<std::size_t>(a)];
        JointConfig probe = q;
        probe[name] = q.at(name) + retarget_detail::kJacobianStep;
        const Eigen::VectorXd plus = task_error(spec, probe, targets, weights, config).weighted;
        probe[name] = q.at(name) - retarget_detail::kJacobianStep;
        const Eigen::VectorXd minus = task_error(spec, probe, targets, weights, config).weighted;
        jac.col(a) = (plus - minus) / (2.0 * retarget_detail::kJacobianStep);
      }

      Eigen::MatrixXd normal = jac * jac.transpose();
      normal.diagonal().array() += config.damping * config.damping;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
      if (ldlt.info() != Eigen::Success) {
        throw NumericError("clik_stage: damped normal matrix factorization failed");
      }
      // jac holds d(error)/dq = -d(current)/dq; DLS wants the FK Jacobian.
      Eigen::VectorXd dq = -jac.transpose() * ldlt.solve(err.weighted);
      if (!dq.allFinite()) {
        throw NumericError("clik_stage: non-finite joint update (singular system)");
      }
      dq *= config.step_scale;
      const double biggest = dq.cwiseAbs().maxCoeff();
      if (biggest > retarget_detail::kMaxJointStep) {
        dq *= retarget_detail::kMaxJointStep / biggest;
      }
      for (int a = 0; a < n_active; ++a) {
        const std::string& name = active_joints[static_cast<std::size_t>(a)];
        const RobotJoint& j = spec.joint(name);
        q[name] = std::clamp(q.at(name) + dq[a], j.lower_limit, j.upper_limit);
      }
      ++iterations_used;
    }

    (void)stalled;  // the inner loop exits by return unless it stalled
    // Deterministic reseed of the active joints for the next attempt.
    ++attempt;
    Rng reseed(0xC11Cull * 2654435761ull + static_cast<std::uint64_t>(attempt));
    q = best.q;
    for (const std::string& name : active_joints) {
      const RobotJoint& j = spec.joint(name);
      q[name] = reseed.uniform(j.lower_limit, j.upper_limit);
    }
  }
}

/// Combined two-stage solve for one generated frame.
struct IkResult {
  JointConfig q;
  // Residuals of FK(q) against the filtered targets, keyed by keypoint name.
  std::map<std::string, TargetResidual> residuals;
  std::array<int, 2> iterations{0, 0};
  std::array<bool, 2> converged{false, false};
  bool fallback = false;  // set by retarget_motion when a frame failed
  std::string error;
};

/// Maps one generated keypoint frame to robot joints: filters each target
/// through the SE(3) filter against the previous solution, solves the torso
/// toward neck+head with emphasized rotation, then locks the torso and solves
/// the arms toward the wrists.
inline IkResult solve_pose(const RobotSpec& spec, const KeypointFrame& generated,
                           const IkResult* previous, const IkConfig& config) {
  config.validate();
  const std::string neck_frame = spec.keypoint_map().at(KeypointId::kNeck);
  const std::string head_frame = spec.end_effectors().head;
  const std::string lw_frame = spec.end_effectors().l_wrist;
  const std::string rw_frame = spec.end_effectors().r_wrist;

  std::map<std::string, Pose6D> torso_targets{{neck_frame, generated[KeypointId::kNeck]},
                                              {head_frame, generated[KeypointId::kHead]}};
  std::map<std::string, Pose6D> arm_targets{{lw_frame, generated[KeypointId::kLWrist]},
                                            {rw_frame, generated[KeypointId::kRWrist]}};

  // Cold solves seed at the neutral (limits-midpoint) pose; warm solves
  // continue from the previous solution.
  JointConfig initial = previous ? previous->q : neutral_config(spec);
  if (previous) {
    const std::map<std::string, Pose6D> prev_fk = forward_kinematics(spec, previous->q);
    for (auto* targets : {&torso_targets, &arm_targets}) {
      for (auto& [frame, pose] : *targets) {
        pose = se3_filter_step(prev_fk.at(frame), pose, config.filter_alpha);
      }
    }
  }

  const StageResult torso =
      clik_stage(spec, spec.torso_joints(), initial, torso_targets,
                 TaskWeights{1.0, config.rotation_weight_torso}, config);
  const StageResult arms =
      clik_stage(spec, spec.arm_joints(), torso.q, arm_targets,
                 TaskWeights{1.0, config.rotation_weight_arms}, config);

  IkResult result;
  result.q = arms.q;
  result.iterations = {torso.iterations, arms.iterations};
  result.converged = {torso.converged, arms.converged};
  // Residuals recomputed from the final configuration, never accumulated.
  const std::map<std::string, Pose6D> fk = forward_kinematics(spec, result.q);
  auto residual_of = [&](const std::string& frame, const Pose6D& target) {
    const Pose6D& cur = fk.at(frame);
    return TargetResidual{(target.position - cur.position).norm(),
                          (target.orientation * cur.orientation.conjugate())
                              .to_rotation_vector()
                              .norm()};
  };
  result.residuals["neck"] = residual_of(neck_frame, torso_targets.at(neck_frame));
  result.residuals["head"] = residual_of(head_frame, torso_targets.at(head_frame));
  result.residuals["l_wrist"] = residual_of(lw_frame, arm_targets.at(lw_frame));
  result.residuals["r_wrist"] = residual_of(rw_frame, arm_targets.at(rw_frame));
  return result;
}

/// Sequential retargeting of a frame list; each solution seeds the next
/// frame's filter. A failed frame is recorded and the pipeline continues from
/// the previous configuration, flagged as a fallback.
inline std::vector<IkResult> retarget_motion(const RobotSpec& spec,
                                             const std::vector<KeypointFrame>& frames,
                                             const IkConfig& config) {
  if (frames.empty()) throw std::invalid_argument("retarget_motion: empty frame list");
  std::vector<IkResult> results;
  results.reserve(frames.size());
  const IkResult* previous = nullptr;
  for (const KeypointFrame& frame : frames) {
    try {
      results.push_back(solve_pose(spec, frame, previous, config));
    } catch (const std::exception& e) {
      IkResult failed;
      failed.q = previous ? previous->q : neutral_config(spec);
      failed.fallback = true;
      failed.error = e.what();
      results.push_back(std::move(failed));
    }
    previous = &results.back();
  }
  return results;
}

// --- IK result JSON Lines ----------------------------------------------------

inline Json ik_result_to_json(const IkResult& r) {
  Json q = Json::object();
  for (const auto& [name, angle] : r.q.values()) q[name] = angle;
  Json residuals = Json::object();
  for (const auto& [name, res] : r.residuals) {
    residuals[name] = Json{{"pos", res.position}, {"rot", res.orientation}};
  }
  Json j{{"q", std::move(q)},
         {"residuals", std::move(residuals)},
         {"iters", Json::array({r.iterations[0], r.iterations[1]})},
         {"converged", Json::array({r.converged[0], r.converged[1]})}};
  if (r.fallback) j["error"] = r.error;
  return j;
}

inline void save_ik_results(const std::vector<IkResult>& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open ik result file for writing: " + path);
  for (const IkResult& r : results) out << ik_result_to_json(r).dump() << "\n";
}

}  // namespace humotion
