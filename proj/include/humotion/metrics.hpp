#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "humotion/augment.hpp"
#include "humotion/dataset.hpp"
#include "humotion/json_util.hpp"
#include "humotion/policy.hpp"
#include "humotion/skeleton.hpp"

namespace humotion {

/// Keypoints a similarity metric averages over. EA covers the three
/// end-effectors, HS all eleven markers.
struct JointSubset {
  std::set<KeypointId> ids;

  static JointSubset ea() {
    return JointSubset{{KeypointId::kHead, KeypointId::kLWrist, KeypointId::kRWrist}};
  }
  static JointSubset hs() {
    JointSubset s;
    for (KeypointId id : kAllKeypoints) s.ids.insert(id);
    return s;
  }
};

/// Mean per-joint position error over the subset, meters.
inline double mpjpe(const KeypointFrame& pred, const KeypointFrame& ref,
                    const JointSubset& subset) {
  if (subset.ids.empty()) throw std::invalid_argument("mpjpe: empty joint subset");
  double sum = 0.0;
  for (KeypointId id : subset.ids) {
    sum += (pred[id].position - ref[id].position).norm();
  }
  return sum / static_cast<double>(subset.ids.size());
}

/// Mean per-joint orientation error over the subset, radians.
inline double mpjoe(const KeypointFrame& pred, const KeypointFrame& ref,
                    const JointSubset& subset) {
  if (subset.ids.empty()) throw std::invalid_argument("mpjoe: empty joint subset");
  double sum = 0.0;
  for (KeypointId id : subset.ids) {
    sum += quat_geodesic_distance(pred[id].orientation, ref[id].orientation);
  }
  return sum / static_cast<double>(subset.ids.size());
}

/// Mean absolute deviation of the given bone class from the reference lengths,
/// averaged over frames and bones.
inline double bone_size_stability(const std::vector<KeypointFrame>& pred_frames,
                                  const BoneLengthTable& ref_lengths, BoneClass bone_class,
                                  const SkeletonTopology& topology =
                                      SkeletonTopology::canonical()) {
  if (pred_frames.empty()) throw std::invalid_argument("bone_size_stability: no frames");
  std::vector<const Bone*> bones;
  for (const Bone& b : topology.bones()) {
    if (b.cls == bone_class) bones.push_back(&b);
  }
  if (bones.empty()) {
    throw std::invalid_argument("bone_size_stability: topology has no bones of that class");
  }
  double sum = 0.0;
  for (const KeypointFrame& frame : pred_frames) {
    for (const Bone* b : bones) {
      const double len = (frame[b->child].position - frame[b->parent].position).norm();
      sum += std::abs(len - ref_lengths.at(b->parent, b->child));
    }
  }
  return sum / (static_cast<double>(pred_frames.size()) * static_cast<double>(bones.size()));
}

/// Gaussian fit of a feature sample: mean and symmetrized covariance (ddof 1).
struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  static GaussianStats fit(const std::vector<Eigen::VectorXd>& samples) {
    if (samples.size() < 2) {
      throw std::invalid_argument("GaussianStats: need at least 2 samples");
    }
    const int dim = static_cast<int>(samples.front().size());
    const int n = static_cast<int>(samples.size());
    Eigen::MatrixXd x(dim, n);
    for (int i = 0; i < n; ++i) {
      if (samples[static_cast<std::size_t>(i)].size() != dim) {
        throw std::invalid_argument("GaussianStats: inconsistent feature dimension");
      }
      x.col(i) = samples[static_cast<std::size_t>(i)];
    }
    GaussianStats g;
    g.mean = x.rowwise().mean();
    const Eigen::MatrixXd centered = x.colwise() - g.mean;
    Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n - 1);
    g.covariance = 0.5 * (cov + cov.transpose());
    return g;
  }
};

namespace metrics_detail {

/// PSD square root by symmetric eigendecomposition, negative eigenvalues
/// clamped at zero.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw NumericError("sqrt_psd: eigendecomposition failed");
  }
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace metrics_detail

/// Frechet distance between Gaussian fits of two feature samples:
/// |mu_g - mu_r|^2 + Tr(S_g + S_r - 2 (S_r^1/2 S_g S_r^1/2)^1/2).
inline double fmd(const std::vector<Eigen::VectorXd>& gen_features,
                  const std::vector<Eigen::VectorXd>& real_features) {
  const GaussianStats g = GaussianStats::fit(gen_features);
  const GaussianStats r = GaussianStats::fit(real_features);
  if (g.mean.size() != r.mean.size()) {
    throw std::invalid_argument("fmd: feature dimension mismatch");
  }
  const Eigen::MatrixXd sr = metrics_detail::sqrt_psd(r.covariance);
  Eigen::MatrixXd inner = sr * g.covariance * sr;
  inner = 0.5 * (inner + inner.transpose());
  const Eigen::MatrixXd cross = metrics_detail::sqrt_psd(inner);
  const double value = (g.mean - r.mean).squaredNorm() +
                       (g.covariance + r.covariance - 2.0 * cross).trace();
  return std::max(0.0, value);
}

/// Mean Euclidean distance over matched (text, motion) feature pairs.
inline double mm_dist(const std::vector<Eigen::VectorXd>& text_embeds,
                      const std::vector<Eigen::VectorXd>& motion_embeds) {
  if (text_embeds.size() != motion_embeds.size() || text_embeds.empty()) {
    throw std::invalid_argument("mm_dist: pair count mismatch or empty input");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < text_embeds.size(); ++i) {
    if (text_embeds[i].size() != motion_embeds[i].size()) {
      throw std::invalid_argument("mm_dist: feature dimension mismatch");
    }
    sum += (text_embeds[i] - motion_embeds[i]).norm();
  }
  return sum / static_cast<double>(text_embeds.size());
}

/// Text-to-motion retrieval precision: fraction of text embeddings whose
/// paired motion ranks within the top_k nearest motions. Ties break toward
/// the lower index.
inline double r_precision(const std::vector<Eigen::VectorXd>& text_embeds,
                          const std::vector<Eigen::VectorXd>& motion_embeds, int top_k = 1) {
  const std::size_t n = text_embeds.size();
  if (n != motion_embeds.size() || n < 2) {
    throw std::invalid_argument("r_precision: need equal counts with N >= 2");
  }
  if (top_k < 1 || static_cast<std::size_t>(top_k) >= n) {
    throw std::out_of_range("r_precision: top_k must be in [1, N)");
  }
  double hits = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double paired = (text_embeds[i] - motion_embeds[i]).norm();
    std::size_t rank = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (text_embeds[i] - motion_embeds[j]).norm();
      if (d < paired || (d == paired && j < i)) ++rank;
    }
    if (rank < static_cast<std::size_t>(top_k)) hits += 1.0;
  }
  return hits / static_cast<double>(n);
}

/// Motion feature vector: trunk penultimate activations mean-pooled over
/// frames with compensated summation (permutation-stable). Each frame uses
/// its own end-effector poses as the goal.
inline Eigen::VectorXd motion_features(const PolicyModel& model,
                                       const std::vector<KeypointFrame>& frames,
                                       const std::string& annotation) {
  model.require_initialized();
  if (frames.empty()) throw std::invalid_argument("motion_features: empty frame list");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.config().trunk_hidden);
  Eigen::VectorXd comp = Eigen::VectorXd::Zero(model.config().trunk_hidden);
  for (const KeypointFrame& frame : frames) {
    const Eigen::VectorXd v =
        trunk_penultimate(model, MaskedKeypointFrame(frame), GoalSet::from_frame(frame),
                          annotation);
    const Eigen::VectorXd y = v - comp;
    const Eigen::VectorXd t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(frames.size());
}

inline Eigen::VectorXd motion_features(const PolicyModel& model, const MotionSequence& motion) {
  return motion_features(model, motion.frames, motion.annotation);
}

/// One row of the observation-masking ablation: similarity metrics of
/// predictions made from masked states.
struct AblationRow {
  std::string label;
  double ea_mpjpe = 0.0;
  double ea_mpjoe = 0.0;
  double hs_mpjpe = 0.0;
  double hs_mpjoe = 0.0;
};

inline std::vector<AblationRow> ablation_run(const PolicyModel& model,
                                             const std::vector<TrainingTuple>& tuples,
                                             const std::vector<ObservationMask>& masks) {
  model.require_initialized();
  if (tuples.empty()) throw std::invalid_argument("ablation_run: empty tuple set");
  const JointSubset ea = JointSubset::ea();
  const JointSubset hs = JointSubset::hs();
  std::vector<AblationRow> rows;
  rows.reserve(masks.size());
  for (const ObservationMask& mask : masks) {
    AblationRow row;
    row.label = mask.label;
    for (const TrainingTuple& t : tuples) {
      const KeypointFrame pred = predict(model, apply_mask(t.s, mask), t.g, t.l);
      row.ea_mpjpe += mpjpe(pred, t.a, ea);
      row.ea_mpjoe += mpjoe(pred, t.a, ea);
      row.hs_mpjpe += mpjpe(pred, t.a, hs);
      row.hs_mpjoe += mpjoe(pred, t.a, hs);
    }
    const double n = static_cast<double>(tuples.size());
    row.ea_mpjpe /= n;
    row.ea_mpjoe /= n;
    row.hs_mpjpe /= n;
    row.hs_mpjoe /= n;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json ablation_to_json(const std::vector<AblationRow>& rows) {
  Json j = Json::array();
  for (const AblationRow& r : rows) {
    j.push_back(Json{{"mask", r.label},
                     {"ea", Json{{"mpjpe", r.ea_mpjpe}, {"mpjoe", r.ea_mpjoe}}},
                     {"hs", Json{{"mpjpe", r.hs_mpjpe}, {"mpjoe", r.hs_mpjoe}}}});
  }
  return j;
}

/// Full evaluation report. Appropriateness metrics are computed in this
/// artifact's own embedding space and are not comparable across feature
/// extractors; the notes carry that provenance.
struct EvaluationReport {
  double ea_mpjpe = 0.0;
  double ea_mpjoe = 0.0;
  double hs_mpjpe = 0.0;
  double hs_mpjoe = 0.0;
  std::optional<double> bone_fixed;
  std::optional<double> bone_floating;
  std::optional<double> fmd_value;
  std::optional<double> mm_dist_value;
  std::optional<double> r_precision_top1;
  std::optional<double> r_precision_top2;
  std::optional<double> r_precision_top3;
  std::vector<std::string> notes;
};

inline constexpr const char* kEmbeddingSpaceNote =
    "appropriateness metrics (fmd, mm_dist, r_precision) are computed in this library's own "
    "embedding space; values are only comparable within one embedding space";

inline Json evaluation_report_to_json(const EvaluationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json notes = Json::array();
  for (const std::string& n : r.notes) notes.push_back(n);
  return Json{{"ea", Json{{"mpjpe", r.ea_mpjpe}, {"mpjoe", r.ea_mpjoe}}},
              {"hs", Json{{"mpjpe", r.hs_mpjpe}, {"mpjoe", r.hs_mpjoe}}},
              {"bone_stability", Json{{"fixed", opt(r.bone_fixed)}, {"floating", opt(r.bone_floating)}}},
              {"fmd", opt(r.fmd_value)},
              {"mm_dist", opt(r.mm_dist_value)},
              {"r_precision", Json{{"top1", opt(r.r_precision_top1)},
                                   {"top2", opt(r.r_precision_top2)},
                                   {"top3", opt(r.r_precision_top3)}}},
              {"notes", std::move(notes)}};
}

}  // namespace humotion
