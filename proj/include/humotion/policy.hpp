#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "humotion/dataset.hpp"
#include "humotion/json_util.hpp"
#include "humotion/skeleton.hpp"

namespace humotion {

// Flattened input sizes: 11 keypoints x (3 pos + 4 quat + 1 presence) for the
// state, 3 end-effectors x 7 for the goal.
inline constexpr int kStateScalars = kNumKeypoints * 8;    // 88
inline constexpr int kGoalScalars = 3 * 7;                 // 21
inline constexpr int kProprioScalars = kStateScalars + kGoalScalars;  // 109
inline constexpr int kOutputScalars = kNumKeypoints * 7;   // 77 = 33 pos + 44 quat

struct PolicyConfig {
  int text_dim = 256;     // D_l
  int proprio_dim = 256;  // D_p; must equal text_dim
  int proprio_hidden = 512;
  int text_hidden = 512;
  int trunk_hidden = 512;
  std::uint64_t hash_seed = 0x9E3779B97F4A7C15ull;
  double lambda_rot = 1.0;
};

/// Deterministic signed-hash bag-of-tokens embedding. Lowercased tokens split
/// on non-alphanumerics, each hashed to a bucket with a sign bit; the result
/// is L2-normalized. Empty text maps to the zero vector.
inline Eigen::VectorXd embed_text(const std::string& text, int dim, std::uint64_t seed) {
  if (dim <= 0) throw std::invalid_argument("embed_text: dim must be positive");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  std::uint64_t h = 0;
  bool in_token = false;
  auto flush = [&]() {
    if (!in_token) return;
    v[static_cast<int>(h % static_cast<std::uint64_t>(dim))] += (h >> 63) ? -1.0 : 1.0;
    in_token = false;
  };
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (alnum) {
      if (!in_token) {
        h = 14695981039346656037ull ^ seed;  // FNV-1a offset basis mixed with the seed
        in_token = true;
      }
      h = (h ^ c) * 1099511628211ull;
    } else {
      flush();
    }
  }
  flush();
  const double n = v.norm();
  if (n > 0.0) v /= n;
  return v;
}

enum class Activation { kRelu, kLinear };

struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kLinear;
};

inline constexpr int kNumLayers = 7;
// Layer graph: proprio encoder (0,1), text encoder (2,3), trunk (4,5,6).
// Encoder outputs are concatenated [proprio; text] into the trunk input.
enum LayerIndex {
  kProprio0 = 0,
  kProprio1 = 1,
  kText0 = 2,
  kText1 = 3,
  kTrunk0 = 4,
  kTrunk1 = 5,
  kTrunkOut = 6,
};

/// Feed-forward pose-generation policy. The default-constructed object is an
/// uninitialized sentinel; build one with initialize() or load_checkpoint().
class PolicyModel {
 public:
  PolicyModel() = default;

  static PolicyModel initialize(const PolicyConfig& config, std::uint64_t init_seed) {
    validate_config(config);
    PolicyModel model;
    model.config_ = config;
    Rng rng(init_seed);
    const std::array<std::array<int, 2>, kNumLayers> dims = layer_dims(config);
    const std::array<Activation, kNumLayers> acts = layer_activations();
    for (int i = 0; i < kNumLayers; ++i) {
      Linear layer;
      const int rows = dims[i][0], cols = dims[i][1];
      layer.weight.resize(rows, cols);
      // He-style fan-in scaling keeps activation variance through the ReLU
      // stack; the plain fan-average rule shrinks it layer by layer.
      const double limit = std::sqrt(6.0 / static_cast<double>(cols));
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          layer.weight(r, c) = rng.uniform(-limit, limit);
        }
      }
      layer.bias = Eigen::VectorXd::Zero(rows);
      layer.activation = acts[i];
      model.layers_.push_back(std::move(layer));
    }
    // Start the orientation head at identity quaternions: the renormalization
    // in the head has gradient ~1/|q|, so a near-zero start would make the
    // first steps erratic.
    Eigen::VectorXd& out_bias = model.layers_.back().bias;
    for (int k = 0; k < kNumKeypoints; ++k) {
      out_bias[33 + 4 * k] = 1.0;
    }
    return model;
  }

  bool initialized() const { return layers_.size() == kNumLayers; }
  const PolicyConfig& config() const { return config_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::vector<Linear>& layers() { return layers_; }
  void set_lambda_rot(double lambda) { config_.lambda_rot = lambda; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Linear& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  Eigen::VectorXd embed(const std::string& text) const {
    return embed_text(text, config_.text_dim, config_.hash_seed);
  }

  static std::array<std::array<int, 2>, kNumLayers> layer_dims(const PolicyConfig& c) {
    return {{{c.proprio_hidden, kProprioScalars},
             {c.proprio_dim, c.proprio_hidden},
             {c.text_hidden, c.text_dim},
             {c.text_dim, c.text_hidden},
             {c.trunk_hidden, c.proprio_dim + c.text_dim},
             {c.trunk_hidden, c.trunk_hidden},
             {kOutputScalars, c.trunk_hidden}}};
  }

  static std::array<Activation, kNumLayers> layer_activations() {
    return {Activation::kRelu, Activation::kLinear, Activation::kRelu, Activation::kLinear,
            Activation::kRelu, Activation::kRelu,   Activation::kLinear};
  }

  static void validate_config(const PolicyConfig& c) {
    if (c.text_dim <= 0 || c.proprio_dim <= 0 || c.proprio_hidden <= 0 || c.text_hidden <= 0 ||
        c.trunk_hidden <= 0) {
      throw ConfigError("policy config: all dimensions must be positive");
    }
    if (c.proprio_dim != c.text_dim) {
      throw ConfigError("policy config: proprio_dim must equal text_dim");
    }
  }

  void require_initialized() const {
    if (!initialized()) throw ConfigError("policy model is not initialized");
  }

 private:
  PolicyConfig config_;
  std::vector<Linear> layers_;
};

namespace policy_detail {

/// State flattening: masked keypoints contribute zeros for every scalar,
/// including the stored sentinel pose, so the encoding depends only on the
/// presence flag and the visible poses.
inline void flatten_state(const MaskedKeypointFrame& s, double* out) {
  int k = 0;
  for (KeypointId id : kAllKeypoints) {
    const bool present = s.present[static_cast<std::size_t>(id)];
    const Pose6D& p = s.poses[id];
    if (present) {
      out[k++] = p.position.x();
      out[k++] = p.position.y();
      out[k++] = p.position.z();
      out[k++] = p.orientation.w();
      out[k++] = p.orientation.x();
      out[k++] = p.orientation.y();
      out[k++] = p.orientation.z();
      out[k++] = 1.0;
    } else {
      for (int i = 0; i < 8; ++i) out[k++] = 0.0;
    }
  }
}

inline void flatten_goal(const GoalSet& g, double* out) {
  int k = 0;
  for (const Pose6D* p : {&g.head, &g.l_wrist, &g.r_wrist}) {
    out[k++] = p->position.x();
    out[k++] = p->position.y();
    out[k++] = p->position.z();
    out[k++] = p->orientation.w();
    out[k++] = p->orientation.x();
    out[k++] = p->orientation.y();
    out[k++] = p->orientation.z();
  }
}

inline Eigen::VectorXd proprio_input(const MaskedKeypointFrame& s, const GoalSet& g) {
  Eigen::VectorXd v(kProprioScalars);
  flatten_state(s, v.data());
  flatten_goal(g, v.data() + kStateScalars);
  return v;
}

/// Regression target layout: 33 positions then 44 sign-canonicalized
/// quaternion components, both in canonical keypoint order.
inline Eigen::VectorXd flatten_target(const KeypointFrame& frame) {
  Eigen::VectorXd v(kOutputScalars);
  int k = 0;
  for (KeypointId id : kAllKeypoints) {
    const Eigen::Vector3d& p = frame[id].position;
    v[k++] = p.x();
    v[k++] = p.y();
    v[k++] = p.z();
  }
  for (KeypointId id : kAllKeypoints) {
    const UnitQuaternion q = frame[id].orientation.canonicalized();
    v[k++] = q.w();
    v[k++] = q.x();
    v[k++] = q.y();
    v[k++] = q.z();
  }
  return v;
}

struct ForwardCache {
  Eigen::MatrixXd proprio_in;  // 109 x B
  Eigen::MatrixXd text_in;     // D_l x B
  Eigen::MatrixXd trunk_in;    // (D_p + D_l) x B
  std::array<Eigen::MatrixXd, kNumLayers> z;  // pre-activations
  std::array<Eigen::MatrixXd, kNumLayers> a;  // post-activations
};

inline void apply_layer(const Linear& layer, const Eigen::MatrixXd& input, Eigen::MatrixXd& z,
                        Eigen::MatrixXd& a) {
  z.noalias() = layer.weight * input;
  z.colwise() += layer.bias;
  if (layer.activation == Activation::kRelu) {
    a = z.array().max(0.0).matrix();
  } else {
    a = z;
  }
}

/// Full forward pass; returns the 77 x B output (a[kTrunkOut]).
inline const Eigen::MatrixXd& forward(const PolicyModel& model, const Eigen::MatrixXd& proprio,
                                      const Eigen::MatrixXd& text, ForwardCache& cache) {
  const auto& L = model.layers();
  cache.proprio_in = proprio;
  cache.text_in = text;
  apply_layer(L[kProprio0], cache.proprio_in, cache.z[kProprio0], cache.a[kProprio0]);
  apply_layer(L[kProprio1], cache.a[kProprio0], cache.z[kProprio1], cache.a[kProprio1]);
  apply_layer(L[kText0], cache.text_in, cache.z[kText0], cache.a[kText0]);
  apply_layer(L[kText1], cache.a[kText0], cache.z[kText1], cache.a[kText1]);
  const int dp = static_cast<int>(cache.a[kProprio1].rows());
  const int dl = static_cast<int>(cache.a[kText1].rows());
  cache.trunk_in.resize(dp + dl, proprio.cols());
  cache.trunk_in.topRows(dp) = cache.a[kProprio1];
  cache.trunk_in.bottomRows(dl) = cache.a[kText1];
  apply_layer(L[kTrunk0], cache.trunk_in, cache.z[kTrunk0], cache.a[kTrunk0]);
  apply_layer(L[kTrunk1], cache.a[kTrunk0], cache.z[kTrunk1], cache.a[kTrunk1]);
  apply_layer(L[kTrunkOut], cache.a[kTrunk1], cache.z[kTrunkOut], cache.a[kTrunkOut]);
  return cache.a[kTrunkOut];
}

/// Squared geodesic angle as a function of |<q_hat, q_target>|, with a series
/// branch near 1 where the direct derivative formula is 0/0.
inline double geodesic_sq(double dot_abs, double* derivative) {
  if (dot_abs > 1.0) dot_abs = 1.0;
  if (dot_abs > 1.0 - 1e-7) {
    const double u = 1.0 - dot_abs;
    if (derivative) *derivative = -(8.0 + (8.0 / 3.0) * u + (16.0 / 15.0) * u * u);
    return 8.0 * u + (4.0 / 3.0) * u * u + (16.0 / 45.0) * u * u * u;
  }
  const double ac = std::acos(dot_abs);
  if (derivative) *derivative = -8.0 * ac / std::sqrt(1.0 - dot_abs * dot_abs);
  return 4.0 * ac * ac;
}

struct LossAccumulator {
  double position = 0.0;
  double rotation = 0.0;
};

/// Per-batch composite loss (mean over columns) and, optionally, its gradient
/// with respect to the raw network output.
inline LossAccumulator output_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& targets,
                                   double lambda_rot, Eigen::MatrixXd* dy) {
  const int batch = static_cast<int>(y.cols());
  const double inv_b = 1.0 / static_cast<double>(batch);
  const double inv_k = 1.0 / static_cast<double>(kNumKeypoints);
  LossAccumulator acc;
  if (dy) dy->setZero(y.rows(), y.cols());
  for (int j = 0; j < batch; ++j) {
    for (int i = 0; i < kNumKeypoints; ++i) {
      const int base = 3 * i;
      const Eigen::Vector3d diff = y.block<3, 1>(base, j) - targets.block<3, 1>(base, j);
      acc.position += inv_b * inv_k * diff.squaredNorm();
      if (dy) dy->block<3, 1>(base, j) += (2.0 * inv_b * inv_k) * diff;
    }
    for (int i = 0; i < kNumKeypoints; ++i) {
      const int base = 33 + 4 * i;
      const Eigen::Vector4d q = y.block<4, 1>(base, j);
      const Eigen::Vector4d t = targets.block<4, 1>(base, j);
      const double n = q.norm();
      if (n < 1e-9) {
        // Degenerate head output: treated as identity with zero gradient.
        const double dot_abs = std::min(1.0, std::abs(t[0]));
        acc.rotation += inv_b * inv_k * geodesic_sq(dot_abs, nullptr);
        continue;
      }
      const Eigen::Vector4d qh = q / n;
      const double dot = qh.dot(t);
      double dfdd = 0.0;
      acc.rotation += inv_b * inv_k * geodesic_sq(std::abs(dot), dy ? &dfdd : nullptr);
      if (dy) {
        const double sign = dot < 0.0 ? -1.0 : 1.0;
        const Eigen::Vector4d ddot_dq = (t - qh * dot) / n;
        dy->block<4, 1>(base, j) +=
            (lambda_rot * inv_b * inv_k * dfdd * sign) * ddot_dq;
      }
    }
  }
  return acc;
}

struct Gradients {
  std::array<Eigen::MatrixXd, kNumLayers> weight;
  std::array<Eigen::VectorXd, kNumLayers> bias;

  void init_like(const PolicyModel& model) {
    for (int i = 0; i < kNumLayers; ++i) {
      weight[i].setZero(model.layers()[i].weight.rows(), model.layers()[i].weight.cols());
      bias[i].setZero(model.layers()[i].bias.size());
    }
  }
};

inline Eigen::MatrixXd relu_backward(const Eigen::MatrixXd& upstream, const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).select(upstream, 0.0);
}

inline void backward(const PolicyModel& model, const ForwardCache& cache,
                     const Eigen::MatrixXd& dy, Gradients& grads) {
  const auto& L = model.layers();
  // Trunk.
  const Eigen::MatrixXd& dz6 = dy;  // linear output head
  grads.weight[kTrunkOut].noalias() = dz6 * cache.a[kTrunk1].transpose();
  grads.bias[kTrunkOut] = dz6.rowwise().sum();
  Eigen::MatrixXd dz5 = relu_backward(L[kTrunkOut].weight.transpose() * dz6, cache.z[kTrunk1]);
  grads.weight[kTrunk1].noalias() = dz5 * cache.a[kTrunk0].transpose();
  grads.bias[kTrunk1] = dz5.rowwise().sum();
  Eigen::MatrixXd dz4 = relu_backward(L[kTrunk1].weight.transpose() * dz5, cache.z[kTrunk0]);
  grads.weight[kTrunk0].noalias() = dz4 * cache.trunk_in.transpose();
  grads.bias[kTrunk0] = dz4.rowwise().sum();
  const Eigen::MatrixXd d_trunk_in = L[kTrunk0].weight.transpose() * dz4;
  const int dp = static_cast<int>(cache.a[kProprio1].rows());
  const int dl = static_cast<int>(cache.a[kText1].rows());
  // Proprio encoder.
  const Eigen::MatrixXd dz1 = d_trunk_in.topRows(dp);  // linear encoder output
  grads.weight[kProprio1].noalias() = dz1 * cache.a[kProprio0].transpose();
  grads.bias[kProprio1] = dz1.rowwise().sum();
  Eigen::MatrixXd dz0 = relu_backward(L[kProprio1].weight.transpose() * dz1, cache.z[kProprio0]);
  grads.weight[kProprio0].noalias() = dz0 * cache.proprio_in.transpose();
  grads.bias[kProprio0] = dz0.rowwise().sum();
  // Text encoder.
  const Eigen::MatrixXd dz3 = d_trunk_in.bottomRows(dl);
  grads.weight[kText1].noalias() = dz3 * cache.a[kText0].transpose();
  grads.bias[kText1] = dz3.rowwise().sum();
  Eigen::MatrixXd dz2 = relu_backward(L[kText1].weight.transpose() * dz3, cache.z[kText0]);
  grads.weight[kText0].noalias() = dz2 * cache.text_in.transpose();
  grads.bias[kText0] = dz2.rowwise().sum();
}

inline KeypointFrame output_to_frame(const Eigen::VectorXd& y) {
  KeypointFrame frame;
  for (int i = 0; i < kNumKeypoints; ++i) {
    const KeypointId id = kAllKeypoints[static_cast<std::size_t>(i)];
    frame[id].position = Eigen::Vector3d(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
    const int base = 33 + 4 * i;
    const double w = y[base], x = y[base + 1], yy = y[base + 2], zz = y[base + 3];
    const double n = std::sqrt(w * w + x * x + yy * yy + zz * zz);
    frame[id].orientation =
        n < 1e-9 ? UnitQuaternion::identity() : UnitQuaternion(w, x, yy, zz);
  }
  return frame;
}

}  // namespace policy_detail

/// Aligned policy input: encoded proprioception (state + goal) concatenated
/// with the encoded context text, dimension D_p + D_l.
inline Eigen::VectorXd align_inputs(const MaskedKeypointFrame& s, const GoalSet& g,
                                    const std::string& l, const PolicyModel& model) {
  model.require_initialized();
  policy_detail::ForwardCache cache;
  policy_detail::forward(model, policy_detail::proprio_input(s, g), model.embed(l), cache);
  const int dp = model.config().proprio_dim;
  const int dl = model.config().text_dim;
  Eigen::VectorXd out(dp + dl);
  out.head(dp) = cache.a[kProprio1].col(0);
  out.tail(dl) = cache.a[kText1].col(0);
  return out;
}

/// Generates the full 11-keypoint action frame for (s, g, l). Output
/// quaternions are renormalized; a near-zero orientation head falls back to
/// identity so the frame is always valid.
inline KeypointFrame predict(const PolicyModel& model, const MaskedKeypointFrame& s,
                             const GoalSet& g, const std::string& l) {
  model.require_initialized();
  // Reused workspace: repeated single-sample inference is allocation-free.
  static thread_local policy_detail::ForwardCache cache;
  const Eigen::MatrixXd& y =
      policy_detail::forward(model, policy_detail::proprio_input(s, g), model.embed(l), cache);
  for (int i = 0; i < kNumLayers; ++i) {
    if (!cache.a[i].allFinite()) {
      throw NumericError("policy forward: non-finite activations at layer " + std::to_string(i));
    }
  }
  return policy_detail::output_to_frame(y.col(0));
}

inline KeypointFrame predict(const PolicyModel& model, const KeypointFrame& s, const GoalSet& g,
                             const std::string& l) {
  return predict(model, MaskedKeypointFrame(s), g, l);
}

struct LossValue {
  double total = 0.0;
  double position = 0.0;
  double rotation = 0.0;
};

/// Composite pose loss: mean squared position error plus lambda_rot times the
/// mean squared geodesic angle, both over the 11 keypoints.
inline LossValue loss(const KeypointFrame& prediction, const KeypointFrame& target,
                      double lambda_rot = 1.0) {
  LossValue v;
  for (KeypointId id : kAllKeypoints) {
    v.position += (prediction[id].position - target[id].position).squaredNorm();
    const double angle = quat_geodesic_distance(prediction[id].orientation, target[id].orientation);
    v.rotation += angle * angle;
  }
  v.position /= kNumKeypoints;
  v.rotation /= kNumKeypoints;
  v.total = v.position + lambda_rot * v.rotation;
  return v;
}

struct TrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 1e-3;  // step size
  double beta1 = 0.9;           // first-moment decay of the adaptive update
  double beta2 = 0.999;         // second-moment decay
  std::uint64_t seed = 1;
  double lambda_rot = 1.0;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_position_loss;
  std::vector<double> epoch_rotation_loss;
  std::uint64_t seed = 0;
  LossValue final_validation;
  bool diverged = false;
};

namespace policy_detail {

struct PreparedData {
  Eigen::MatrixXd proprio;  // 109 x N
  Eigen::MatrixXd text;     // D_l x N
  Eigen::MatrixXd target;   // 77 x N
};

inline PreparedData prepare(const PolicyModel& model, const std::vector<TrainingTuple>& tuples) {
  PreparedData d;
  const int n = static_cast<int>(tuples.size());
  d.proprio.resize(kProprioScalars, n);
  d.text.resize(model.config().text_dim, n);
  d.target.resize(kOutputScalars, n);
  std::map<std::string, Eigen::VectorXd> embed_cache;
  for (int i = 0; i < n; ++i) {
    const TrainingTuple& t = tuples[static_cast<std::size_t>(i)];
    d.proprio.col(i) = proprio_input(MaskedKeypointFrame(t.s), t.g);
    auto it = embed_cache.find(t.l);
    if (it == embed_cache.end()) {
      it = embed_cache.emplace(t.l, model.embed(t.l)).first;
    }
    d.text.col(i) = it->second;
    d.target.col(i) = flatten_target(t.a);
  }
  return d;
}

inline LossValue mean_loss(const PolicyModel& model, const PreparedData& data,
                           double lambda_rot) {
  const int n = static_cast<int>(data.proprio.cols());
  LossValue v;
  if (n == 0) return v;
  ForwardCache cache;
  const int chunk = 256;
  double pos = 0.0, rot = 0.0;
  for (int start = 0; start < n; start += chunk) {
    const int b = std::min(chunk, n - start);
    const Eigen::MatrixXd& y = forward(model, data.proprio.middleCols(start, b),
                                       data.text.middleCols(start, b), cache);
    const LossAccumulator acc =
        output_loss(y, data.target.middleCols(start, b), lambda_rot, nullptr);
    pos += acc.position * b;
    rot += acc.rotation * b;
  }
  v.position = pos / n;
  v.rotation = rot / n;
  v.total = v.position + lambda_rot * v.rotation;
  return v;
}

}  // namespace policy_detail

/// Mini-batch gradient descent with adaptive per-parameter steps (Adam-style
/// first/second moment estimates) on the composite pose loss. A fixed seed
/// gives a bitwise-reproducible weight trajectory. Divergence (non-finite or
/// > 1e6 batch loss) aborts with the report so far.
inline TrainReport train(PolicyModel& model, const std::vector<TrainingTuple>& tuples,
                         const TrainConfig& config,
                         const std::vector<TrainingTuple>& validation = {}) {
  using namespace policy_detail;
  model.require_initialized();
  if (tuples.empty()) throw std::invalid_argument("train: empty tuple set");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  model.set_lambda_rot(config.lambda_rot);

  TrainReport report;
  report.seed = config.seed;
  const PreparedData data = prepare(model, tuples);
  const int n = static_cast<int>(tuples.size());

  Rng rng(config.seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  Gradients grads, moment1, moment2;
  grads.init_like(model);
  moment1.init_like(model);
  moment2.init_like(model);
  ForwardCache cache;
  Eigen::MatrixXd batch_p, batch_t, batch_y_grad, batch_target;
  constexpr double kEps = 1e-8;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates shuffle driven by the run RNG.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double epoch_pos = 0.0, epoch_rot = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int b = std::min(config.batch_size, n - start);
      batch_p.resize(kProprioScalars, b);
      batch_t.resize(model.config().text_dim, b);
      batch_target.resize(kOutputScalars, b);
      for (int k = 0; k < b; ++k) {
        const int src = order[static_cast<std::size_t>(start + k)];
        batch_p.col(k) = data.proprio.col(src);
        batch_t.col(k) = data.text.col(src);
        batch_target.col(k) = data.target.col(src);
      }
      const Eigen::MatrixXd& y = forward(model, batch_p, batch_t, cache);
      const LossAccumulator acc = output_loss(y, batch_target, config.lambda_rot, &batch_y_grad);
      const double batch_loss = acc.position + config.lambda_rot * acc.rotation;
      if (!std::isfinite(batch_loss) || batch_loss > 1e6) {
        report.diverged = true;
        report.final_validation =
            mean_loss(model, validation.empty() ? data : prepare(model, validation),
                      config.lambda_rot);
        return report;
      }
      epoch_pos += acc.position * b;
      epoch_rot += acc.rotation * b;
      backward(model, cache, batch_y_grad, grads);
      ++step;
      const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      const double rate = config.learning_rate * std::sqrt(correction2) / correction1;
      for (int i = 0; i < kNumLayers; ++i) {
        moment1.weight[i] = config.beta1 * moment1.weight[i] + (1.0 - config.beta1) * grads.weight[i];
        moment2.weight[i] = config.beta2 * moment2.weight[i] +
                            (1.0 - config.beta2) * grads.weight[i].cwiseProduct(grads.weight[i]);
        model.layers()[static_cast<std::size_t>(i)].weight.array() -=
            rate * moment1.weight[i].array() / (moment2.weight[i].array().sqrt() + kEps);
        moment1.bias[i] = config.beta1 * moment1.bias[i] + (1.0 - config.beta1) * grads.bias[i];
        moment2.bias[i] = config.beta2 * moment2.bias[i] +
                          (1.0 - config.beta2) * grads.bias[i].cwiseProduct(grads.bias[i]);
        model.layers()[static_cast<std::size_t>(i)].bias.array() -=
            rate * moment1.bias[i].array() / (moment2.bias[i].array().sqrt() + kEps);
      }
    }
    const double mean_pos = epoch_pos / n;
    const double mean_rot = epoch_rot / n;
    report.epoch_position_loss.push_back(mean_pos);
    report.epoch_rotation_loss.push_back(mean_rot);
    report.epoch_loss.push_back(mean_pos + config.lambda_rot * mean_rot);
  }
  report.final_validation = mean_loss(
      model, validation.empty() ? data : prepare(model, validation), config.lambda_rot);
  return report;
}

/// Compares analytic gradients against central finite differences on a random
/// 1% parameter subset (at least 25 parameters). Returns the maximum relative
/// error; deterministic for a fixed seed.
inline double gradient_check(const PolicyModel& model, const TrainingTuple& tuple, double epsilon,
                             std::uint64_t seed = 0x5EEDull) {
  using namespace policy_detail;
  model.require_initialized();
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw std::out_of_range("gradient_check: epsilon outside [1e-7, 1e-3]");
  }
  const double lambda = model.config().lambda_rot;
  PolicyModel work = model;
  const Eigen::MatrixXd proprio = proprio_input(MaskedKeypointFrame(tuple.s), tuple.g);
  const Eigen::MatrixXd text = work.embed(tuple.l);
  const Eigen::MatrixXd target = flatten_target(tuple.a);

  ForwardCache cache;
  Eigen::MatrixXd dy;
  const Eigen::MatrixXd& y0 = forward(work, proprio, text, cache);
  output_loss(y0, target, lambda, &dy);
  Gradients grads;
  grads.init_like(work);
  backward(work, cache, dy, grads);

  const std::size_t total = work.parameter_count();
  std::size_t n_check = std::max<std::size_t>(25, total / 100);
  if (n_check > total) n_check = total;
  Rng rng(seed);
  std::set<std::size_t> chosen;
  while (chosen.size() < n_check) {
    chosen.insert(static_cast<std::size_t>(rng.below(total)));
  }

  auto locate = [&](std::size_t flat) -> std::pair<double*, double> {
    // Returns (parameter address, analytic gradient), scanning layers in order:
    // weights row-major, then bias.
    for (int i = 0; i < kNumLayers; ++i) {
      Linear& layer = work.layers()[static_cast<std::size_t>(i)];
      const std::size_t wn = static_cast<std::size_t>(layer.weight.size());
      if (flat < wn) {
        const int r = static_cast<int>(flat / static_cast<std::size_t>(layer.weight.cols()));
        const int c = static_cast<int>(flat % static_cast<std::size_t>(layer.weight.cols()));
        return {&layer.weight(r, c), grads.weight[i](r, c)};
      }
      flat -= wn;
      const std::size_t bn = static_cast<std::size_t>(layer.bias.size());
      if (flat < bn) {
        const int r = static_cast<int>(flat);
        return {&layer.bias(r), grads.bias[i](r)};
      }
      flat -= bn;
    }
    throw std::logic_error("gradient_check: parameter index out of range");
  };

  auto eval = [&]() {
    const Eigen::MatrixXd& y = forward(work, proprio, text, cache);
    const LossAccumulator acc = output_loss(y, target, lambda, nullptr);
    return acc.position + lambda * acc.rotation;
  };

  double max_rel = 0.0;
  for (std::size_t flat : chosen) {
    auto [addr, analytic] = locate(flat);
    const double saved = *addr;
    *addr = saved + epsilon;
    const double up = eval();
    *addr = saved - epsilon;
    const double down = eval();
    *addr = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double rel =
        std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-4);
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

// --- checkpoint format -------------------------------------------------------
//
// {"config": {...}, "layers": [{"rows", "cols", "w": [row-major], "b": [...]},
//  ...], "hash_seed": uint64, "lambda_rot": double}

inline Json checkpoint_to_json(const PolicyModel& model) {
  model.require_initialized();
  const PolicyConfig& c = model.config();
  Json layers = Json::array();
  for (const Linear& l : model.layers()) {
    Json w = Json::array();
    for (int r = 0; r < l.weight.rows(); ++r) {
      for (int col = 0; col < l.weight.cols(); ++col) w.push_back(l.weight(r, col));
    }
    Json b = Json::array();
    for (int r = 0; r < l.bias.size(); ++r) b.push_back(l.bias(r));
    layers.push_back(Json{{"rows", l.weight.rows()},
                          {"cols", l.weight.cols()},
                          {"w", std::move(w)},
                          {"b", std::move(b)}});
  }
  return Json{{"config",
               Json{{"text_dim", c.text_dim},
                    {"proprio_dim", c.proprio_dim},
                    {"proprio_hidden", c.proprio_hidden},
                    {"text_hidden", c.text_hidden},
                    {"trunk_hidden", c.trunk_hidden}}},
              {"layers", std::move(layers)},
              {"hash_seed", c.hash_seed},
              {"lambda_rot", c.lambda_rot}};
}

inline PolicyModel checkpoint_from_json(const Json& j) {
  for (const char* key : {"config", "layers", "hash_seed", "lambda_rot"}) {
    if (!j.contains(key)) throw ParseError(std::string("checkpoint: missing field '") + key + "'");
  }
  PolicyConfig c;
  const Json& jc = j.at("config");
  c.text_dim = jc.at("text_dim").get<int>();
  c.proprio_dim = jc.at("proprio_dim").get<int>();
  c.proprio_hidden = jc.at("proprio_hidden").get<int>();
  c.text_hidden = jc.at("text_hidden").get<int>();
  c.trunk_hidden = jc.at("trunk_hidden").get<int>();
  c.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  c.lambda_rot = j.at("lambda_rot").get<double>();
  PolicyModel model = PolicyModel::initialize(c, 0);
  const auto dims = PolicyModel::layer_dims(c);
  const Json& layers = j.at("layers");
  if (!layers.is_array() || layers.size() != kNumLayers) {
    throw ConfigError("checkpoint: expected " + std::to_string(kNumLayers) + " layers");
  }
  for (int i = 0; i < kNumLayers; ++i) {
    const Json& jl = layers[static_cast<std::size_t>(i)];
    const int rows = jl.at("rows").get<int>();
    const int cols = jl.at("cols").get<int>();
    if (rows != dims[static_cast<std::size_t>(i)][0] || cols != dims[static_cast<std::size_t>(i)][1]) {
      throw ConfigError("checkpoint: layer " + std::to_string(i) + " dimensions " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        " do not match the config");
    }
    const Json& w = jl.at("w");
    const Json& b = jl.at("b");
    if (static_cast<int>(w.size()) != rows * cols || static_cast<int>(b.size()) != rows) {
      throw ConfigError("checkpoint: layer " + std::to_string(i) + " parameter count mismatch");
    }
    Linear& layer = model.layers()[static_cast<std::size_t>(i)];
    std::size_t k = 0;
    for (int r = 0; r < rows; ++r) {
      for (int col = 0; col < cols; ++col) layer.weight(r, col) = w[k++].get<double>();
    }
    for (int r = 0; r < rows; ++r) layer.bias(r) = b[static_cast<std::size_t>(r)].get<double>();
  }
  return model;
}

inline void save_checkpoint(const PolicyModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
  out << checkpoint_to_json(model).dump() << "\n";
}

inline PolicyModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Trunk penultimate activations for one (s, g, l) input; the motion feature
/// primitive used by the evaluation metrics.
inline Eigen::VectorXd trunk_penultimate(const PolicyModel& model, const MaskedKeypointFrame& s,
                                         const GoalSet& g, const std::string& l) {
  model.require_initialized();
  policy_detail::ForwardCache cache;
  policy_detail::forward(model, policy_detail::proprio_input(s, g), model.embed(l), cache);
  return cache.a[kTrunk1].col(0);
}

/// Text-encoder output for annotation `l` (the text feature primitive).
inline Eigen::VectorXd text_features(const PolicyModel& model, const std::string& l) {
  model.require_initialized();
  const auto& layers = model.layers();
  Eigen::MatrixXd z, a, z2, a2;
  policy_detail::apply_layer(layers[kText0], model.embed(l), z, a);
  policy_detail::apply_layer(layers[kText1], a, z2, a2);
  return a2.col(0);
}

}  // namespace humotion
