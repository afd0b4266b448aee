#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "humotion/common.hpp"

namespace humotion {

/// Unit quaternion stored as (w, x, y, z). Normalized on construction;
/// q and -q denote the same rotation and every distance operation is
/// sign-invariant.
class UnitQuaternion {
 public:
  UnitQuaternion() : w_(1.0), x_(0.0), y_(0.0), z_(0.0) {}

  UnitQuaternion(double w, double x, double y, double z) : w_(w), x_(x), y_(y), z_(z) {
    if (!std::isfinite(w) || !std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw std::invalid_argument("UnitQuaternion: non-finite component");
    }
    const double n = std::sqrt(w_ * w_ + x_ * x_ + y_ * y_ + z_ * z_);
    if (n < 1e-12) {
      throw std::invalid_argument("UnitQuaternion: zero norm");
    }
    // Skip the division when already unit to the last bit, so value round
    // trips (file -> memory -> file) are exact.
    if (std::abs(n - 1.0) > 1e-12) {
      w_ /= n;
      x_ /= n;
      y_ /= n;
      z_ /= n;
    }
  }

  static UnitQuaternion identity() { return UnitQuaternion(); }

  /// Rotation of `angle` radians about `axis` (need not be unit length).
  static UnitQuaternion from_axis_angle(const Eigen::Vector3d& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-12) {
      throw std::invalid_argument("from_axis_angle: zero axis");
    }
    const double h = 0.5 * angle;
    const double s = std::sin(h) / n;
    return UnitQuaternion(std::cos(h), axis.x() * s, axis.y() * s, axis.z() * s);
  }

  double w() const { return w_; }
  double x() const { return x_; }
  double y() const { return y_; }
  double z() const { return z_; }

  double dot(const UnitQuaternion& o) const {
    return w_ * o.w_ + x_ * o.x_ + y_ * o.y_ + z_ * o.z_;
  }

  UnitQuaternion conjugate() const {
    UnitQuaternion q;
    q.w_ = w_;
    q.x_ = -x_;
    q.y_ = -y_;
    q.z_ = -z_;
    return q;
  }
  UnitQuaternion inverse() const { return conjugate(); }

  /// Hamilton product: (*this) followed-by-nothing convention, i.e. the
  /// composed rotation applies `o` first, then this.
  UnitQuaternion operator*(const UnitQuaternion& o) const {
    return UnitQuaternion(w_ * o.w_ - x_ * o.x_ - y_ * o.y_ - z_ * o.z_,
                          w_ * o.x_ + x_ * o.w_ + y_ * o.z_ - z_ * o.y_,
                          w_ * o.y_ - x_ * o.z_ + y_ * o.w_ + z_ * o.x_,
                          w_ * o.z_ + x_ * o.y_ - y_ * o.x_ + z_ * o.w_);
  }

  Eigen::Vector3d rotate(const Eigen::Vector3d& v) const {
    // v' = v + 2 u x (u x v + w v), u = (x, y, z)
    const Eigen::Vector3d u(x_, y_, z_);
    const Eigen::Vector3d t = 2.0 * u.cross(v);
    return v + w_ * t + u.cross(t);
  }

  UnitQuaternion negated() const {
    UnitQuaternion q;
    q.w_ = -w_;
    q.x_ = -x_;
    q.y_ = -y_;
    q.z_ = -z_;
    return q;
  }

  /// Sign-canonical form: w >= 0, ties broken by first nonzero component positive.
  UnitQuaternion canonicalized() const {
    if (w_ > 0.0) return *this;
    if (w_ < 0.0) return negated();
    if (x_ != 0.0) return x_ > 0.0 ? *this : negated();
    if (y_ != 0.0) return y_ > 0.0 ? *this : negated();
    return z_ >= 0.0 ? *this : negated();
  }

  /// Rotation-vector (axis * angle) of this rotation, angle in [0, pi].
  Eigen::Vector3d to_rotation_vector() const {
    const UnitQuaternion q = canonicalized();
    const Eigen::Vector3d v(q.x_, q.y_, q.z_);
    const double vn = v.norm();
    if (vn < 1e-12) {
      return 2.0 * v;  // small-angle: theta * axis ~ 2 v / w, w ~ 1
    }
    const double angle = 2.0 * std::atan2(vn, q.w_);
    return v * (angle / vn);
  }

 private:
  double w_, x_, y_, z_;
};

/// One keypoint's 6D pose: position in meters plus orientation.
struct Pose6D {
  Eigen::Vector3d position{0.0, 0.0, 0.0};
  UnitQuaternion orientation;

  Pose6D() = default;
  Pose6D(const Eigen::Vector3d& p, const UnitQuaternion& q) : position(p), orientation(q) {
    if (!p.allFinite()) {
      throw std::invalid_argument("Pose6D: non-finite position");
    }
  }

  static Pose6D identity() { return Pose6D(); }

  /// Rigid composition: this * other (other expressed in this frame).
  Pose6D operator*(const Pose6D& other) const {
    Pose6D out;
    out.position = position + orientation.rotate(other.position);
    out.orientation = orientation * other.orientation;
    return out;
  }
};

/// Geodesic angle between two rotations: 2 acos(|<a,b>|), in [0, pi].
/// Symmetric and sign-invariant. Evaluated through the chordal distance
/// (theta = 4 asin(c/2), c = min(|a-b|, |a+b|)), which is exact for identical
/// inputs where acos of the dot product loses eight digits.
inline double quat_geodesic_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
  auto sq = [](double v) { return v * v; };
  const double dm = sq(a.w() - b.w()) + sq(a.x() - b.x()) + sq(a.y() - b.y()) + sq(a.z() - b.z());
  const double dp = sq(a.w() + b.w()) + sq(a.x() + b.x()) + sq(a.y() + b.y()) + sq(a.z() + b.z());
  const double chord = std::sqrt(std::min(dm, dp));
  if (!std::isfinite(chord)) {
    throw std::invalid_argument("quat_geodesic_distance: non-finite input");
  }
  return 4.0 * std::asin(std::min(1.0, 0.5 * chord));
}

/// Shortest-arc constant-angular-velocity interpolation between two rotations.
/// Falls back to normalized linear interpolation when the rotations are nearly
/// identical (|dot| > 1 - 1e-9) where the slerp denominator vanishes.
inline UnitQuaternion quat_slerp(const UnitQuaternion& a, const UnitQuaternion& b, double t) {
  double d = a.dot(b);
  UnitQuaternion end = b;
  if (d < 0.0) {
    end = b.negated();
    d = -d;
  }
  if (d > 1.0 - 1e-9) {
    // nlerp
    return UnitQuaternion((1.0 - t) * a.w() + t * end.w(), (1.0 - t) * a.x() + t * end.x(),
                          (1.0 - t) * a.y() + t * end.y(), (1.0 - t) * a.z() + t * end.z());
  }
  const double theta = std::acos(d);
  const double s = std::sin(theta);
  const double wa = std::sin((1.0 - t) * theta) / s;
  const double wb = std::sin(t * theta) / s;
  return UnitQuaternion(wa * a.w() + wb * end.w(), wa * a.x() + wb * end.x(),
                        wa * a.y() + wb * end.y(), wa * a.z() + wb * end.z());
}

/// SE(3) interpolation: linear in position, shortest-arc in orientation.
/// t=0 returns `a` exactly, t=1 returns `b` exactly.
inline Pose6D se3_interpolate(const Pose6D& a, const Pose6D& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::out_of_range("se3_interpolate: t outside [0,1]");
  }
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  Pose6D out;
  out.position = (1.0 - t) * a.position + t * b.position;
  out.orientation = quat_slerp(a.orientation, b.orientation, t);
  return out;
}

/// One step of the SE(3) smoothing filter applied to a retargeting target:
/// blends the previous pose toward the raw target by `alpha`. alpha=1 is
/// pass-through.
inline Pose6D se3_filter_step(const Pose6D& previous, const Pose6D& raw_target, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw std::out_of_range("se3_filter_step: alpha outside (0,1]");
  }
  // Fixed point: a target already reached stays put for every alpha.
  const UnitQuaternion& p = previous.orientation;
  const UnitQuaternion& r = raw_target.orientation;
  const bool same_rot = (p.w() == r.w() && p.x() == r.x() && p.y() == r.y() && p.z() == r.z()) ||
                        (p.w() == -r.w() && p.x() == -r.x() && p.y() == -r.y() && p.z() == -r.z());
  if (same_rot && previous.position == raw_target.position) {
    return previous;
  }
  return se3_interpolate(previous, raw_target, alpha);
}

}  // namespace humotion
