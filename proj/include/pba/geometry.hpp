#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pba {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Point3 = Eigen::Vector3d;

inline constexpr double kSmallAngle = 1e-8;

/// Tangent-space rigid motion: translational part `v` followed by rotational
/// part `w` (axis-angle, radians).
struct Twist {
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  Twist() = default;
  Twist(const Vec3& v_, const Vec3& w_) : v(v_), w(w_) {}
  explicit Twist(const Vec6& x) : v(x.head<3>()), w(x.tail<3>()) {}

  Vec6 vector() const {
    Vec6 x;
    x << v, w;
    return x;
  }
  Twist operator-() const { return {-v, -w}; }
  bool allFinite() const { return v.allFinite() && w.allFinite(); }
};

/// Rigid transform x' = R x + t. Poses handed to `project` map world
/// coordinates into the camera frame.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& R_, const Vec3& t_) : R(R_), t(t_) {}

  static Pose identity() { return {}; }

  Vec3 operator*(const Vec3& x) const { return R * x + t; }
  Pose operator*(const Pose& o) const { return {R * o.R, R * o.t + t}; }
  Pose inverse() const {
    const Mat3 Rt = R.transpose();
    return {Rt, -Rt * t};
  }

  bool isValid(double tol = 1e-9) const {
    return (R.transpose() * R - Mat3::Identity()).norm() < tol &&
           std::abs(R.determinant() - 1.0) < tol && t.allFinite();
  }
};

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double baseline = 0.0;
};

struct GeometryConfig {
  double min_depth = 1e-3;
  double min_disparity = 0.5;
};

inline Mat3 hat(const Vec3& w) {
  Mat3 W;
  W << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return W;
}

inline Vec3 vee(const Mat3& W) { return {W(2, 1), W(0, 2), W(1, 0)}; }

namespace detail {

// Coefficients of the Rodrigues expansions:
//   A = sin(th)/th, B = (1-cos(th))/th^2, C = (th-sin(th))/th^3
struct RodriguesCoeffs {
  double A, B, C;
};

inline RodriguesCoeffs rodrigues(double theta) {
  const double th2 = theta * theta;
  if (theta < kSmallAngle) {
    return {1.0 - th2 / 6.0, 0.5 - th2 / 24.0, 1.0 / 6.0 - th2 / 120.0};
  }
  const double s = std::sin(0.5 * theta);
  return {std::sin(theta) / theta, 2.0 * s * s / th2, (theta - std::sin(theta)) / (th2 * theta)};
}

}  // namespace detail

inline Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  const auto c = detail::rodrigues(theta);
  const Mat3 W = hat(w);
  return Mat3::Identity() + c.A * W + c.B * W * W;
}

inline Pose se3_exp(const Twist& tw) {
  const double theta = tw.w.norm();
  const auto c = detail::rodrigues(theta);
  const Mat3 W = hat(tw.w);
  const Mat3 W2 = W * W;
  const Mat3 R = Mat3::Identity() + c.A * W + c.B * W2;
  const Mat3 V = Mat3::Identity() + c.B * W + c.C * W2;
  return {R, V * tw.v};
}

class NearPiRotation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Rotation angle of R in [0, pi].
inline double rotation_angle(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double s = 0.5 * vee(R - R.transpose()).norm();
  return std::atan2(s, c);
}

inline Vec3 so3_log(const Mat3& R) {
  const double theta = rotation_angle(R);
  if (theta > M_PI - 1e-6) {
    throw NearPiRotation("so3_log: rotation angle within 1e-6 of pi");
  }
  const Vec3 axis_sin = 0.5 * vee(R - R.transpose());  // sin(th) * axis
  if (theta < kSmallAngle) {
    // sin(th)/th ~ 1 - th^2/6
    return axis_sin / (1.0 - theta * theta / 6.0);
  }
  if (theta > 2.5) {
    // sin(th) is small here; recover the axis from the symmetric part,
    // (R + R^T)/2 = cos(th) I + (1 - cos(th)) a a^T, and the sign from axis_sin.
    const Mat3 aaT = (0.5 * (R + R.transpose()) - std::cos(theta) * Mat3::Identity()) /
                     (1.0 - std::cos(theta));
    Eigen::Index k;
    aaT.diagonal().maxCoeff(&k);
    Vec3 axis = aaT.col(k) / std::sqrt(aaT(k, k));
    if (axis.dot(axis_sin) < 0.0) axis = -axis;
    return axis.normalized() * theta;
  }
  return axis_sin * (theta / std::sin(theta));
}

/// Inverse of se3_exp. Throws NearPiRotation when the rotation angle is
/// within 1e-6 of pi.
inline Twist se3_log(const Pose& p) {
  const Vec3 w = so3_log(p.R);
  const double theta = w.norm();
  const Mat3 W = hat(w);
  // V^-1 = I - W/2 + (1/th^2)(1 - A/(2B)) W^2
  double k;
  if (theta < kSmallAngle) {
    k = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    const auto c = detail::rodrigues(theta);
    k = (1.0 - c.A / (2.0 * c.B)) / (theta * theta);
  }
  const Mat3 Vinv = Mat3::Identity() - 0.5 * W + k * W * W;
  return {Vinv * p.t, w};
}

struct Projection {
  Vec2 uv;
  double depth;
};

/// Pinhole projection of a world point through a world-to-camera pose.
/// Returns nullopt when the camera-frame depth is <= min_depth.
inline std::optional<Projection> project(const Pose& pose, const Intrinsics& K,
                                         const Point3& X,
                                         double min_depth = GeometryConfig{}.min_depth) {
  const Vec3 Xc = pose * X;
  if (!(Xc.z() > min_depth)) return std::nullopt;
  const double iz = 1.0 / Xc.z();
  return Projection{{K.fx * Xc.x() * iz + K.cx, K.fy * Xc.y() * iz + K.cy}, Xc.z()};
}

struct ProjectionJacobian {
  Vec2 uv;
  double depth;
  Mat26 d_pose;   // w.r.t. a left-multiplied twist increment exp(d)*T
  Mat23 d_point;  // w.r.t. the world point
};

inline std::optional<ProjectionJacobian> projection_jacobian(
    const Pose& pose, const Intrinsics& K, const Point3& X,
    double min_depth = GeometryConfig{}.min_depth) {
  const Vec3 Xc = pose * X;
  if (!(Xc.z() > min_depth)) return std::nullopt;
  const double iz = 1.0 / Xc.z();
  const double iz2 = iz * iz;

  Mat23 d_cam;
  d_cam << K.fx * iz, 0.0, -K.fx * Xc.x() * iz2,
           0.0, K.fy * iz, -K.fy * Xc.y() * iz2;

  // d(exp(d)*Xc)/dd at d = 0 is [I | -hat(Xc)]
  Eigen::Matrix<double, 3, 6> d_left;
  d_left.leftCols<3>().setIdentity();
  d_left.rightCols<3>() = -hat(Xc);

  ProjectionJacobian J;
  J.uv = {K.fx * Xc.x() * iz + K.cx, K.fy * Xc.y() * iz + K.cy};
  J.depth = Xc.z();
  J.d_pose = d_cam * d_left;
  J.d_point = d_cam * pose.R;
  return J;
}

/// Back-projects a left-image pixel with the given disparity. The point is
/// returned in world coordinates using `cam_to_world`. Returns nullopt for
/// disparities <= min_disparity.
inline std::optional<Point3> triangulate_stereo(
    const Vec2& px, double disparity, const Intrinsics& K,
    const Pose& cam_to_world = Pose::identity(),
    double min_disparity = GeometryConfig{}.min_disparity) {
  if (!(disparity > min_disparity)) return std::nullopt;
  const double z = K.fx * K.baseline / disparity;
  const Vec3 Xc{(px.x() - K.cx) * z / K.fx, (px.y() - K.cy) * z / K.fy, z};
  return cam_to_world * Xc;
}

/// Geodesic rotation distance (radians) between two poses.
inline double rotation_error(const Pose& a, const Pose& b) {
  return rotation_angle(a.R * b.R.transpose());
}

}  // namespace pba
