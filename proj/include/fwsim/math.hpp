#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <random>

namespace fwsim {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Deterministic random source. std::mt19937_64 has a pinned bit stream,
/// but the standard distributions do not, so the uniform/normal mappings
/// are spelled out here to keep runs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (pair cached).
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  Vec3 uniform_vec(const Vec3& lo, const Vec3& hi) {
    return {uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()), uniform(lo.z(), hi.z())};
  }

  std::uint64_t next_raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// ZYX (yaw-pitch-roll) Euler angles; the derived view used for the
/// leveling reward and the orientation termination check.
struct EulerZYX {
  double roll = 0.0;   // about body x
  double pitch = 0.0;  // about body y
  double yaw = 0.0;    // about body z
};

inline Quat quat_from_euler_zyx(const EulerZYX& e) {
  return Quat(Eigen::AngleAxisd(e.yaw, Vec3::UnitZ()) *
              Eigen::AngleAxisd(e.pitch, Vec3::UnitY()) *
              Eigen::AngleAxisd(e.roll, Vec3::UnitX()));
}

inline EulerZYX euler_zyx_from_quat(const Quat& q) {
  const Mat3 r = q.normalized().toRotationMatrix();
  EulerZYX e;
  // r20 = -sin(pitch); clamp guards rounding at the gimbal edge.
  e.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  e.roll = std::atan2(r(2, 1), r(2, 2));
  e.yaw = std::atan2(r(1, 0), r(0, 0));
  return e;
}

/// Body-frame angular-velocity quaternion step: q <- q * exp(omega*dt / 2).
inline Quat quat_integrate(const Quat& q, const Vec3& omega_body, double dt) {
  const Vec3 half = 0.5 * omega_body * dt;
  const double angle = half.norm();
  Quat dq;
  if (angle < 1e-12) {
    dq = Quat(1.0, half.x(), half.y(), half.z());
  } else {
    const double s = std::sin(angle) / angle;
    dq = Quat(std::cos(angle), half.x() * s, half.y() * s, half.z() * s);
  }
  return (q * dq).normalized();
}

/// Rotation-vector log of the relative rotation from qa to qb.
inline Vec3 quat_log_between(const Quat& qa, const Quat& qb) {
  Quat d = qa.conjugate() * qb;
  if (d.w() < 0.0) d.coeffs() *= -1.0;
  const Eigen::AngleAxisd aa(d);
  return aa.angle() * aa.axis();
}

inline bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace fwsim
