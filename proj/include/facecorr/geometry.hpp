#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <stdexcept>
#include <string>

namespace fc {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

/// Library-wide error for invalid data or geometry.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Rigid motion p -> R*p + t.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  /// Composition: this after `other`.
  RigidTransform compose(const RigidTransform& other) const {
    return {R * other.R, R * other.t + t};
  }
};

inline Mat3 rotation_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

/// Least-squares rigid motion mapping src onto dst (equal counts >= 1):
/// orthogonal factorization of the cross-covariance with determinant
/// correction, so reflections are excluded.
RigidTransform rigid_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

}  // namespace fc
