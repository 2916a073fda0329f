// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gsavatar {

// Right-handed, +Y up, meters. Quaternions are (x, y, z, w) in storage order,
// which is also Eigen's coeffs() order.
using Vec3f = Eigen::Vector3f;
using Vec3d = Eigen::Vector3d;
using Vec2d = Eigen::Vector2d;
using Quatf = Eigen::Quaternionf;
using Quatd = Eigen::Quaterniond;
using Mat3d = Eigen::Matrix3d;
using Mat4d = Eigen::Matrix4d;

/// Back-to-front permutation of splat indices.
using DrawOrder = std::vector<std::uint32_t>;

constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Flips sign so that w >= 0. Negation is exact, so this never perturbs bits
/// beyond the sign.
template <typename Scalar>
Eigen::Quaternion<Scalar> canonicalize(const Eigen::Quaternion<Scalar>& q)
{
  if (q.w() < Scalar(0)) {
    return Eigen::Quaternion<Scalar>(-q.w(), -q.x(), -q.y(), -q.z());
  }
  return q;
}

/// Sign-invariant distance: min(|a - b|, |a + b|) over the 4 coefficients.
template <typename Scalar>
double quat_distance(const Eigen::Quaternion<Scalar>& a, const Eigen::Quaternion<Scalar>& b)
{
  const auto ca = a.coeffs().template cast<double>();
  const auto cb = b.coeffs().template cast<double>();
  return std::min((ca - cb).norm(), (ca + cb).norm());
}

/// Rotation by `angle` radians about +Y.
inline Quatd yaw_rotation(double angle)
{
  return Quatd(Eigen::AngleAxisd(angle, Vec3d::UnitY()));
}

inline Mat4d translation_matrix(const Vec3d& t)
{
  Mat4d m = Mat4d::Identity();
  m.block<3, 1>(0, 3) = t;
  return m;
}

inline Mat4d rotation_matrix(const Quatd& q)
{
  Mat4d m = Mat4d::Identity();
  m.block<3, 3>(0, 0) = q.toRotationMatrix();
  return m;
}

inline Mat4d scale_matrix(double s)
{
  Mat4d m = Mat4d::Identity();
  m(0, 0) = m(1, 1) = m(2, 2) = s;
  return m;
}

}  // namespace gsavatar
