#pragma once

#include <Eigen/Core>

namespace legodom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation matrix (body to world). Orthonormal with det +1.
using Rotation = Eigen::Matrix3d;

/// Rotation-vector perturbation in radians.
using RotationError = Eigen::Vector3d;

namespace so3 {

inline constexpr double kSmallAngle = 1e-8;
inline constexpr double kOrthonormalTolerance = 1e-9;
inline constexpr double kLogInputTolerance = 1e-6;

/// Skew-symmetric matrix such that skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Inverse of skew() on the antisymmetric part of m.
Vec3 vee(const Mat3& m);

/// Rodrigues formula; second-order Taylor expansion below kSmallAngle.
Rotation exp(const RotationError& theta);

/// Principal logarithm, ||result|| <= pi. Throws legodom::Error when
/// ||R^T R - I||_F exceeds kLogInputTolerance.
RotationError log(const Rotation& R);

/// Right (body-frame) retraction: R * exp(delta).
Rotation boxplus(const Rotation& R, const RotationError& delta);

/// log(R2^T R1), so that boxplus(R2, boxminus(R1, R2)) == R1.
RotationError boxminus(const Rotation& R1, const Rotation& R2);

/// ||R^T R - I||_F
double orthonormality_error(const Rotation& R);

/// Nearest rotation in the Frobenius sense (polar decomposition).
Rotation project_to_so3(const Rotation& R);

/// Projects only when orthonormality_error(R) > kOrthonormalTolerance.
Rotation renormalize(const Rotation& R);

}  // namespace so3
}  // namespace legodom
