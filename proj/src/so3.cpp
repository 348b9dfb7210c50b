#include "legodom/so3.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "legodom/error.hpp"

namespace legodom::so3 {

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return S;
}

Vec3 vee(const Mat3& m) {
  return 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

Rotation exp(const RotationError& theta) {
  const double angle = theta.norm();
  const Mat3 K = skew(theta);
  if (angle < kSmallAngle) {
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(angle) / angle;
  const double b = (1.0 - std::cos(angle)) / (angle * angle);
  return Mat3::Identity() + a * K + b * K * K;
}

RotationError log(const Rotation& R) {
  if (orthonormality_error(R) > kLogInputTolerance) {
    throw Error("so3", "log_so3: input is not orthonormal (||R^T R - I|| > 1e-6)");
  }
  const Vec3 w = vee(R);  // sin(angle) * axis
  const double s = w.norm();
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double angle = std::atan2(s, c);

  if (angle < kSmallAngle) {
    // log(I + K + K^2/2 + ...) ~ vee(R) to second order
    return w;
  }
  if (std::numbers::pi - angle > 1e-3) {
    return (angle / s) * w;
  }

  // Near pi: sin(angle) is small, so recover the axis from the symmetric part.
  // R + R^T = 2 cos I + 2 (1 - cos) a a^T
  const Mat3 aat = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index k = 0;
  aat.diagonal().maxCoeff(&k);
  Vec3 axis = aat.col(k) / std::sqrt(aat(k, k));
  axis.normalize();
  if (axis.dot(w) < 0.0) {
    axis = -axis;
  }
  return angle * axis;
}

Rotation boxplus(const Rotation& R, const RotationError& delta) {
  return renormalize(R * exp(delta));
}

RotationError boxminus(const Rotation& R1, const Rotation& R2) {
  return log(R2.transpose() * R1);
}

double orthonormality_error(const Rotation& R) {
  return (R.transpose() * R - Mat3::Identity()).norm();
}

Rotation project_to_so3(const Rotation& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU();
  const Mat3 V = svd.matrixV();
  if ((U * V.transpose()).determinant() < 0.0) {
    U.col(2) = -U.col(2);
  }
  return U * V.transpose();
}

Rotation renormalize(const Rotation& R) {
  if (orthonormality_error(R) > kOrthonormalTolerance) {
    return project_to_so3(R);
  }
  return R;
}

}  // namespace legodom::so3
