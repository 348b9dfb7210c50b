#pragma once

#include <array>
#include <string_view>

#include "legodom/so3.hpp"

namespace legodom {

inline constexpr int kNumLegs = 4;

/// Leg order used throughout: LF, RF, LH, RH (labels 1..4 in messages).
enum class LegId : int { LF = 0, RF = 1, LH = 2, RH = 3 };

std::string_view leg_name(int leg_index);

/// Parses "LF"/"RF"/"LH"/"RH"; throws legodom::Error otherwise.
int leg_index_from_name(std::string_view name);

/// Geometry of one 3-DoF leg: abduction about body x, then hip and knee
/// pitch about the (rotated) y axis.
struct LegParams {
  int index = 0;
  Vec3 hip_offset = Vec3::Zero();
  double l1 = 0.083;  // abduction link, m
  double l2 = 0.25;   // thigh, m
  double l3 = 0.25;   // shank, m
  double side_sign = 1.0;  // +1 left, -1 right
  double foot_radius = 0.02;

  void validate() const;
};

/// Canonical mid-size quadruped: hips at (+-0.24, +-0.05, 0).
std::array<LegParams, kNumLegs> default_legs();

struct JointState {
  Vec3 angles = Vec3::Zero();  // rad
  Vec3 rates = Vec3::Zero();   // rad/s
};

namespace kinematics {

/// Foot-sphere center in the body frame.
Vec3 forward(const Vec3& angles, const LegParams& leg);

/// d forward / d angles.
Mat3 jacobian(const Vec3& angles, const LegParams& leg);

/// Joint axes expressed in the body frame (columns).
Mat3 rotational_jacobian(const Vec3& angles);

/// Orientation of the shank/foot frame relative to the body.
Rotation foot_orientation(const Vec3& angles);

/// World-frame foot angular velocity R_body * (body_rate + J_rot * rates).
Vec3 foot_angular_velocity(const JointState& joints, const Vec3& body_rate,
                           const Rotation& R_body);

/// Contact-point velocity of a rolling foot: omega_f x r.
inline Vec3 rolling_velocity(const Vec3& foot_omega, const Vec3& radius) {
  return foot_omega.cross(radius);
}

/// Radius vector from the foot-sphere center to the contact point on a
/// surface with unit normal n.
inline Vec3 contact_radius(double foot_radius, const Vec3& normal = Vec3::UnitZ()) {
  return -foot_radius * normal;
}

/// Knee-backward (angles.z() <= 0) solution. Throws legodom::Error with
/// kind "workspace" when the target is unreachable.
Vec3 inverse(const Vec3& foot_body, const LegParams& leg);

}  // namespace kinematics
}  // namespace legodom
