#include "legodom/leg_kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "legodom/error.hpp"

namespace legodom {

namespace {

constexpr std::array<std::string_view, kNumLegs> kLegNames = {"LF", "RF", "LH", "RH"};

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }

double wrap_angle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

}  // namespace

std::string_view leg_name(int leg_index) {
  if (leg_index < 0 || leg_index >= kNumLegs) {
    throw Error("argument", "leg index out of range: " + std::to_string(leg_index));
  }
  return kLegNames[static_cast<std::size_t>(leg_index)];
}

int leg_index_from_name(std::string_view name) {
  for (int i = 0; i < kNumLegs; ++i) {
    if (kLegNames[static_cast<std::size_t>(i)] == name) return i;
  }
  throw Error("config", "unknown leg name '" + std::string(name) + "' (expected LF, RF, LH, RH)");
}

void LegParams::validate() const {
  const std::string where = "leg " + std::to_string(index + 1);
  if (!(l1 > 0.0 && l2 > 0.0 && l3 > 0.0)) {
    throw Error("config", where + ": link lengths must be positive", "legs.links");
  }
  if (!(foot_radius > 0.0)) {
    throw Error("config", where + ": foot radius must be positive", "legs.foot_radius");
  }
  if (side_sign != 1.0 && side_sign != -1.0) {
    throw Error("config", where + ": side sign must be +1 or -1", "legs.side_sign");
  }
}

std::array<LegParams, kNumLegs> default_legs() {
  std::array<LegParams, kNumLegs> legs;
  const double hx = 0.24;
  const double hy = 0.05;
  const std::array<Vec3, kNumLegs> hips = {Vec3(hx, hy, 0.0), Vec3(hx, -hy, 0.0),
                                           Vec3(-hx, hy, 0.0), Vec3(-hx, -hy, 0.0)};
  for (int i = 0; i < kNumLegs; ++i) {
    auto& leg = legs[static_cast<std::size_t>(i)];
    leg.index = i;
    leg.hip_offset = hips[static_cast<std::size_t>(i)];
    leg.side_sign = (i == 0 || i == 2) ? 1.0 : -1.0;
  }
  return legs;
}

namespace kinematics {

Vec3 forward(const Vec3& q, const LegParams& leg) {
  const Vec3 knee_to_foot(0.0, 0.0, -leg.l3);
  const Vec3 hip_to_knee(0.0, 0.0, -leg.l2);
  const Vec3 abduction(0.0, leg.side_sign * leg.l1, 0.0);
  return leg.hip_offset +
         rot_x(q.x()) * (abduction + rot_y(q.y()) * (hip_to_knee + rot_y(q.z()) * knee_to_foot));
}

Mat3 jacobian(const Vec3& q, const LegParams& leg) {
  const Mat3 Rx = rot_x(q.x());
  const Vec3 foot = forward(q, leg);
  const Vec3 pitch_axis = Rx * Vec3::UnitY();
  const Vec3 hip_pitch_origin = leg.hip_offset + Rx * Vec3(0.0, leg.side_sign * leg.l1, 0.0);
  const Vec3 knee_origin = hip_pitch_origin + Rx * rot_y(q.y()) * Vec3(0.0, 0.0, -leg.l2);

  Mat3 J;
  J.col(0) = Vec3::UnitX().cross(foot - leg.hip_offset);
  J.col(1) = pitch_axis.cross(foot - hip_pitch_origin);
  J.col(2) = pitch_axis.cross(foot - knee_origin);
  return J;
}

Mat3 rotational_jacobian(const Vec3& q) {
  const Vec3 pitch_axis = rot_x(q.x()) * Vec3::UnitY();
  Mat3 J;
  J.col(0) = Vec3::UnitX();
  J.col(1) = pitch_axis;
  J.col(2) = pitch_axis;
  return J;
}

Rotation foot_orientation(const Vec3& q) { return rot_x(q.x()) * rot_y(q.y() + q.z()); }

Vec3 foot_angular_velocity(const JointState& joints, const Vec3& body_rate,
                           const Rotation& R_body) {
  return R_body * (body_rate + rotational_jacobian(joints.angles) * joints.rates);
}

Vec3 inverse(const Vec3& foot_body, const LegParams& leg) {
  const Vec3 rel = foot_body - leg.hip_offset;
  const auto unreachable = [&](const std::string& why) {
    return Error("workspace", "leg " + std::to_string(leg.index + 1) + " (" +
                                  std::string(leg_name(leg.index)) +
                                  "): target out of workspace: " + why);
  };

  // Abduction: the sagittal chain lies in a plane at signed distance s*l1
  // from the hip along the rotated y axis.
  const double yz_sq = rel.y() * rel.y() + rel.z() * rel.z();
  const double l1_sq = leg.l1 * leg.l1;
  if (yz_sq < l1_sq) {
    throw unreachable("closer to the abduction axis than l1");
  }
  const double planar_z = -std::sqrt(yz_sq - l1_sq);
  const double abd = wrap_angle(std::atan2(rel.z(), rel.y()) -
                                std::atan2(planar_z, leg.side_sign * leg.l1));

  // Planar two-link problem in the rotated x-z plane.
  const double qx = rel.x();
  const double qz = planar_z;
  const double d_sq = qx * qx + qz * qz;
  double c3 = (d_sq - leg.l2 * leg.l2 - leg.l3 * leg.l3) / (2.0 * leg.l2 * leg.l3);
  constexpr double kSlack = 1e-12;
  if (c3 > 1.0 + kSlack || c3 < -1.0 - kSlack) {
    throw unreachable(c3 > 1.0 ? "beyond full extension" : "inside minimum reach");
  }
  c3 = std::clamp(c3, -1.0, 1.0);
  const double knee = -std::acos(c3);
  const double k1 = leg.l2 + leg.l3 * std::cos(knee);
  const double k2 = leg.l3 * std::sin(knee);
  const double hip = wrap_angle(std::atan2(-qx, -qz) - std::atan2(k2, k1));
  return {abd, hip, knee};
}

}  // namespace kinematics
}  // namespace legodom
