#pragma once

#include <array>

#include <Eigen/Core>

#include "legodom/leg_kinematics.hpp"
#include "legodom/so3.hpp"

namespace legodom {

inline constexpr int kStateDim = 39;
/// Process-noise channels: accel, gyro, one foot-velocity triple per leg,
/// accel bias, gyro bias.
inline constexpr int kNoiseDim = 24;

/// Offsets into the 39-dim error state.
namespace err {
inline constexpr int kPos = 0;
inline constexpr int kVel = 3;
inline constexpr int kRot = 6;
inline constexpr int kFootPos = 9;
inline constexpr int kFootVel = 21;
inline constexpr int kAccelBias = 33;
inline constexpr int kGyroBias = 36;
constexpr int foot_pos(int leg) { return kFootPos + 3 * leg; }
constexpr int foot_vel(int leg) { return kFootVel + 3 * leg; }
}  // namespace err

/// Offsets into the 24-dim process-noise vector.
namespace noise_idx {
inline constexpr int kAccel = 0;
inline constexpr int kGyro = 3;
inline constexpr int kFootVel = 6;
inline constexpr int kAccelBias = 18;
inline constexpr int kGyroBias = 21;
constexpr int foot_vel(int leg) { return kFootVel + 3 * leg; }
}  // namespace noise_idx

using ErrorVector = Eigen::Matrix<double, kStateDim, 1>;
using Covariance = Eigen::Matrix<double, kStateDim, kStateDim>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using NoiseInput = Eigen::Matrix<double, kStateDim, kNoiseDim>;
using NoiseCovariance = Eigen::Matrix<double, kNoiseDim, kNoiseDim>;

inline const Vec3 kDefaultGravity(0.0, 0.0, -9.81);

/// Nominal state. Positions and velocities are in the world frame, biases
/// in the body (IMU) frame.
struct RobotState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Rotation G = Rotation::Identity();
  std::array<Vec3, kNumLegs> feet{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<Vec3, kNumLegs> foot_vel{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();

  bool all_finite() const;
};

/// x (+) dx: vector addition everywhere except G, which uses so3::boxplus.
RobotState boxplus(const RobotState& x, const ErrorVector& dx);

/// a (-) b, the inverse of boxplus: boxplus(b, boxminus(a, b)) == a.
ErrorVector boxminus(const RobotState& a, const RobotState& b);

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();   // rad/s, body
  Vec3 accel = Vec3::Zero();  // m/s^2, body specific force
};

struct LegSample {
  double t = 0.0;
  std::array<JointState, kNumLegs> joints{};
  std::array<bool, kNumLegs> contact{false, false, false, false};
};

using ContactFlags = std::array<bool, kNumLegs>;

/// Symmetrizes in place and returns ||P - P^T||_F before symmetrization.
double symmetrize(Covariance& P);

}  // namespace legodom
