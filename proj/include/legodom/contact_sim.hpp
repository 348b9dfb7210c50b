#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "legodom/scenario.hpp"
#include "legodom/state.hpp"

namespace legodom {

/// Body motion at one instant; derivatives are analytic in the path.
struct BodyKinematics {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();             // world
  Rotation G = Rotation::Identity();
  Vec3 omega_body = Vec3::Zero();
};

/// Arc length, speed and acceleration of the trapezoidal speed profile.
struct PathProgress {
  double s = 0.0;
  double ds = 0.0;
  double dds = 0.0;
};

PathProgress path_progress(const ScenarioConfig& config, double t);

/// Total arc length covered by the body path over the scenario.
double path_length(const ScenarioConfig& config);

BodyKinematics body_at(const ScenarioConfig& config, double t);

/// Ground height and unit normal (world) at (x, y).
double ground_height(const ScenarioConfig& config, double x, double y);
Vec3 ground_normal(const ScenarioConfig& config, double x, double y);

/// True while `leg` is in its stance phase at time t.
bool in_stance(const ScenarioConfig& config, int leg, double t);

struct GroundTruthRecord {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Rotation G = Rotation::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 omega_body = Vec3::Zero();
  Vec3 accel_world = Vec3::Zero();
  std::array<Vec3, kNumLegs> feet{};
  std::array<Vec3, kNumLegs> foot_vel{};
  std::array<bool, kNumLegs> contact{};
  std::array<bool, kNumLegs> slip{};
};

/// Ground truth at every IMU sample t_k = k / imu_rate, k < duration*imu_rate.
/// Throws legodom::Error (kind "workspace") at the first timestamp where a
/// foot leaves the leg workspace.
std::vector<GroundTruthRecord> generate_truth(const ScenarioConfig& config);

/// Ideal IMU from the truth plus bias random walk and white noise. The noise
/// densities are config.noise scaled by sensors.noise_scale.
std::vector<ImuSample> synthesize_imu(const std::vector<GroundTruthRecord>& truth,
                                      const NoiseConfig& noise, const SensorConfig& sensors,
                                      double imu_rate, std::uint64_t seed);

/// Joint angles by inverse kinematics and rates by the analytic
/// differential relation, sampled every `stride` truth records.
std::vector<LegSample> synthesize_encoders(const std::vector<GroundTruthRecord>& truth,
                                           const std::array<LegParams, kNumLegs>& legs,
                                           const SensorConfig& sensors, int stride,
                                           std::uint64_t seed);

struct SimulationLog {
  std::vector<GroundTruthRecord> truth;
  std::vector<ImuSample> imu;
  std::vector<LegSample> legs;
};

/// generate_truth followed by sensor synthesis, all seeded from config.seed.
SimulationLog simulate(const ScenarioConfig& config);

}  // namespace legodom
