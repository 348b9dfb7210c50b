#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "legodom/eskf.hpp"
#include "legodom/leg_kinematics.hpp"

namespace legodom {

inline constexpr int kScenarioSchemaVersion = 1;

enum class PathType { Straight, Circular, Sinusoidal, Slope };

struct PathConfig {
  PathType type = PathType::Straight;
  double radius = 1.0;       // circular, m
  double amplitude = 0.5;    // sinusoidal, m
  double wavelength = 3.5;   // sinusoidal, m
  double angle = 0.0;        // slope, rad
};

struct GaitConfig {
  double stance_duration = 0.25;
  double swing_duration = 0.25;
  /// Body travel per stance phase; 0 selects a static four-foot stand.
  double step_length = 0.0625;
  double step_height = 0.06;
  double body_height = 0.45;
  /// Trapezoidal speed profile ramp at start and end.
  double ramp_duration = 1.0;
};

/// Height field A sin(2 pi x / L) sin(2 pi y / L) added to the ground.
struct TerrainConfig {
  double amplitude = 0.0;
  double wavelength = 1.0;
};

struct SlipWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  Vec3 velocity = Vec3(0.0, 0.1, 0.0);  // world frame, m/s
  std::vector<int> legs{0, 1, 2, 3};
};

struct SensorConfig {
  /// Scales the IMU noise densities in `noise`; 0 gives noiseless IMU data.
  double noise_scale = 1.0;
  double joint_angle_noise = 0.0;  // rad, per sample
  double joint_rate_noise = 0.0;   // rad/s, per sample
  Vec3 initial_accel_bias = Vec3::Zero();
  Vec3 initial_gyro_bias = Vec3::Zero();
};

/// Initial error-state standard deviations used by the estimators.
struct InitialUncertainty {
  double position = 1e-3;
  double velocity = 1e-2;
  double attitude = 1e-3;
  double foot_position = 1e-2;
  double foot_velocity = 1e-1;
  double accel_bias = 1e-2;
  double gyro_bias = 1e-3;
  // Re-initialization of a foot's blocks at touchdown.
  double touchdown_foot_position = 10.0;
  double touchdown_foot_velocity = 1.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double duration = 10.0;
  double imu_rate = 500.0;
  double leg_rate = 250.0;
  GaitConfig gait;
  PathConfig path;
  TerrainConfig terrain;
  std::vector<SlipWindow> slip_windows;
  /// Peak vertical foot-velocity bump over one leg period after touchdown.
  double touchdown_impulse = 0.05;
  NoiseConfig noise;
  SensorConfig sensors;
  InitialUncertainty initial;
  std::array<LegParams, kNumLegs> legs = default_legs();
  std::uint64_t seed = 1;

  /// Throws legodom::Error (kind "config") naming the offending field.
  void validate() const;

  /// Cruise speed of the body path, m/s.
  double cruise_speed() const;
  bool is_stand() const { return gait.step_length == 0.0; }
};

std::string_view path_type_name(PathType type);

/// Strict parse: unknown keys and schema violations raise legodom::Error
/// with kind "config" and the JSON path of the field.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Covariance built from InitialUncertainty.
Covariance initial_covariance(const InitialUncertainty& u);

/// Filter model (legs, noise, options) described by a scenario.
FilterModel filter_model(const ScenarioConfig& config, ContactModel contact);

}  // namespace legodom
