#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "legodom/contact_sim.hpp"
#include "legodom/scenario.hpp"
#include "legodom/trajectory.hpp"

namespace legodom {

// CSV logs: one header row of name[unit] columns, numbers printed with 17
// significant digits so that write -> read is exact.

void write_imu_csv(const std::filesystem::path& path, const std::vector<ImuSample>& imu);
std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path);

void write_legs_csv(const std::filesystem::path& path, const std::vector<LegSample>& legs);
std::vector<LegSample> read_legs_csv(const std::filesystem::path& path);

/// Columns t, px..pz, qw..qz, vx..vz, then per leg f, vf, contact, slip.
/// omega_body and accel_world are not stored.
void write_truth_csv(const std::filesystem::path& path, const std::vector<GroundTruthRecord>& truth);
std::vector<GroundTruthRecord> read_truth_csv(const std::filesystem::path& path);

/// t, px, py, pz, qw, qx, qy, qz. Reading accepts any CSV with those columns
/// (truth.csv included).
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

/// Time series of row vectors, e.g. mode probabilities.
struct Series {
  std::vector<std::string> columns;  // excluding t
  std::vector<double> t;
  std::vector<Eigen::VectorXd> rows;
};

void write_series_csv(const std::filesystem::path& path, const Series& series,
                      const std::vector<std::string>& units = {});
Series read_series_csv(const std::filesystem::path& path);

void write_slip_windows_json(const std::filesystem::path& path,
                             const std::vector<SlipWindow>& windows);
std::vector<SlipWindow> read_slip_windows_json(const std::filesystem::path& path);

struct LogSet {
  std::vector<ImuSample> imu;
  std::vector<LegSample> legs;
  std::vector<GroundTruthRecord> truth;
  std::vector<SlipWindow> slip_windows;
};

/// imu.csv, legs.csv, truth.csv, slip_windows.json and scenario.json in `dir`.
void write_log(const std::filesystem::path& dir, const ScenarioConfig& config,
               const SimulationLog& log);

/// Reads a directory produced by write_log. Missing files raise
/// legodom::Error with kind "io".
LogSet read_log(const std::filesystem::path& dir);

Trajectory truth_trajectory(const std::vector<GroundTruthRecord>& truth);

/// Rotation to unit quaternion (w, x, y, z) with w >= 0, and back.
Eigen::Vector4d rotation_to_quaternion(const Rotation& G);
Rotation quaternion_to_rotation(const Eigen::Vector4d& q);

}  // namespace legodom
