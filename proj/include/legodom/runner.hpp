#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "legodom/estimator.hpp"
#include "legodom/evaluation.hpp"

namespace legodom {

/// "1,100" -> {1, 100}
std::vector<double> parse_number_list(const std::string& text, const std::string& field);
/// "0.99,0.01;0.02,0.98" -> 2x2 (rows separated by ';')
Eigen::MatrixXd parse_matrix(const std::string& text, const std::string& field);

struct SimulateOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

struct SimulateResult {
  std::size_t imu_rows = 0;
  std::size_t leg_rows = 0;
  std::size_t truth_rows = 0;
};

/// Writes imu.csv, legs.csv, truth.csv, slip_windows.json and the scenario
/// echo scenario.json into `out`.
SimulateResult cmd_simulate(const SimulateOptions& options);

struct EstimateOptions {
  std::filesystem::path log_dir;
  std::vector<std::string> estimators{"eskf-r"};
  EstimatorOverrides overrides;
  std::filesystem::path out;
  /// Scenario file for noise and leg parameters; defaults to the log's
  /// scenario.json.
  std::optional<std::filesystem::path> config;
  bool check_invariants = false;
};

/// For each estimator writes out/<name>/trajectory.csv, diagnostics.csv,
/// runtime.json and, for IMM variants, mu.csv.
std::vector<EstimatorRun> cmd_estimate(const EstimateOptions& options);

struct EvaluateOptions {
  std::filesystem::path estimate;
  std::filesystem::path truth;
  Alignment align = Alignment::Rigid;
  double rpe_distance = 1.0;
  std::optional<std::filesystem::path> mu;
  std::optional<std::filesystem::path> slip_windows;
  std::optional<std::filesystem::path> out;
};

struct EvaluateResult {
  MetricReport report;
  std::optional<ModeTimelineStats> modes;
};

/// Writes metrics.json and metrics.txt into `out` when given.
EvaluateResult cmd_evaluate(const EvaluateOptions& options);

struct SweepManifest {
  std::vector<std::filesystem::path> scenarios;
  std::vector<std::string> estimators;
  /// Empty: each scenario's own seed.
  std::vector<std::uint64_t> seeds;
  Alignment align = Alignment::Rigid;
  double rpe_distance = 1.0;
  bool check_invariants = true;
};

/// Strict JSON manifest; scenario paths are relative to the manifest.
SweepManifest load_sweep_manifest(const std::filesystem::path& path);

struct SweepCell {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string estimator;
  bool ok = false;
  std::string error;
  MetricReport metrics;
  std::optional<ModeTimelineStats> modes;
  InvariantReport invariants;
  double mean_step_seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  /// Median over cells of the mean per-step time, by estimator.
  std::map<std::string, double> median_step_seconds;
};

struct SweepOptions {
  std::filesystem::path manifest;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
};

/// simulate -> estimate -> evaluate for every (scenario, seed, estimator).
/// Writes sweep.csv (seed-averaged metrics, one row per scenario),
/// cells.csv (one row per cell) and runtime.json. Failed cells are recorded
/// and the sweep continues.
SweepResult cmd_sweep(const SweepOptions& options);
SweepResult run_sweep(const SweepManifest& manifest, const std::filesystem::path& out);

}  // namespace legodom
