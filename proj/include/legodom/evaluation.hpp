#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "legodom/trajectory.hpp"

namespace legodom {

enum class Alignment { None, Rigid };

Alignment parse_alignment(const std::string& name);
std::string alignment_name(Alignment align);

inline constexpr double kAssociationTolerance = 1e-3;  // s

/// Index pairs (est, truth) matched by nearest timestamp within `tolerance`.
std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                           const Trajectory& truth,
                                                           double tolerance = kAssociationTolerance);

struct AteResult {
  double pos = 0.0;  // m, RMSE
  double att = 0.0;  // rad, RMSE of the geodesic angle
  std::size_t samples = 0;
};

/// Absolute trajectory error. Rigid alignment registers the estimate to the
/// truth by the least-squares rotation and translation (no scale).
AteResult ate(const Trajectory& est, const Trajectory& truth, Alignment align = Alignment::Rigid,
              double tolerance = kAssociationTolerance);

struct RpeResult {
  double pos = 0.0;  // m per `distance`, RMSE
  double att = 0.0;  // rad per `distance`, RMSE
  std::size_t pairs = 0;
};

/// Relative pose error over segments whose ground-truth arc length first
/// exceeds `distance`. Each segment error is scaled to a `distance`-long
/// segment before the RMSE.
RpeResult rpe(const Trajectory& est, const Trajectory& truth, double distance = 1.0,
              double tolerance = kAssociationTolerance);

struct MetricReport {
  double ate_pos = 0.0;
  double ate_att = 0.0;
  double rpe_pos = 0.0;
  double rpe_att = 0.0;
  std::size_t ate_samples = 0;
  std::size_t rpe_pairs = 0;
  Alignment align = Alignment::Rigid;
  double rpe_distance = 1.0;

  nlohmann::json to_json() const;
  /// Plain-text table with rows ATE_pos, ATE_att, RPE_pos, RPE_att.
  std::string to_table() const;
};

MetricReport evaluate(const Trajectory& est, const Trajectory& truth, Alignment align,
                      double rpe_distance);

/// (I - K H) F with dimension checks.
Eigen::MatrixXd closed_loop_matrix(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                   const Eigen::MatrixXd& K);

struct SpectralRadius {
  double rho = 0.0;
  bool converged = true;
};

SpectralRadius spectral_radius(const Eigen::MatrixXd& A);

/// Orthonormal basis (columns) of the unobservable subspace of (H, F):
/// the null space of [H; H D; H D^2; ...] with D = F - I.
Eigen::MatrixXd unobservable_subspace(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                      double relative_tolerance = 1e-9);

/// Spectral radius of (I - K H) F restricted to the quotient by the
/// unobservable subspace of (H, F), which the closed loop leaves invariant.
SpectralRadius observable_spectral_radius(const Eigen::MatrixXd& F, const Eigen::MatrixXd& H,
                                          const Eigen::MatrixXd& K);

struct TimeWindow {
  double t_start = 0.0;
  double t_end = 0.0;
};

struct ModeTimelineStats {
  double inside_mean = 0.0;   // mean slip probability inside windows
  double outside_mean = 0.0;
  double ratio = 0.0;         // inside / outside, +inf when outside == 0
  std::size_t inside_samples = 0;
  std::size_t outside_samples = 0;
  /// Changes of the most probable mode.
  std::size_t switches = 0;
  /// Dwell times of the most probable mode, binned by kDwellEdges.
  std::vector<std::size_t> dwell_histogram;

  static constexpr std::array<double, 7> kDwellEdges{0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0};

  nlohmann::json to_json() const;
};

/// `mu` rows are mode probabilities with mode 0 the nominal contact mode;
/// the slip probability is 1 - mu_0.
ModeTimelineStats mode_timeline_stats(const std::vector<double>& t,
                                      const std::vector<Eigen::VectorXd>& mu,
                                      const std::vector<TimeWindow>& windows);

}  // namespace legodom
