#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "legodom/eskf.hpp"
#include "legodom/imm.hpp"
#include "legodom/log_io.hpp"
#include "legodom/scenario.hpp"

namespace legodom {

enum class EstimatorKind { EskfPc, EskfR, EskfL, ImmNoInteraction, ImmPo, ImmT };

/// eskf-pc, eskf-r, eskf-l, imm-no-interaction, imm-po, imm-t
const std::vector<std::string>& estimator_names();

/// Optional command-line overrides of the presets.
struct EstimatorOverrides {
  std::optional<int> modes;
  std::optional<std::vector<double>> alphas;
  std::optional<Eigen::MatrixXd> transition;
};

struct EstimatorSpec {
  std::string name;
  EstimatorKind kind = EstimatorKind::EskfR;
  ContactModel contact = ContactModel::Rolling;
  double alpha = 1.0;   // single-filter variants
  ImmConfig imm;        // IMM variants

  bool is_imm() const {
    return kind == EstimatorKind::ImmNoInteraction || kind == EstimatorKind::ImmPo ||
           kind == EstimatorKind::ImmT;
  }
};

/// Throws legodom::Error (kind "config") for unknown names, listing the
/// valid ones, and for overrides that do not fit the estimator.
EstimatorSpec make_estimator(const std::string& name, const EstimatorOverrides& overrides = {});

struct InvariantReport {
  std::size_t steps = 0;
  double max_mu_sum_error = 0.0;
  /// max ||P - P^T||_F / ||P||_F over fused and mode covariances.
  double max_asymmetry = 0.0;
  /// min over steps of lambda_min(P) / (trace(P) / 39).
  double min_eigen_ratio = 0.0;
  std::size_t skipped_updates = 0;

  bool covariance_ok() const { return max_asymmetry < 1e-9 && min_eigen_ratio >= -1e-9; }
};

struct EstimatorRun {
  std::string name;
  Trajectory trajectory;
  std::vector<double> trace_P;
  std::vector<double> innovation_norm;
  std::vector<Eigen::Index> rows;
  /// Mode probabilities per step (IMM only); columns mu_1..mu_M.
  Series mu;
  /// Wall-clock seconds per filter step (prediction + update).
  std::vector<double> step_seconds;
  InvariantReport invariants;
  /// Last posterior (fused for IMM).
  Estimate final_estimate;

  /// Mean step time after discarding up to `warmup` leading steps (at most
  /// half of the run).
  double mean_step_seconds(std::size_t warmup = 1000) const;
};

struct RunOptions {
  bool check_invariants = false;
};

/// Initial estimate from the first truth record and the first leg sample.
Estimate initial_estimate(const LogSet& log, const FilterModel& model,
                          const InitialUncertainty& uncertainty);

EstimatorRun run_estimator(const EstimatorSpec& spec, const LogSet& log, const FilterModel& model,
                           const InitialUncertainty& uncertainty, const RunOptions& options = {});

/// Pieces of one filter cycle without applying it: F is the product of the
/// transition matrices over the IMU window, H and K the stacked update.
struct ClosedLoopPieces {
  Eigen::MatrixXd F;
  Eigen::MatrixXd H;
  Eigen::MatrixXd K;
};

ClosedLoopPieces closed_loop_pieces(const Estimate& est, std::span<const ImuSample> window,
                                    double t_end, const ImuSample& latest, const LegSample& legs,
                                    ContactFlags contact, double alpha, const FilterModel& model);

/// Index range [first, last) of IMU samples to hold over (t_from, t_to] and
/// the index of the latest sample at or before t_to.
struct ImuWindow {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t latest = 0;
};

ImuWindow imu_window(std::span<const ImuSample> imu, double t_from, double t_to);

}  // namespace legodom
