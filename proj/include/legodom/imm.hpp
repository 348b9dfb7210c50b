#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "legodom/eskf.hpp"

namespace legodom {

/// Log-likelihood floor (about log(1e-300)); keeps every mode revivable.
inline constexpr double kLogLikelihoodFloor = -690.0;
inline constexpr double kModeProbabilityFloor = 1e-6;

struct Mode {
  Estimate est;
  double alpha = 1.0;
  ContactFlags contact{false, false, false, false};
};

/// Mode-conditioned filters plus mode probabilities and the Markov
/// transition matrix (Pi(j, i) = P(mode i at k | mode j at k-1)).
struct ModeBank {
  std::vector<Mode> modes;
  Eigen::VectorXd mu;
  Eigen::MatrixXd transition;
  /// When false: no mixing and fixed equal-weight fusion.
  bool interacting = true;

  int size() const { return static_cast<int>(modes.size()); }
  void validate() const;
};

struct ImmConfig {
  std::vector<double> alphas{1.0, 100.0};
  Eigen::MatrixXd transition;  // empty -> default for the mode count
  Eigen::VectorXd initial_mu;  // empty -> uniform
  bool interacting = true;

  /// Two-mode rolling/slip bank.
  static ImmConfig two_mode();
  /// Normal contact, mild slip, severe slip.
  static ImmConfig three_mode();
};

/// Builds a bank whose modes share `initial`. Throws legodom::Error (kind
/// "config") for invalid alphas or transition rows.
ModeBank build_bank(const ImmConfig& config, const Estimate& initial);

/// Probability-weighted mean of states; the orientation is averaged as
/// rotation-vector residuals about states[reference].
RobotState weighted_mean(std::span<const RobotState> states, const Eigen::VectorXd& weights,
                         int reference);

struct MixResult {
  std::vector<Estimate> mixed;
  Eigen::VectorXd mu_predicted;
  /// Modes whose predicted probability was zero and kept their prior.
  std::vector<int> degenerate;
};

MixResult mix(const ModeBank& bank);

/// log N(r; 0, S) with n = r.size(), floored at kLogLikelihoodFloor.
double mode_log_likelihood(const Eigen::VectorXd& r, const Eigen::MatrixXd& S);

/// exp(mode_log_likelihood(r, S)).
double mode_likelihood(const Eigen::VectorXd& r, const Eigen::MatrixXd& S);

/// mu_i = L_i mu_pred_i / sum_l L_l mu_pred_l, clamped to [floor, 1] and
/// renormalized. Input is log-likelihoods; shifted by their max first.
Eigen::VectorXd update_mode_probs_log(const Eigen::VectorXd& log_likelihood,
                                      const Eigen::VectorXd& mu_predicted,
                                      double floor = kModeProbabilityFloor);

/// Same as update_mode_probs_log for linear likelihoods.
Eigen::VectorXd update_mode_probs(const Eigen::VectorXd& likelihood,
                                  const Eigen::VectorXd& mu_predicted,
                                  double floor = kModeProbabilityFloor);

struct Fused {
  RobotState x;
  Covariance P;
};

/// Moment-matched fusion about the highest-weight mode.
Fused fuse(std::span<const Estimate> estimates, const Eigen::VectorXd& weights);

struct ModeDiagnostics {
  double log_likelihood = 0.0;
  double innovation_norm = 0.0;
  Eigen::Index rows = 0;
  bool applied = false;
  bool ill_conditioned = false;
};

struct ImmStepResult {
  Estimate fused;
  Eigen::VectorXd mu;
  std::vector<ModeDiagnostics> modes;
  std::vector<int> degenerate_mixing;
};

/// mix -> per-mode prediction over the IMU window -> per-mode update ->
/// likelihood -> probability update -> fusion.
ImmStepResult imm_step(ModeBank& bank, std::span<const ImuSample> window,
                       const ImuSample& latest, const LegSample& legs, const FilterModel& model);

}  // namespace legodom
