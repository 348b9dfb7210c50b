#include "legodom/imm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "legodom/error.hpp"

namespace legodom {

namespace {

constexpr double kRowSumTolerance = 1e-12;

int argmax(const Eigen::VectorXd& w) {
  Eigen::Index i = 0;
  w.maxCoeff(&i);
  return static_cast<int>(i);
}

/// Index of the single weight that is exactly 1 (others exactly 0), or -1.
int exact_selection(const Eigen::VectorXd& w) {
  int hit = -1;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] == 1.0) {
      if (hit >= 0) return -1;
      hit = static_cast<int>(i);
    } else if (w[i] != 0.0) {
      return -1;
    }
  }
  return hit;
}

/// Weighted mean and spread-augmented covariance of mode estimates.
Estimate moment_match(std::span<const Estimate> ests, const Eigen::VectorXd& w) {
  if (const int only = exact_selection(w); only >= 0) {
    return ests[static_cast<std::size_t>(only)];
  }
  std::vector<RobotState> states;
  states.reserve(ests.size());
  for (const auto& e : ests) states.push_back(e.x);

  Estimate out;
  out.t = ests.front().t;
  out.x = weighted_mean(states, w, argmax(w));
  out.P.setZero();
  for (std::size_t j = 0; j < ests.size(); ++j) {
    const double wj = w[static_cast<Eigen::Index>(j)];
    if (wj == 0.0) continue;
    const ErrorVector d = boxminus(ests[j].x, out.x);
    out.P += wj * (ests[j].P + d * d.transpose());
  }
  symmetrize(out.P);
  return out;
}

}  // namespace

void ModeBank::validate() const {
  const Eigen::Index m = static_cast<Eigen::Index>(modes.size());
  if (m < 1) throw Error("config", "mode bank is empty", "imm.alphas");
  if (mu.size() != m) throw Error("config", "mode probability vector has wrong size", "imm.mu");
  if (transition.rows() != m || transition.cols() != m) {
    throw Error("config", "transition matrix must be M x M", "imm.transition");
  }
  if ((mu.array() < 0.0).any() || std::abs(mu.sum() - 1.0) > kRowSumTolerance) {
    throw Error("config", "mode probabilities must be >= 0 and sum to 1", "imm.mu");
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    if ((transition.row(r).array() < 0.0).any() ||
        std::abs(transition.row(r).sum() - 1.0) > kRowSumTolerance) {
      throw Error("config",
                  "transition row " + std::to_string(r + 1) + " must be >= 0 and sum to 1 (sum=" +
                      std::to_string(transition.row(r).sum()) + ")",
                  "imm.transition");
    }
  }
  for (const auto& mode : modes) {
    if (!(mode.alpha >= 1.0)) throw Error("config", "mode alpha must be >= 1", "imm.alphas");
  }
}

ImmConfig ImmConfig::two_mode() {
  ImmConfig c;
  c.alphas = {1.0, 100.0};
  c.transition.resize(2, 2);
  c.transition << 0.99, 0.01,
                  0.02, 0.98;
  return c;
}

ImmConfig ImmConfig::three_mode() {
  ImmConfig c;
  c.alphas = {1.0, 10.0, 100.0};
  c.transition.resize(3, 3);
  c.transition << 0.98, 0.01, 0.01,
                  0.02, 0.97, 0.01,
                  0.02, 0.01, 0.97;
  return c;
}

ModeBank build_bank(const ImmConfig& config, const Estimate& initial) {
  const auto m = static_cast<Eigen::Index>(config.alphas.size());
  if (m < 1) throw Error("config", "at least one mode is required", "imm.alphas");
  if (config.alphas.front() != 1.0) {
    throw Error("config", "the first (nominal rolling) mode must have alpha = 1", "imm.alphas");
  }
  for (std::size_t i = 1; i < config.alphas.size(); ++i) {
    if (!(config.alphas[i] >= config.alphas[i - 1])) {
      throw Error("config", "mode alphas must be non-decreasing and >= 1", "imm.alphas");
    }
  }

  ModeBank bank;
  bank.interacting = config.interacting;
  for (double a : config.alphas) {
    bank.modes.push_back(Mode{initial, a, ContactFlags{false, false, false, false}});
  }
  if (config.transition.size() == 0) {
    if (m == 2) {
      bank.transition = ImmConfig::two_mode().transition;
    } else if (m == 3) {
      bank.transition = ImmConfig::three_mode().transition;
    } else {
      bank.transition = Eigen::MatrixXd::Identity(m, m);
    }
  } else {
    bank.transition = config.transition;
  }
  if (!config.interacting) {
    bank.transition = Eigen::MatrixXd::Identity(m, m);
  }
  bank.mu = config.initial_mu.size() == 0 ? Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m))
                                          : config.initial_mu;
  bank.validate();
  return bank;
}

RobotState weighted_mean(std::span<const RobotState> states, const Eigen::VectorXd& weights,
                         int reference) {
  const RobotState& ref = states[static_cast<std::size_t>(reference)];
  RobotState out;
  out.p.setZero();
  out.v.setZero();
  out.accel_bias.setZero();
  out.gyro_bias.setZero();
  for (int l = 0; l < kNumLegs; ++l) {
    out.feet[l].setZero();
    out.foot_vel[l].setZero();
  }
  Vec3 rot_residual = Vec3::Zero();
  for (std::size_t j = 0; j < states.size(); ++j) {
    const double w = weights[static_cast<Eigen::Index>(j)];
    if (w == 0.0) continue;
    const RobotState& s = states[j];
    out.p += w * s.p;
    out.v += w * s.v;
    for (int l = 0; l < kNumLegs; ++l) {
      out.feet[l] += w * s.feet[l];
      out.foot_vel[l] += w * s.foot_vel[l];
    }
    out.accel_bias += w * s.accel_bias;
    out.gyro_bias += w * s.gyro_bias;
    if (static_cast<int>(j) != reference) {
      rot_residual += w * so3::boxminus(s.G, ref.G);
    }
  }
  out.G = so3::boxplus(ref.G, rot_residual);
  return out;
}

MixResult mix(const ModeBank& bank) {
  const int m = bank.size();
  MixResult res;
  res.mu_predicted = bank.transition.transpose() * bank.mu;

  std::vector<Estimate> ests;
  ests.reserve(static_cast<std::size_t>(m));
  for (const auto& mode : bank.modes) ests.push_back(mode.est);

  res.mixed.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double norm = res.mu_predicted[i];
    if (!(norm > 0.0)) {
      res.mixed.push_back(ests[static_cast<std::size_t>(i)]);
      res.degenerate.push_back(i);
      continue;
    }
    Eigen::VectorXd w(m);
    for (int j = 0; j < m; ++j) w[j] = bank.transition(j, i) * bank.mu[j] / norm;
    res.mixed.push_back(moment_match(ests, w));
  }
  return res;
}

double mode_log_likelihood(const Eigen::VectorXd& r, const Eigen::MatrixXd& S) {
  const Eigen::Index n = r.size();
  if (n == 0) return 0.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) return kLogLikelihoodFloor;
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  const double mahalanobis = llt.matrixL().solve(r).squaredNorm();
  const double ll = -0.5 * (mahalanobis + static_cast<double>(n) * std::log(2.0 * std::numbers::pi) +
                            log_det);
  if (!std::isfinite(ll)) return kLogLikelihoodFloor;
  return std::max(ll, kLogLikelihoodFloor);
}

double mode_likelihood(const Eigen::VectorXd& r, const Eigen::MatrixXd& S) {
  return std::exp(mode_log_likelihood(r, S));
}

Eigen::VectorXd update_mode_probs_log(const Eigen::VectorXd& log_likelihood,
                                      const Eigen::VectorXd& mu_predicted, double floor) {
  const Eigen::VectorXd ll = log_likelihood.cwiseMax(kLogLikelihoodFloor);
  const double top = ll.maxCoeff();
  Eigen::VectorXd mu = ((ll.array() - top).exp() * mu_predicted.array()).matrix();
  const double total = mu.sum();
  if (!(total > 0.0)) {
    mu = mu_predicted;
  } else {
    mu /= total;
  }
  mu = mu.cwiseMax(floor).cwiseMin(1.0);
  return mu / mu.sum();
}

Eigen::VectorXd update_mode_probs(const Eigen::VectorXd& likelihood,
                                  const Eigen::VectorXd& mu_predicted, double floor) {
  if ((likelihood.array() < 0.0).any()) {
    throw Error("argument", "likelihoods must be non-negative");
  }
  const Eigen::VectorXd ll =
      likelihood.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : kLogLikelihoodFloor; });
  return update_mode_probs_log(ll, mu_predicted, floor);
}

Fused fuse(std::span<const Estimate> estimates, const Eigen::VectorXd& weights) {
  const Estimate e = moment_match(estimates, weights);
  return {e.x, e.P};
}

ImmStepResult imm_step(ModeBank& bank, std::span<const ImuSample> window, const ImuSample& latest,
                       const LegSample& legs, const FilterModel& model) {
  const int m = bank.size();
  ImmStepResult res;

  Eigen::VectorXd mu_predicted = bank.mu;
  if (bank.interacting) {
    MixResult mixed = mix(bank);
    mu_predicted = mixed.mu_predicted;
    for (int i = 0; i < m; ++i) {
      bank.modes[static_cast<std::size_t>(i)].est = std::move(mixed.mixed[static_cast<std::size_t>(i)]);
    }
    res.degenerate_mixing = std::move(mixed.degenerate);
  }

  // Modes are independent between mixing and fusion.
  Eigen::VectorXd log_lik(m);
  bool any_rows = false;
  res.modes.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    Mode& mode = bank.modes[static_cast<std::size_t>(i)];
    predict_through(mode.est, window, legs.t, mode.alpha, model);
    const CorrectionResult c = correct(mode.est, legs, mode.contact, latest, model);

    ModeDiagnostics& d = res.modes[static_cast<std::size_t>(i)];
    d.rows = c.innovation.size();
    d.applied = c.applied;
    d.ill_conditioned = c.ill_conditioned;
    d.innovation_norm = c.innovation.size() > 0 ? c.innovation.norm() : 0.0;
    d.log_likelihood = c.applied ? mode_log_likelihood(c.innovation, c.S) : kLogLikelihoodFloor;
    log_lik[i] = d.log_likelihood;
    any_rows = any_rows || d.rows > 0;
  }

  bank.mu = any_rows ? update_mode_probs_log(log_lik, mu_predicted) : mu_predicted;

  std::vector<Estimate> ests;
  ests.reserve(static_cast<std::size_t>(m));
  for (const auto& mode : bank.modes) ests.push_back(mode.est);
  const Eigen::VectorXd w =
      bank.interacting ? bank.mu : Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  const Fused f = fuse(ests, w);
  res.fused.t = legs.t;
  res.fused.x = f.x;
  res.fused.P = f.P;
  res.mu = bank.mu;
  return res;
}

}  // namespace legodom
