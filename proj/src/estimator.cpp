#include "legodom/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "legodom/error.hpp"

namespace legodom {

namespace {

std::string valid_names() {
  std::string out;
  for (const auto& n : estimator_names()) out += (out.empty() ? "" : ", ") + n;
  return out;
}

void check_covariance(const Covariance& P, InvariantReport& rep) {
  const double norm = P.norm();
  const double asym = norm > 0.0 ? (P - P.transpose()).norm() / norm : 0.0;
  rep.max_asymmetry = std::max(rep.max_asymmetry, asym);
  const Eigen::SelfAdjointEigenSolver<Covariance> es(P, Eigen::EigenvaluesOnly);
  const double scale = P.trace() / static_cast<double>(kStateDim);
  const double ratio = scale > 0.0 ? es.eigenvalues().minCoeff() / scale : 0.0;
  rep.min_eigen_ratio = std::min(rep.min_eigen_ratio, ratio);
}

std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

}  // namespace

const std::vector<std::string>& estimator_names() {
  static const std::vector<std::string> names{"eskf-pc", "eskf-r", "eskf-l",
                                              "imm-no-interaction", "imm-po", "imm-t"};
  return names;
}

EstimatorSpec make_estimator(const std::string& name, const EstimatorOverrides& ov) {
  EstimatorSpec spec;
  spec.name = name;
  if (name == "eskf-pc") {
    spec.kind = EstimatorKind::EskfPc;
    spec.contact = ContactModel::PointContact;
  } else if (name == "eskf-r") {
    spec.kind = EstimatorKind::EskfR;
  } else if (name == "eskf-l") {
    // ESKF-R with alpha fixed at the slip mode's value.
    spec.kind = EstimatorKind::EskfL;
    spec.alpha = ImmConfig::two_mode().alphas.back();
  } else if (name == "imm-no-interaction") {
    spec.kind = EstimatorKind::ImmNoInteraction;
    spec.imm = ImmConfig::two_mode();
    spec.imm.interacting = false;
  } else if (name == "imm-po") {
    spec.kind = EstimatorKind::ImmPo;
    spec.imm = ImmConfig::two_mode();
  } else if (name == "imm-t") {
    spec.kind = EstimatorKind::ImmT;
    spec.imm = ImmConfig::three_mode();
  } else {
    throw Error("config", "unknown estimator '" + name + "' (valid: " + valid_names() + ")",
                "estimator");
  }

  if (!spec.is_imm()) {
    if (ov.modes || ov.transition) {
      throw Error("config", "--modes and --transition apply only to IMM estimators", "estimator");
    }
    if (ov.alphas) {
      if (ov.alphas->size() != 1) {
        throw Error("config", name + " takes a single alpha", "alpha");
      }
      spec.alpha = ov.alphas->front();
      if (!(spec.alpha >= 1.0)) throw Error("config", "alpha must be >= 1", "alpha");
    }
    return spec;
  }

  const bool interacting = spec.imm.interacting;
  if (ov.modes) {
    if (*ov.modes < 1) throw Error("config", "--modes must be >= 1", "modes");
    if (*ov.modes == 2) {
      spec.imm = ImmConfig::two_mode();
    } else if (*ov.modes == 3) {
      spec.imm = ImmConfig::three_mode();
    } else if (!ov.alphas) {
      throw Error("config", "--modes " + std::to_string(*ov.modes) + " needs --alpha", "modes");
    }
    spec.imm.interacting = interacting;
  }
  if (ov.alphas) {
    if (ov.modes && static_cast<int>(ov.alphas->size()) != *ov.modes) {
      throw Error("config", "--alpha must list one value per mode", "alpha");
    }
    if (ov.alphas->size() != spec.imm.alphas.size()) spec.imm.transition.resize(0, 0);
    spec.imm.alphas = *ov.alphas;
  }
  if (ov.transition) {
    const auto m = static_cast<Eigen::Index>(spec.imm.alphas.size());
    if (ov.transition->rows() != m || ov.transition->cols() != m) {
      throw Error("config", "--transition must be " + std::to_string(m) + "x" + std::to_string(m),
                  "transition");
    }
    spec.imm.transition = *ov.transition;
  }
  // Validate early so that bad presets fail before any data is read.
  build_bank(spec.imm, Estimate{});
  return spec;
}

double EstimatorRun::mean_step_seconds(std::size_t warmup) const {
  if (step_seconds.empty()) return 0.0;
  const std::size_t skip = std::min(warmup, step_seconds.size() / 2);
  const double total = std::accumulate(step_seconds.begin() + static_cast<std::ptrdiff_t>(skip),
                                       step_seconds.end(), 0.0);
  return total / static_cast<double>(step_seconds.size() - skip);
}

ImuWindow imu_window(std::span<const ImuSample> imu, double t_from, double t_to) {
  const auto by_time = [](const ImuSample& s, double t) { return s.t < t; };
  const auto after = [](double t, const ImuSample& s) { return t < s.t; };
  ImuWindow w;
  const auto from = std::upper_bound(imu.begin(), imu.end(), t_from, after);
  w.first = from == imu.begin() ? 0 : static_cast<std::size_t>(from - imu.begin()) - 1;
  w.last = static_cast<std::size_t>(std::lower_bound(imu.begin(), imu.end(), t_to, by_time) -
                                    imu.begin());
  w.last = std::max(w.last, w.first);
  const auto upto = std::upper_bound(imu.begin(), imu.end(), t_to, after);
  w.latest = upto == imu.begin() ? 0 : static_cast<std::size_t>(upto - imu.begin()) - 1;
  return w;
}

Estimate initial_estimate(const LogSet& log, const FilterModel& model,
                          const InitialUncertainty& uncertainty) {
  if (log.truth.empty() || log.legs.empty()) {
    throw Error("input", "log has no ground-truth or leg samples for initialization");
  }
  const GroundTruthRecord& first = log.truth.front();
  Estimate e;
  e.t = first.t;
  e.x.p = first.p;
  e.x.v = first.v;
  e.x.G = first.G;
  const LegSample& legs = log.legs.front();
  for (int l = 0; l < kNumLegs; ++l) {
    e.x.feet[l] = first.p + first.G * kinematics::forward(legs.joints[l].angles,
                                                          model.legs[static_cast<std::size_t>(l)]);
  }
  e.P = initial_covariance(uncertainty);
  return e;
}

EstimatorRun run_estimator(const EstimatorSpec& spec, const LogSet& log, const FilterModel& base,
                           const InitialUncertainty& uncertainty, const RunOptions& options) {
  if (log.imu.empty()) throw Error("input", "log has no IMU samples");
  FilterModel model = base;
  model.contact = spec.contact;

  EstimatorRun run;
  run.name = spec.name;
  run.invariants.min_eigen_ratio = 0.0;
  bool first_check = true;

  Estimate est = initial_estimate(log, model, uncertainty);
  ContactFlags contact{false, false, false, false};
  ModeBank bank;
  if (spec.is_imm()) {
    bank = build_bank(spec.imm, est);
    for (int i = 0; i < bank.size(); ++i) run.mu.columns.push_back("mu_" + std::to_string(i + 1));
  }

  const std::span<const ImuSample> imu(log.imu);
  run.trajectory.reserve(log.legs.size());
  run.step_seconds.reserve(log.legs.size());

  for (const LegSample& legs : log.legs) {
    const ImuWindow w = imu_window(imu, est.t, legs.t);
    const auto window = imu.subspan(w.first, w.last - w.first);
    const ImuSample& latest = imu[w.latest];

    double innovation = 0.0;
    Eigen::Index rows = 0;
    bool applied = true;
    const auto start = std::chrono::steady_clock::now();
    if (spec.is_imm()) {
      ImmStepResult r = imm_step(bank, window, latest, legs, model);
      est = std::move(r.fused);
      innovation = r.modes.front().innovation_norm;
      rows = r.modes.front().rows;
      applied = r.modes.front().applied || rows == 0;
    } else {
      predict_through(est, window, legs.t, spec.alpha, model);
      const CorrectionResult c = correct(est, legs, contact, latest, model);
      innovation = c.innovation.size() > 0 ? c.innovation.norm() : 0.0;
      rows = c.innovation.size();
      applied = c.applied || rows == 0;
    }
    const auto stop = std::chrono::steady_clock::now();
    run.step_seconds.push_back(std::chrono::duration<double>(stop - start).count());

    if (!est.x.all_finite() || !est.P.allFinite()) {
      throw Error("numeric", "non-finite estimate at t=" + format_time(legs.t));
    }
    if (!applied) ++run.invariants.skipped_updates;

    run.trajectory.push_back({legs.t, est.x.p, est.x.G});
    run.trace_P.push_back(est.P.trace());
    run.innovation_norm.push_back(innovation);
    run.rows.push_back(rows);
    if (spec.is_imm()) {
      run.mu.t.push_back(legs.t);
      run.mu.rows.push_back(bank.mu);
    }

    if (options.check_invariants) {
      InvariantReport& rep = run.invariants;
      if (first_check) {
        rep.min_eigen_ratio = std::numeric_limits<double>::infinity();
        first_check = false;
      }
      check_covariance(est.P, rep);
      if (spec.is_imm()) {
        rep.max_mu_sum_error = std::max(rep.max_mu_sum_error, std::abs(bank.mu.sum() - 1.0));
        for (const auto& mode : bank.modes) check_covariance(mode.est.P, rep);
      }
    }
    ++run.invariants.steps;
  }
  run.final_estimate = est;
  return run;
}

ClosedLoopPieces closed_loop_pieces(const Estimate& est, std::span<const ImuSample> window,
                                    double t_end, const ImuSample& latest, const LegSample& legs,
                                    ContactFlags contact, double alpha, const FilterModel& model) {
  Estimate e = est;
  StateMatrix F = StateMatrix::Identity();
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double seg_end = (i + 1 < window.size()) ? std::min(window[i + 1].t, t_end) : t_end;
    const double dt = seg_end - e.t;
    if (dt <= 1e-12) continue;
    const ErrorDynamics lin = error_dynamics_matrices(e.x, window[i]);
    const auto disc = discretize<kStateDim, kNoiseDim>(lin.A, lin.B, continuous_noise(model.noise, alpha),
                                                       dt, model.options.discretization);
    F = (disc.Gamma * F).eval();
    e = predict(e, window[i], dt, alpha, model);
    e.t = seg_end;
  }
  if (legs.contact != contact) e = on_contact_transition(e, contact, legs, model);
  const Vec3 body_rate = debias_imu(latest, e.x).gyro;
  const Measurement meas = stack_measurements(e.x, legs, body_rate, model);

  ClosedLoopPieces out;
  out.F = F;
  out.H = meas.H;
  const Eigen::MatrixXd PHt = e.P * meas.H.transpose();
  const Eigen::MatrixXd S = meas.H * PHt + meas.R;
  out.K = S.llt().solve(PHt.transpose()).transpose();
  return out;
}

}  // namespace legodom
