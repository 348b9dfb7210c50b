#include "legodom/eskf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "legodom/error.hpp"

namespace legodom {

namespace {

bool is_psd3(const Mat3& M) {
  if (!M.allFinite() || (M - M.transpose()).norm() > 1e-12 * (1.0 + M.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> es(M);
  return es.eigenvalues().minCoeff() >= -1e-15;
}

}  // namespace

void NoiseConfig::validate() const {
  const auto nonneg = [](double v, const char* field) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error("config", std::string("noise.") + field + " must be a finite value >= 0",
                  std::string("noise.") + field);
    }
  };
  nonneg(accel, "accel");
  nonneg(gyro, "gyro");
  nonneg(accel_bias, "accel_bias");
  nonneg(gyro_bias, "gyro_bias");
  nonneg(meas_position, "meas_position");
  nonneg(meas_velocity, "meas_velocity");
  nonneg(meas_rolling, "meas_rolling");
  if (!is_psd3(foot_velocity)) {
    throw Error("config", "noise.foot_velocity must be symmetric positive semidefinite",
                "noise.foot_velocity");
  }
  if (!(alpha >= 1.0)) {
    throw Error("config", "noise.alpha must be >= 1", "noise.alpha");
  }
}

DebiasedImu debias_imu(const ImuSample& sample, const RobotState& state) {
  return {sample.gyro - state.gyro_bias, sample.accel - state.accel_bias};
}

RobotState propagate_nominal(const RobotState& state, const ImuSample& imu, double dt,
                             const Vec3& gravity, double max_dt) {
  if (!(dt > 0.0) || dt > max_dt) {
    throw Error("input", "propagate_nominal: dt=" + std::to_string(dt) +
                             " outside (0, " + std::to_string(max_dt) + "] at t=" +
                             std::to_string(imu.t));
  }
  if (!imu.gyro.allFinite() || !imu.accel.allFinite()) {
    throw Error("input", "propagate_nominal: non-finite IMU sample at t=" + std::to_string(imu.t));
  }
  const DebiasedImu u = debias_imu(imu, state);

  // Orientation under a constant body rate is exact on the manifold; the
  // translational states are integrated with RK4 against it.
  const Rotation G_half = state.G * so3::exp(0.5 * dt * u.gyro);
  const Rotation G_end = state.G * so3::exp(dt * u.gyro);
  const Vec3 acc0 = state.G * u.accel + gravity;
  const Vec3 acc_half = G_half * u.accel + gravity;
  const Vec3 acc1 = G_end * u.accel + gravity;

  const Vec3& v0 = state.v;
  const Vec3 k1p = v0;
  const Vec3 k1v = acc0;
  const Vec3 k2p = v0 + 0.5 * dt * k1v;
  const Vec3 k2v = acc_half;
  const Vec3 k3p = v0 + 0.5 * dt * k2v;
  const Vec3 k3v = acc_half;
  const Vec3 k4p = v0 + dt * k3v;
  const Vec3 k4v = acc1;

  RobotState out = state;
  out.p = state.p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  out.v = state.v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  out.G = so3::boxplus(state.G, dt * u.gyro);
  for (int l = 0; l < kNumLegs; ++l) {
    out.feet[l] = state.feet[l] + dt * state.foot_vel[l];
  }
  return out;
}

ErrorDynamics error_dynamics_matrices(const RobotState& state, const ImuSample& imu) {
  const DebiasedImu u = debias_imu(imu, state);
  ErrorDynamics d;
  d.A.setZero();
  d.B.setZero();
  const Mat3 I = Mat3::Identity();

  d.A.block<3, 3>(err::kPos, err::kVel) = I;
  d.A.block<3, 3>(err::kVel, err::kRot) = -state.G * so3::skew(u.accel);
  d.A.block<3, 3>(err::kVel, err::kAccelBias) = -state.G;
  d.A.block<3, 3>(err::kRot, err::kRot) = -so3::skew(u.gyro);
  d.A.block<3, 3>(err::kRot, err::kGyroBias) = -I;
  for (int l = 0; l < kNumLegs; ++l) {
    d.A.block<3, 3>(err::foot_pos(l), err::foot_vel(l)) = I;
  }

  d.B.block<3, 3>(err::kVel, noise_idx::kAccel) = -state.G;
  d.B.block<3, 3>(err::kRot, noise_idx::kGyro) = -I;
  for (int l = 0; l < kNumLegs; ++l) {
    d.B.block<3, 3>(err::foot_vel(l), noise_idx::foot_vel(l)) = I;
  }
  d.B.block<3, 3>(err::kAccelBias, noise_idx::kAccelBias) = I;
  d.B.block<3, 3>(err::kGyroBias, noise_idx::kGyroBias) = I;
  return d;
}

NoiseCovariance continuous_noise(const NoiseConfig& noise, double alpha) {
  NoiseCovariance Q = NoiseCovariance::Zero();
  const Mat3 I = Mat3::Identity();
  Q.block<3, 3>(noise_idx::kAccel, noise_idx::kAccel) = noise.accel * noise.accel * I;
  Q.block<3, 3>(noise_idx::kGyro, noise_idx::kGyro) = noise.gyro * noise.gyro * I;
  for (int l = 0; l < kNumLegs; ++l) {
    Q.block<3, 3>(noise_idx::foot_vel(l), noise_idx::foot_vel(l)) = alpha * noise.foot_velocity;
  }
  Q.block<3, 3>(noise_idx::kAccelBias, noise_idx::kAccelBias) =
      noise.accel_bias * noise.accel_bias * I;
  Q.block<3, 3>(noise_idx::kGyroBias, noise_idx::kGyroBias) =
      noise.gyro_bias * noise.gyro_bias * I;
  return Q;
}

Estimate predict(const Estimate& est, const ImuSample& imu, double dt, double alpha,
                 const FilterModel& model) {
  const ErrorDynamics lin = error_dynamics_matrices(est.x, imu);
  // The point-contact model pins stance feet, so foot velocity gets no noise.
  const double foot_scale = model.contact == ContactModel::PointContact ? 0.0 : alpha;
  const NoiseCovariance Qc = continuous_noise(model.noise, foot_scale);
  const auto disc = discretize<kStateDim, kNoiseDim>(lin.A, lin.B, Qc, dt,
                                                     model.options.discretization);
  Estimate out;
  out.t = est.t + dt;
  out.x = propagate_nominal(est.x, imu, dt, model.options.gravity, model.options.max_dt);
  out.P.noalias() = disc.Gamma * est.P * disc.Gamma.transpose();
  out.P += disc.Qd;
  symmetrize(out.P);
  return out;
}

void predict_through(Estimate& est, std::span<const ImuSample> window, double t_end,
                     double alpha, const FilterModel& model) {
  constexpr double kMinStep = 1e-12;
  for (std::size_t i = 0; i < window.size(); ++i) {
    const double seg_end = (i + 1 < window.size()) ? std::min(window[i + 1].t, t_end) : t_end;
    const double dt = seg_end - est.t;
    if (dt > kMinStep) {
      est = predict(est, window[i], dt, alpha, model);
      est.t = seg_end;
    }
  }
  est.t = std::max(est.t, t_end);
}

// ---------------------------------------------------------------------------

Vec6 kinematic_observation(const JointState& joints, const Vec3& body_rate, const LegParams& leg) {
  const Vec3 zeta = kinematics::forward(joints.angles, leg);
  const Mat3 J = kinematics::jacobian(joints.angles, leg);
  Vec6 y;
  y.head<3>() = zeta;
  y.tail<3>() = -J * joints.rates - body_rate.cross(zeta);
  return y;
}

Vec6 point_contact_prediction(const RobotState& x, int leg) {
  Vec6 h;
  h.head<3>() = x.G.transpose() * (x.feet[leg] - x.p);
  h.tail<3>() = x.G.transpose() * x.v;
  return h;
}

Vec9 rolling_prediction(const RobotState& x, int leg, const JointState& joints,
                        const Vec3& body_rate, const Vec3& radius) {
  const Vec3 omega_f = kinematics::foot_angular_velocity(joints, body_rate, x.G);
  Vec9 h;
  h.segment<3>(0) = x.G.transpose() * (x.feet[leg] - x.p);
  h.segment<3>(3) = x.G.transpose() * (x.v - x.foot_vel[leg]);
  h.segment<3>(6) = x.foot_vel[leg] - kinematics::rolling_velocity(omega_f, radius);
  return h;
}

Measurement measurement_point_contact(const RobotState& x, int leg, const JointState& joints,
                                      const Vec3& body_rate, const FilterModel& model) {
  const auto& params = model.legs[static_cast<std::size_t>(leg)];
  const Mat3 Gt = x.G.transpose();
  Measurement m;
  m.residual = kinematic_observation(joints, body_rate, params) - point_contact_prediction(x, leg);
  m.H = JacobianRows::Zero(6, kStateDim);
  m.H.block<3, 3>(0, err::kPos) = -Gt;
  m.H.block<3, 3>(0, err::foot_pos(leg)) = Gt;
  m.H.block<3, 3>(0, err::kRot) = so3::skew(Gt * (x.feet[leg] - x.p));
  m.H.block<3, 3>(3, err::kVel) = Gt;
  m.H.block<3, 3>(3, err::kRot) = so3::skew(Gt * x.v);
  m.R = Eigen::MatrixXd::Zero(6, 6);
  m.R.diagonal() << Vec3::Constant(model.noise.meas_position), Vec3::Constant(model.noise.meas_velocity);
  return m;
}

Measurement measurement_rolling(const RobotState& x, int leg, const JointState& joints,
                                const Vec3& body_rate, const FilterModel& model) {
  const auto& params = model.legs[static_cast<std::size_t>(leg)];
  const Vec3 radius = kinematics::contact_radius(params.foot_radius, model.options.ground_normal);
  const Mat3 Gt = x.G.transpose();
  const Vec3 foot_rate_body = body_rate + kinematics::rotational_jacobian(joints.angles) * joints.rates;

  Vec9 y = Vec9::Zero();
  y.head<6>() = kinematic_observation(joints, body_rate, params);

  Measurement m;
  m.residual = y - rolling_prediction(x, leg, joints, body_rate, radius);
  m.H = JacobianRows::Zero(9, kStateDim);
  m.H.block<3, 3>(0, err::kPos) = -Gt;
  m.H.block<3, 3>(0, err::foot_pos(leg)) = Gt;
  m.H.block<3, 3>(0, err::kRot) = so3::skew(Gt * (x.feet[leg] - x.p));
  m.H.block<3, 3>(3, err::kVel) = Gt;
  m.H.block<3, 3>(3, err::foot_vel(leg)) = -Gt;
  m.H.block<3, 3>(3, err::kRot) = so3::skew(Gt * (x.v - x.foot_vel[leg]));
  m.H.block<3, 3>(6, err::foot_vel(leg)) = Mat3::Identity();
  // omega_f x r = -r x (G exp(dTheta) w)  =>  d/d dTheta = r^x G w^x
  m.H.block<3, 3>(6, err::kRot) = -so3::skew(radius) * x.G * so3::skew(foot_rate_body);
  m.R = Eigen::MatrixXd::Zero(9, 9);
  m.R.diagonal() << Vec3::Constant(model.noise.meas_position),
      Vec3::Constant(model.noise.meas_velocity), Vec3::Constant(model.noise.meas_rolling);
  return m;
}

Measurement stack_measurements(const RobotState& x, const LegSample& legs, const Vec3& body_rate,
                               const FilterModel& model) {
  const int per_foot = model.contact == ContactModel::Rolling ? 9 : 6;
  int stance = 0;
  for (bool c : legs.contact) stance += c ? 1 : 0;

  Measurement out;
  const Eigen::Index rows = stance * per_foot;
  out.residual.resize(rows);
  out.H = JacobianRows::Zero(rows, kStateDim);
  out.R = Eigen::MatrixXd::Zero(rows, rows);
  Eigen::Index r = 0;
  for (int l = 0; l < kNumLegs; ++l) {
    if (!legs.contact[l]) continue;
    const Measurement m = model.contact == ContactModel::Rolling
                              ? measurement_rolling(x, l, legs.joints[l], body_rate, model)
                              : measurement_point_contact(x, l, legs.joints[l], body_rate, model);
    out.residual.segment(r, per_foot) = m.residual;
    out.H.middleRows(r, per_foot) = m.H;
    out.R.block(r, r, per_foot, per_foot) = m.R;
    r += per_foot;
  }
  return out;
}

UpdateResult update(const Estimate& est, const Measurement& meas, const FilterOptions& options) {
  UpdateResult res;
  res.est = est;
  res.innovation = meas.residual;
  if (meas.rows() == 0) {
    return res;
  }
  const Eigen::Matrix<double, Eigen::Dynamic, kStateDim> HP = meas.H * est.P;
  res.S = HP * meas.H.transpose() + meas.R;
  res.S = (0.5 * (res.S + res.S.transpose())).eval();

  const Eigen::LLT<Eigen::MatrixXd> llt(res.S);
  if (llt.info() != Eigen::Success || !(llt.rcond() * options.max_condition > 1.0)) {
    res.ill_conditioned = true;
    return res;
  }

  // K = P H^T S^-1 = (S^-1 H P)^T
  const Eigen::Matrix<double, kStateDim, Eigen::Dynamic> K = llt.solve(HP).transpose();
  const ErrorVector dx = K * meas.residual;

  StateMatrix IKH = StateMatrix::Identity();
  IKH.noalias() -= K * meas.H;
  Covariance P = IKH * est.P * IKH.transpose();
  P.noalias() += K * meas.R * K.transpose();
  symmetrize(P);

  res.est.x = boxplus(est.x, dx);
  res.est.P = P;
  res.applied = true;
  return res;
}

Estimate on_contact_transition(const Estimate& est, const ContactFlags& previous,
                               const LegSample& legs, const FilterModel& model) {
  Estimate out = est;
  for (int l = 0; l < kNumLegs; ++l) {
    if (!legs.contact[l] || previous[l]) continue;
    const Vec3 zeta = kinematics::forward(legs.joints[l].angles, model.legs[static_cast<std::size_t>(l)]);
    out.x.feet[l] = out.x.p + out.x.G * zeta;
    out.x.foot_vel[l].setZero();
    for (const int block : {err::foot_pos(l), err::foot_vel(l)}) {
      out.P.middleRows<3>(block).setZero();
      out.P.middleCols<3>(block).setZero();
    }
    out.P.block<3, 3>(err::foot_pos(l), err::foot_pos(l)) =
        model.options.touchdown_position_var * Mat3::Identity();
    const double vel_var =
        model.contact == ContactModel::PointContact ? 0.0 : model.options.touchdown_velocity_var;
    out.P.block<3, 3>(err::foot_vel(l), err::foot_vel(l)) = vel_var * Mat3::Identity();
  }
  return out;
}

CorrectionResult correct(Estimate& est, const LegSample& legs, ContactFlags& contact,
                         const ImuSample& latest_imu, const FilterModel& model) {
  if (legs.contact != contact) {
    est = on_contact_transition(est, contact, legs, model);
    contact = legs.contact;
  }
  const Vec3 body_rate = debias_imu(latest_imu, est.x).gyro;
  const Measurement meas = stack_measurements(est.x, legs, body_rate, model);
  UpdateResult upd = update(est, meas, model.options);
  est = std::move(upd.est);

  CorrectionResult out;
  out.innovation = std::move(upd.innovation);
  out.S = std::move(upd.S);
  out.applied = upd.applied;
  out.ill_conditioned = upd.ill_conditioned;
  return out;
}

}  // namespace legodom
