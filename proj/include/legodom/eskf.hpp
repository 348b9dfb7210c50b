#pragma once

#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "legodom/state.hpp"

namespace legodom {

/// Continuous-time process noise densities and measurement covariances.
struct NoiseConfig {
  double accel = 2e-3;         // m/s^2/sqrt(Hz)
  double gyro = 2e-4;          // rad/s/sqrt(Hz)
  double accel_bias = 1e-4;    // m/s^3/sqrt(Hz)
  double gyro_bias = 1e-5;     // rad/s^2/sqrt(Hz)
  Mat3 foot_velocity = 1e-4 * Mat3::Identity();  // Q_vf, (m/s)^2/s per foot
  double meas_position = 1e-4;  // m^2
  double meas_velocity = 1e-3;  // (m/s)^2
  double meas_rolling = 1e-2;   // (m/s)^2
  double alpha = 1.0;           // foot-velocity noise scale, >= 1

  void validate() const;
};

enum class DiscretizationMethod { Series, VanLoan };

struct DiscretizationOptions {
  DiscretizationMethod method = DiscretizationMethod::Series;
  int series_order = 2;
};

struct FilterOptions {
  Vec3 gravity = kDefaultGravity;
  DiscretizationOptions discretization;
  double max_dt = 0.02;
  // Touchdown prior for the foot position / velocity blocks.
  double touchdown_position_var = 1e2;
  double touchdown_velocity_var = 1.0;
  double max_condition = 1e12;
  Vec3 ground_normal = Vec3::UnitZ();
};

enum class ContactModel { PointContact, Rolling };

/// Everything a mode-conditioned filter shares with its siblings.
struct FilterModel {
  std::array<LegParams, kNumLegs> legs = default_legs();
  NoiseConfig noise;
  FilterOptions options;
  ContactModel contact = ContactModel::Rolling;
};

struct Estimate {
  double t = 0.0;
  RobotState x;
  Covariance P = Covariance::Identity();
};

struct DebiasedImu {
  Vec3 gyro;
  Vec3 accel;
};

DebiasedImu debias_imu(const ImuSample& sample, const RobotState& state);

/// RK4 with zero-order-hold IMU input. Rejects dt <= 0, dt > max_dt and
/// non-finite samples.
RobotState propagate_nominal(const RobotState& state, const ImuSample& imu, double dt,
                             const Vec3& gravity = kDefaultGravity, double max_dt = 0.02);

struct ErrorDynamics {
  StateMatrix A;
  NoiseInput B;
};

/// Linearized error dynamics (right-perturbation convention).
ErrorDynamics error_dynamics_matrices(const RobotState& state, const ImuSample& imu);

/// diag(accel^2, gyro^2, alpha*Q_vf x4, accel_bias^2, gyro_bias^2)
NoiseCovariance continuous_noise(const NoiseConfig& noise, double alpha);

template <typename Scalar, int N>
struct Discretization {
  Eigen::Matrix<Scalar, N, N> Gamma;
  Eigen::Matrix<Scalar, N, N> Qd;
};

/// Transition matrix and discrete process noise over dt.
///   Series:  Gamma = sum_{k<=order} (A dt)^k / k!,
///            Qd = 1/2 (Gamma B Q B^T Gamma^T + B Q B^T) dt
///   VanLoan: exact matrix-fraction evaluation via a 2N x 2N exponential.
template <int N, int W>
Discretization<double, N> discretize(const Eigen::Matrix<double, N, N>& A,
                                     const Eigen::Matrix<double, N, W>& B,
                                     const Eigen::Matrix<double, W, W>& Qc, double dt,
                                     const DiscretizationOptions& opts = {}) {
  using MatN = Eigen::Matrix<double, N, N>;
  const Eigen::Index n = A.rows();
  const MatN BQB = B * Qc * B.transpose();
  Discretization<double, N> out;

  if (opts.method == DiscretizationMethod::VanLoan) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    M.topLeftCorner(n, n) = -A * dt;
    M.topRightCorner(n, n) = BQB * dt;
    M.bottomRightCorner(n, n) = A.transpose() * dt;
    const Eigen::MatrixXd E = M.exp();
    out.Gamma = E.bottomRightCorner(n, n).transpose();
    out.Qd = out.Gamma * E.topRightCorner(n, n);
  } else {
    const MatN Adt = A * dt;
    out.Gamma = MatN::Identity(n, n);
    MatN term = MatN::Identity(n, n);
    for (int k = 1; k <= opts.series_order; ++k) {
      term = (term * Adt / static_cast<double>(k)).eval();
      out.Gamma += term;
    }
    out.Qd = 0.5 * (out.Gamma * BQB * out.Gamma.transpose() + BQB) * dt;
  }
  out.Qd = (0.5 * (out.Qd + out.Qd.transpose())).eval();
  return out;
}

/// Nominal propagation plus P' = Gamma P Gamma^T + Qd, with the
/// foot-velocity noise scaled by alpha (and zero under point contact).
Estimate predict(const Estimate& est, const ImuSample& imu, double dt, double alpha,
                 const FilterModel& model);

/// Predicts through `window` up to t_end. Each sample is held from
/// max(its time, est.t) until the next sample time (or t_end).
void predict_through(Estimate& est, std::span<const ImuSample> window, double t_end,
                     double alpha, const FilterModel& model);

// ---------------------------------------------------------------------------
// Measurement models

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using JacobianRows = Eigen::Matrix<double, Eigen::Dynamic, kStateDim>;

/// Kinematic observation [zeta(phi); -J(phi) phi_dot - body_rate x zeta(phi)].
Vec6 kinematic_observation(const JointState& joints, const Vec3& body_rate, const LegParams& leg);

/// h_pc = [G^T (f - p); G^T v]
Vec6 point_contact_prediction(const RobotState& x, int leg);

/// h_r = [G^T (f - p); G^T (v - v_f); v_f - omega_f x r], with omega_f taken
/// from the leg kinematics and the state orientation.
Vec9 rolling_prediction(const RobotState& x, int leg, const JointState& joints,
                        const Vec3& body_rate, const Vec3& radius);

struct Measurement {
  Eigen::VectorXd residual;
  JacobianRows H;
  Eigen::MatrixXd R;

  Eigen::Index rows() const { return residual.size(); }
};

Measurement measurement_point_contact(const RobotState& x, int leg, const JointState& joints,
                                      const Vec3& body_rate, const FilterModel& model);

Measurement measurement_rolling(const RobotState& x, int leg, const JointState& joints,
                                const Vec3& body_rate, const FilterModel& model);

/// Rows for every stance foot in leg order, using model.contact.
Measurement stack_measurements(const RobotState& x, const LegSample& legs,
                               const Vec3& body_rate, const FilterModel& model);

struct UpdateResult {
  Estimate est;
  Eigen::VectorXd innovation;
  Eigen::MatrixXd S;
  bool applied = false;
  bool ill_conditioned = false;
};

/// Joseph-form ESKF correction with injection by boxplus. Skips the update
/// (applied=false, ill_conditioned=true) when S is not positive definite or
/// its condition number exceeds options.max_condition.
UpdateResult update(const Estimate& est, const Measurement& meas, const FilterOptions& options);

/// Touchdown re-initializes the foot from kinematics and resets its 6x6
/// covariance block (velocity variance 0 under point contact); lift-off
/// changes nothing.
Estimate on_contact_transition(const Estimate& est, const ContactFlags& previous,
                               const LegSample& legs, const FilterModel& model);

struct CorrectionResult {
  Eigen::VectorXd innovation;
  Eigen::MatrixXd S;
  bool applied = false;
  bool ill_conditioned = false;
};

/// Touchdown handling, stacked measurement and update at one leg sample.
/// `latest_imu` provides the body rate used inside the kinematic observation.
CorrectionResult correct(Estimate& est, const LegSample& legs, ContactFlags& contact,
                         const ImuSample& latest_imu, const FilterModel& model);

}  // namespace legodom
