#include <numbers>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "fd_oracles.hpp"
#include "test_support.hpp"

#include "legodom/error.hpp"
#include "legodom/eskf.hpp"

using namespace legodom;
namespace lt = legodom::test;

namespace {

using lt::random_state;
using lt::random_joints;
using lt::Flow;
using lt::numeric_error_dynamics;
using lt::numeric_measurement_jacobian;
using lt::relative_error;

FilterModel rolling_model() {
  FilterModel m;
  m.contact = ContactModel::Rolling;
  return m;
}

}  // namespace

TEST_CASE("debias") {
  RobotState x;
  ImuSample s{0.0, Vec3(0.1, 0, 0), Vec3(0, 0, 9.91)};
  DebiasedImu u = debias_imu(s, x);
  CHECK(u.gyro == s.gyro);
  CHECK(u.accel == s.accel);
  x.gyro_bias = Vec3(0.1, 0, 0);
  x.accel_bias = Vec3(0, 0, 0.10);
  u = debias_imu(s, x);
  CHECK(u.gyro.isZero(0.0));
  CHECK((u.accel - Vec3(0, 0, 9.81)).norm() < 1e-14);
}

TEST_CASE("nominal propagation") {
  RobotState x;
  const ImuSample still{0.0, Vec3::Zero(), Vec3(0, 0, 9.81)};
  const RobotState y = propagate_nominal(x, still, 0.01);
  CHECK(y.p.isZero(0.0));
  CHECK(y.v.isZero(0.0));
  CHECK(y.G == Mat3::Identity());

  x.v = Vec3(1, 0, 0);
  const RobotState z = propagate_nominal(x, still, 0.5, kDefaultGravity, 1.0);
  CHECK((z.p - Vec3(0.5, 0, 0)).norm() < 1e-15);

  RobotState spin;
  const ImuSample turn{0.0, Vec3(0, 0, 1), Vec3(0, 0, 9.81)};
  for (int i = 0; i < 1000; ++i) spin = propagate_nominal(spin, turn, 0.001);
  CHECK((spin.G - lt::rot_z(1.0)).norm() < 1e-9);

  CHECK_THROWS_AS(propagate_nominal(x, still, 0.0), Error);
  CHECK_THROWS_AS(propagate_nominal(x, still, -1e-3), Error);
  ImuSample bad = still;
  bad.accel.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(propagate_nominal(x, bad, 1e-3), Error);
}

TEST_CASE("error dynamics match finite differences at 100 random states") {
  std::mt19937_64 rng(21);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const RobotState x = random_state(rng);
    Flow flow;
    flow.gyro = Vec3(lt::uniform(rng, -2, 2), lt::uniform(rng, -2, 2), lt::uniform(rng, -2, 2));
    flow.accel = Vec3(lt::uniform(rng, -3, 3), lt::uniform(rng, -3, 3), lt::uniform(rng, 6, 13));
    const ImuSample imu{0.0, flow.gyro, flow.accel};
    const StateMatrix A = error_dynamics_matrices(x, imu).A;
    worst = std::max(worst, relative_error(A, numeric_error_dynamics(x, flow)));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("error dynamics with zero input") {
  RobotState x;
  const ErrorDynamics d = error_dynamics_matrices(x, ImuSample{});
  CHECK(d.A.block<3, 3>(err::kVel, err::kRot).isZero(0.0));
  CHECK(d.B.block<3, 3>(err::kVel, noise_idx::kAccel) == -Mat3::Identity());
}

TEST_CASE("discretization") {
  using Mat2 = Eigen::Matrix2d;
  using Vec2 = Eigen::Vector2d;
  const double dt = 0.3;
  const double q = 0.7;
  Mat2 A;
  A << 0, 1, 0, 0;
  const Vec2 B(0, 1);
  const Eigen::Matrix<double, 1, 1> Q = Eigen::Matrix<double, 1, 1>::Constant(q);

  // integral of e^{As} B Q B^T e^{A^T s} ds over [0, dt]
  Mat2 analytic;
  analytic << q * dt * dt * dt / 3, q * dt * dt / 2, q * dt * dt / 2, q * dt;
  Mat2 gamma;
  gamma << 1, dt, 0, 1;

  DiscretizationOptions vl;
  vl.method = DiscretizationMethod::VanLoan;
  const auto exact = discretize<2, 1>(A, B, Q, dt, vl);
  CHECK((exact.Gamma - gamma).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((exact.Qd - analytic).cwiseAbs().maxCoeff() < 1e-10);

  const auto series = discretize<2, 1>(A, B, Q, dt);
  CHECK(series.Gamma == gamma);

  const auto frozen = discretize<2, 1>(Mat2::Zero(), B, Q, dt);
  CHECK(frozen.Gamma == Mat2::Identity());
  CHECK((frozen.Qd - B * Q * B.transpose() * dt).norm() < 1e-15);

  const auto quiet = discretize<2, 1>(A, B, Eigen::Matrix<double, 1, 1>::Zero(), dt, vl);
  CHECK(quiet.Qd.isZero(0.0));
}

TEST_CASE("van loan agrees with the series form for the full error state") {
  std::mt19937_64 rng(4);
  const RobotState x = random_state(rng);
  const ImuSample imu{0.0, Vec3(0.3, -0.2, 0.5), Vec3(0.5, 0.1, 9.7)};
  const ErrorDynamics d = error_dynamics_matrices(x, imu);
  const NoiseCovariance Qc = continuous_noise(NoiseConfig{}, 1.0);
  DiscretizationOptions vl;
  vl.method = DiscretizationMethod::VanLoan;
  const auto a = discretize<kStateDim, kNoiseDim>(d.A, d.B, Qc, 0.002, vl);
  const auto b = discretize<kStateDim, kNoiseDim>(d.A, d.B, Qc, 0.002);
  CHECK(relative_error(b.Gamma, a.Gamma) < 1e-8);
  CHECK(relative_error(b.Qd, a.Qd) < 1e-5);
}

TEST_CASE("alpha scales only the foot-velocity noise") {
  RobotState x;
  const ImuSample imu{0.0, Vec3(0.1, 0, 0), Vec3(0, 0, 9.81)};
  const ErrorDynamics d = error_dynamics_matrices(x, imu);
  const NoiseConfig noise;
  const auto q1 = discretize<kStateDim, kNoiseDim>(d.A, d.B, continuous_noise(noise, 1.0), 0.002);
  const auto q100 =
      discretize<kStateDim, kNoiseDim>(d.A, d.B, continuous_noise(noise, 100.0), 0.002);
  const int f0 = err::kFootPos;
  const int nf = err::kAccelBias - err::kFootPos;
  CHECK((q100.Qd.block(f0, f0, nf, nf) - 100.0 * q1.Qd.block(f0, f0, nf, nf)).norm() <
        1e-12 * q100.Qd.norm());
  CHECK((q100.Qd.topLeftCorner<9, 9>() - q1.Qd.topLeftCorner<9, 9>()).norm() == 0.0);
  CHECK((q100.Qd.bottomRightCorner<6, 6>() - q1.Qd.bottomRightCorner<6, 6>()).norm() == 0.0);
}

TEST_CASE("predict") {
  FilterModel model = rolling_model();
  model.noise.accel = model.noise.gyro = model.noise.accel_bias = model.noise.gyro_bias = 0.0;
  model.noise.foot_velocity.setZero();
  Estimate est;
  est.P.setZero();
  const ImuSample still{0.0, Vec3::Zero(), Vec3(0, 0, 9.81)};
  const Estimate next = predict(est, still, 0.002, 1.0, model);
  CHECK(next.P.isZero(0.0));
  CHECK(next.t == doctest::Approx(0.002));

  // under point contact the foot-velocity blocks get no noise
  FilterModel pc;
  pc.contact = ContactModel::PointContact;
  Estimate e0;
  e0.P.setZero();
  const Estimate pcn = predict(e0, still, 0.002, 100.0, pc);
  CHECK(pcn.P.block<12, 12>(err::kFootVel, err::kFootVel).isZero(0.0));
  const Estimate rn = predict(e0, still, 0.002, 100.0, rolling_model());
  CHECK(rn.P(err::kFootVel, err::kFootVel) > 0.0);
}

TEST_CASE("predict_through holds samples across the window") {
  const FilterModel model = rolling_model();
  std::vector<ImuSample> window;
  for (int k = 0; k < 4; ++k) window.push_back({0.002 * k, Vec3(0, 0, 0.5), Vec3(0, 0, 9.81)});
  Estimate est;
  predict_through(est, window, 0.008, 1.0, model);
  CHECK(est.t == doctest::Approx(0.008));
  CHECK((est.x.G - lt::rot_z(0.004)).norm() < 1e-12);
}

TEST_CASE("measurement jacobians match finite differences") {
  std::mt19937_64 rng(33);
  const FilterModel model = rolling_model();
  double worst_pc = 0.0;
  double worst_roll = 0.0;
  for (int i = 0; i < 100; ++i) {
    const RobotState x = random_state(rng);
    const JointState j = random_joints(rng);
    const int leg = i % kNumLegs;
    const Vec3 w(lt::uniform(rng, -1, 1), lt::uniform(rng, -1, 1), lt::uniform(rng, -1, 1));

    const Measurement pc = measurement_point_contact(x, leg, j, w, model);
    const JacobianRows Hpc = numeric_measurement_jacobian(
        x, 6, [&](const RobotState& s) { return Eigen::VectorXd(point_contact_prediction(s, leg)); });
    worst_pc = std::max(worst_pc, relative_error(pc.H, Hpc));

    const Vec3 r = kinematics::contact_radius(model.legs[static_cast<std::size_t>(leg)].foot_radius);
    const Measurement ro = measurement_rolling(x, leg, j, w, model);
    const JacobianRows Hro = numeric_measurement_jacobian(x, 9, [&](const RobotState& s) {
      return Eigen::VectorXd(rolling_prediction(s, leg, j, w, r));
    });
    worst_roll = std::max(worst_roll, relative_error(ro.H, Hro));
  }
  CHECK(worst_pc < 1e-5);
  CHECK(worst_roll < 1e-5);
}

TEST_CASE("consistent states give zero residuals") {
  std::mt19937_64 rng(2);
  const FilterModel model = rolling_model();
  for (int i = 0; i < 10; ++i) {
    RobotState x = random_state(rng);
    const int leg = i % kNumLegs;
    const auto& params = model.legs[static_cast<std::size_t>(leg)];
    const JointState j = random_joints(rng);
    const Vec3 w(0.2, -0.1, 0.3);
    const Vec3 zeta = kinematics::forward(j.angles, params);
    x.feet[leg] = x.p + x.G * zeta;
    const Vec3 omega_f = kinematics::foot_angular_velocity(j, w, x.G);
    x.foot_vel[leg] = omega_f.cross(kinematics::contact_radius(params.foot_radius));
    const Vec3 rel_body = -kinematics::jacobian(j.angles, params) * j.rates - w.cross(zeta);
    x.v = x.foot_vel[leg] + x.G * rel_body;
    CHECK(measurement_rolling(x, leg, j, w, model).residual.norm() < 1e-12);
  }

  RobotState x;
  x.feet[1] = x.p + kinematics::forward(Vec3::Zero(), model.legs[1]);
  const Measurement pc = measurement_point_contact(x, 1, JointState{}, Vec3::Zero(), model);
  CHECK(pc.rows() == 6);
  CHECK(pc.residual.isZero(0.0));

  // without any rotation the rolling block only sees the foot velocity
  x.foot_vel[1] = Vec3(0.1, -0.2, 0.05);
  const Measurement ro = measurement_rolling(x, 1, JointState{}, Vec3::Zero(), model);
  CHECK((ro.residual.tail<3>() + x.foot_vel[1]).norm() < 1e-15);
}

TEST_CASE("stacking skips swing feet") {
  FilterModel model = rolling_model();
  LegSample legs;
  legs.contact = {true, false, false, true};
  const Measurement m = stack_measurements(RobotState{}, legs, Vec3::Zero(), model);
  CHECK(m.rows() == 18);
  CHECK(m.R.rows() == 18);
  CHECK(m.H.block<9, 3>(0, err::foot_pos(0)).norm() > 0.0);
  CHECK(m.H.block<9, 3>(9, err::foot_pos(3)).norm() > 0.0);
  CHECK(m.H.middleCols<3>(err::foot_pos(1)).isZero(0.0));
  model.contact = ContactModel::PointContact;
  CHECK(stack_measurements(RobotState{}, legs, Vec3::Zero(), model).rows() == 12);
  legs.contact = {false, false, false, false};
  CHECK(stack_measurements(RobotState{}, legs, Vec3::Zero(), model).rows() == 0);
}

TEST_CASE("update") {
  FilterOptions options;
  Estimate est;
  est.P = Covariance::Identity();

  Measurement scalar;
  scalar.residual = Eigen::VectorXd::Constant(1, 1.0);
  scalar.H = JacobianRows::Zero(1, kStateDim);
  scalar.H(0, err::kPos) = 1.0;
  scalar.R = Eigen::MatrixXd::Identity(1, 1);
  const UpdateResult r = update(est, scalar, options);
  CHECK(r.applied);
  CHECK(r.est.x.p.x() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.est.P(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.S(0, 0) == doctest::Approx(2.0));
  // bias blocks carry no information here
  CHECK(r.est.x.accel_bias.isZero(0.0));
  CHECK(r.est.x.gyro_bias.isZero(0.0));
  CHECK(r.est.P.bottomRightCorner<6, 6>() == Eigen::Matrix<double, 6, 6>::Identity());

  // zero residual leaves the state and shrinks P
  std::mt19937_64 rng(8);
  Estimate e2;
  e2.x = random_state(rng);
  const Eigen::MatrixXd L = Eigen::MatrixXd::Random(kStateDim, kStateDim);
  e2.P = L * L.transpose() + Covariance::Identity();
  Measurement m = measurement_rolling(e2.x, 0, random_joints(rng), Vec3(0.1, 0, 0), rolling_model());
  m.residual.setZero();
  const UpdateResult z = update(e2, m, options);
  CHECK(z.applied);
  CHECK(boxminus(z.est.x, e2.x).isZero(0.0));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(e2.P - z.est.P);
  CHECK(eig.eigenvalues().minCoeff() > -1e-9);

  // singular S is skipped and flagged
  Measurement empty_info;
  empty_info.residual = Eigen::VectorXd::Ones(3);
  empty_info.H = JacobianRows::Zero(3, kStateDim);
  empty_info.R = Eigen::MatrixXd::Zero(3, 3);
  const UpdateResult s = update(est, empty_info, options);
  CHECK_FALSE(s.applied);
  CHECK(s.ill_conditioned);
  CHECK(s.est.P == est.P);
}

TEST_CASE("contact transitions") {
  FilterModel model = rolling_model();
  Estimate est;
  est.x.p = Vec3(1, 0, 0);
  est.P = 0.5 * Covariance::Identity();
  est.P(err::foot_pos(0), err::kPos) = est.P(err::kPos, err::foot_pos(0)) = 0.1;
  LegSample legs;
  ContactFlags previous{false, true, false, false};
  legs.contact = previous;

  const Estimate same = on_contact_transition(est, previous, legs, model);
  CHECK(same.P == est.P);
  CHECK(boxminus(same.x, est.x).isZero(0.0));

  legs.contact = {true, false, false, false};
  const Estimate td = on_contact_transition(est, previous, legs, model);
  CHECK((td.x.feet[0] - Vec3(1.24, 0.133, -0.50)).norm() < 1e-15);
  CHECK(td.x.foot_vel[0].isZero(0.0));
  CHECK(td.P(err::foot_pos(0), err::kPos) == 0.0);
  CHECK(td.P(err::foot_pos(0), err::foot_pos(0)) == model.options.touchdown_position_var);
  CHECK(td.P(err::foot_vel(0), err::foot_vel(0)) == model.options.touchdown_velocity_var);
  // lift-off of leg 2 changed nothing
  CHECK(td.P.block<6, 6>(err::foot_pos(1), err::foot_pos(1)) ==
        est.P.block<6, 6>(err::foot_pos(1), err::foot_pos(1)));

  model.contact = ContactModel::PointContact;
  const Estimate pc = on_contact_transition(est, previous, legs, model);
  CHECK(pc.P(err::foot_vel(0), err::foot_vel(0)) == 0.0);
}

TEST_CASE("noise validation") {
  NoiseConfig n;
  n.alpha = 0.5;
  CHECK_THROWS_AS(n.validate(), Error);
  n = NoiseConfig{};
  n.meas_position = -1.0;
  CHECK_THROWS_AS(n.validate(), Error);
}
