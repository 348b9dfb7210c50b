#include "legodom/state.hpp"

namespace legodom {

bool RobotState::all_finite() const {
  bool ok = p.allFinite() && v.allFinite() && G.allFinite() && accel_bias.allFinite() &&
            gyro_bias.allFinite();
  for (int l = 0; l < kNumLegs; ++l) {
    ok = ok && feet[l].allFinite() && foot_vel[l].allFinite();
  }
  return ok;
}

RobotState boxplus(const RobotState& x, const ErrorVector& dx) {
  RobotState out = x;
  out.p += dx.segment<3>(err::kPos);
  out.v += dx.segment<3>(err::kVel);
  out.G = so3::boxplus(x.G, dx.segment<3>(err::kRot));
  for (int l = 0; l < kNumLegs; ++l) {
    out.feet[l] += dx.segment<3>(err::foot_pos(l));
    out.foot_vel[l] += dx.segment<3>(err::foot_vel(l));
  }
  out.accel_bias += dx.segment<3>(err::kAccelBias);
  out.gyro_bias += dx.segment<3>(err::kGyroBias);
  return out;
}

ErrorVector boxminus(const RobotState& a, const RobotState& b) {
  ErrorVector d;
  d.segment<3>(err::kPos) = a.p - b.p;
  d.segment<3>(err::kVel) = a.v - b.v;
  d.segment<3>(err::kRot) = so3::boxminus(a.G, b.G);
  for (int l = 0; l < kNumLegs; ++l) {
    d.segment<3>(err::foot_pos(l)) = a.feet[l] - b.feet[l];
    d.segment<3>(err::foot_vel(l)) = a.foot_vel[l] - b.foot_vel[l];
  }
  d.segment<3>(err::kAccelBias) = a.accel_bias - b.accel_bias;
  d.segment<3>(err::kGyroBias) = a.gyro_bias - b.gyro_bias;
  return d;
}

double symmetrize(Covariance& P) {
  const double asym = (P - P.transpose()).norm();
  P = 0.5 * (P + P.transpose()).eval();
  return asym;
}

}  // namespace legodom
