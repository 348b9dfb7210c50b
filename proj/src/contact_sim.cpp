#include "legodom/contact_sim.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <boost/math/quadrature/gauss.hpp>

#include "legodom/error.hpp"

namespace legodom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct PathPoint {
  Vec3 pos = Vec3::Zero();
  Vec3 tangent = Vec3::UnitX();    // d pos / ds
  Vec3 curvature = Vec3::Zero();   // d tangent / ds
  double heading = 0.0;
  double heading_rate = 0.0;       // d heading / ds
};

// y = A sin(k x), parameterized by arc length.
class Sinusoid {
 public:
  Sinusoid(double amplitude, double wavelength)
      : a_(amplitude), k_(kTwoPi / wavelength), lambda_(wavelength) {
    period_arc_ = panels(0.0, lambda_);
  }

  double slope(double x) const { return a_ * k_ * std::cos(k_ * x); }
  double second(double x) const { return -a_ * k_ * k_ * std::sin(k_ * x); }

  double arc(double x) const {
    const double periods = std::floor(x / lambda_);
    return periods * period_arc_ + panels(periods * lambda_, x);
  }

  double x_at(double s) const {
    double x = s * lambda_ / period_arc_;
    for (int it = 0; it < 50; ++it) {
      const double step = (arc(x) - s) / speed(x);
      x -= step;
      if (std::abs(step) < 1e-14 * (1.0 + std::abs(x))) break;
    }
    return x;
  }

 private:
  double speed(double x) const { return std::sqrt(1.0 + slope(x) * slope(x)); }

  double panels(double x0, double x1) const {
    constexpr int kPanelsPerPeriod = 32;
    const double width = lambda_ / kPanelsPerPeriod;
    const int n = std::max(1, static_cast<int>(std::ceil((x1 - x0) / width)));
    const double h = (x1 - x0) / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      total += boost::math::quadrature::gauss<double, 10>::integrate(
          [this](double u) { return speed(u); }, x0 + i * h, x0 + (i + 1) * h);
    }
    return total;
  }

  double a_, k_, lambda_;
  double period_arc_ = 0.0;
};

PathPoint path_point(const PathConfig& path, double s) {
  PathPoint pt;
  switch (path.type) {
    case PathType::Straight:
      pt.pos = Vec3(s, 0.0, 0.0);
      break;
    case PathType::Circular: {
      const double R = path.radius;
      const double th = s / R;
      pt.pos = Vec3(R * std::sin(th), R * (1.0 - std::cos(th)), 0.0);
      pt.tangent = Vec3(std::cos(th), std::sin(th), 0.0);
      pt.curvature = Vec3(-std::sin(th), std::cos(th), 0.0) / R;
      pt.heading = th;
      pt.heading_rate = 1.0 / R;
      break;
    }
    case PathType::Sinusoidal: {
      const Sinusoid curve(path.amplitude, path.wavelength);
      const double x = curve.x_at(s);
      const double dy = curve.slope(x);
      const double ddy = curve.second(x);
      const double norm = std::sqrt(1.0 + dy * dy);
      pt.pos = Vec3(x, path.amplitude * std::sin(kTwoPi * x / path.wavelength), 0.0);
      pt.tangent = Vec3(1.0, dy, 0.0) / norm;
      pt.heading = std::atan2(dy, 1.0);
      pt.heading_rate = ddy / (norm * norm * norm);
      pt.curvature = pt.heading_rate * Vec3(-std::sin(pt.heading), std::cos(pt.heading), 0.0);
      break;
    }
    case PathType::Slope: {
      const double c = std::cos(path.angle);
      const double sn = std::sin(path.angle);
      pt.pos = Vec3(s * c, 0.0, s * sn);
      pt.tangent = Vec3(c, 0.0, sn);
      break;
    }
  }
  return pt;
}

double slope_angle(const ScenarioConfig& config) {
  return config.path.type == PathType::Slope ? config.path.angle : 0.0;
}

struct LegTrack {
  bool stance = true;
  Vec3 f = Vec3::Zero();
  double touchdown_t = -std::numeric_limits<double>::infinity();
  Vec3 swing_from = Vec3::Zero();
  Vec3 swing_to = Vec3::Zero();
};

double gait_period(const GaitConfig& g) { return g.stance_duration + g.swing_duration; }

/// Time since the start of the current gait cycle of `leg` (stance first).
double cycle_phase(const ScenarioConfig& config, int leg, double t) {
  const bool pair_b = leg == static_cast<int>(LegId::RF) || leg == static_cast<int>(LegId::LH);
  const double offset = pair_b ? config.gait.stance_duration : 0.0;
  const double T = gait_period(config.gait);
  double tau = std::fmod(t - offset, T);
  if (tau < 0.0) tau += T;
  return tau;
}

Vec3 foothold(const ScenarioConfig& config, int leg, double t) {
  const BodyKinematics body = body_at(config, t);
  const LegParams& params = config.legs[static_cast<std::size_t>(leg)];
  const Vec3 hip = body.p + body.G * (params.hip_offset + Vec3(0.0, params.side_sign * params.l1, 0.0));
  const Vec3 contact(hip.x(), hip.y(), ground_height(config, hip.x(), hip.y()));
  return contact + params.foot_radius * ground_normal(config, hip.x(), hip.y());
}

Vec3 foot_disturbance(const ScenarioConfig& config, int leg, double t, double touchdown_t) {
  Vec3 e = Vec3::Zero();
  for (const auto& w : config.slip_windows) {
    if (t < w.t_start || t >= w.t_end) continue;
    for (int l : w.legs) {
      if (l == leg) e += w.velocity;
    }
  }
  if (config.touchdown_impulse > 0.0 && t - touchdown_t < 1.0 / config.leg_rate) {
    e.z() += config.touchdown_impulse;
  }
  return e;
}

bool foot_slipping(const ScenarioConfig& config, int leg, double t, double touchdown_t) {
  for (const auto& w : config.slip_windows) {
    if (t < w.t_start || t >= w.t_end) continue;
    for (int l : w.legs) {
      if (l == leg) return true;
    }
  }
  return config.touchdown_impulse > 0.0 && t - touchdown_t < 1.0 / config.leg_rate;
}

// Stance foot velocity. Rolling gives v_f = omega_f x r + e with
// omega_f = G (omega + J_rot phi_dot) and phi_dot = J^-1 (G^T (v_f - v) - omega x b),
// which is linear in v_f.
Vec3 stance_velocity(const ScenarioConfig& config, const BodyKinematics& body, int leg,
                     const Vec3& f, const Vec3& e) {
  const LegParams& params = config.legs[static_cast<std::size_t>(leg)];
  const Vec3 b = body.G.transpose() * (f - body.p);
  const Vec3 q = kinematics::inverse(b, params);
  const Mat3 J = kinematics::jacobian(q, params);
  const Mat3 Jr = kinematics::rotational_jacobian(q);
  const Vec3 r = kinematics::contact_radius(params.foot_radius, ground_normal(config, f.x(), f.y()));
  const Mat3 rx = so3::skew(r);
  const Mat3 W = -rx * body.G * Jr * J.inverse();
  const Vec3& w = body.omega_body;
  const Mat3 M = Mat3::Identity() - W * body.G.transpose();
  const Vec3 rhs = -rx * body.G * w - W * body.G.transpose() * body.v - W * w.cross(b) + e;
  return M.partialPivLu().solve(rhs);
}

struct Swing {
  Vec3 pos;
  Vec3 vel;
};

Swing cycloid(const Vec3& from, const Vec3& to, double height, double u, double duration) {
  const double th = kTwoPi * u;
  const double c = (th - std::sin(th)) / kTwoPi;
  const double dc = (1.0 - std::cos(th)) / duration;
  Swing s;
  s.pos = from + c * (to - from);
  s.pos.z() += height * 0.5 * (1.0 - std::cos(th));
  s.vel = dc * (to - from);
  s.vel.z() += height * std::numbers::pi * std::sin(th) / duration;
  return s;
}

std::string format_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

}  // namespace

PathProgress path_progress(const ScenarioConfig& config, double t) {
  PathProgress pr;
  if (config.is_stand() || t <= 0.0) return pr;
  const double vc = config.cruise_speed();
  const double D = config.duration;
  const double ramp = std::min(config.gait.ramp_duration, 0.5 * D);
  const double L = path_length(config);
  if (t >= D) {
    pr.s = L;
    return pr;
  }
  if (ramp <= 0.0) {
    pr.s = vc * t;
    pr.ds = vc;
    return pr;
  }
  const double acc = vc / ramp;
  if (t < ramp) {
    pr.s = 0.5 * acc * t * t;
    pr.ds = acc * t;
    pr.dds = acc;
  } else if (t < D - ramp) {
    pr.s = 0.5 * acc * ramp * ramp + vc * (t - ramp);
    pr.ds = vc;
  } else {
    const double tau = D - t;
    pr.s = L - 0.5 * acc * tau * tau;
    pr.ds = acc * tau;
    pr.dds = -acc;
  }
  return pr;
}

double path_length(const ScenarioConfig& config) {
  if (config.is_stand()) return 0.0;
  const double ramp = std::min(config.gait.ramp_duration, 0.5 * config.duration);
  return config.cruise_speed() * (config.duration - ramp);
}

BodyKinematics body_at(const ScenarioConfig& config, double t) {
  const PathProgress pr = path_progress(config, t);
  const PathPoint pt = path_point(config.path, pr.s);
  BodyKinematics b;
  b.p = pt.pos + Vec3(0.0, 0.0, config.gait.body_height);
  b.v = pr.ds * pt.tangent;
  b.a = pr.dds * pt.tangent + pr.ds * pr.ds * pt.curvature;
  b.G = (Eigen::AngleAxisd(pt.heading, Vec3::UnitZ()) *
         Eigen::AngleAxisd(-slope_angle(config), Vec3::UnitY()))
            .toRotationMatrix();
  b.omega_body = b.G.transpose() * Vec3(0.0, 0.0, pt.heading_rate * pr.ds);
  return b;
}

double ground_height(const ScenarioConfig& config, double x, double y) {
  const double k = kTwoPi / config.terrain.wavelength;
  return x * std::tan(slope_angle(config)) +
         config.terrain.amplitude * std::sin(k * x) * std::sin(k * y);
}

Vec3 ground_normal(const ScenarioConfig& config, double x, double y) {
  const double k = kTwoPi / config.terrain.wavelength;
  const double A = config.terrain.amplitude;
  const double hx = std::tan(slope_angle(config)) + A * k * std::cos(k * x) * std::sin(k * y);
  const double hy = A * k * std::sin(k * x) * std::cos(k * y);
  return Vec3(-hx, -hy, 1.0).normalized();
}

bool in_stance(const ScenarioConfig& config, int leg, double t) {
  if (config.is_stand()) return true;
  return cycle_phase(config, leg, t) < config.gait.stance_duration;
}

std::vector<GroundTruthRecord> generate_truth(const ScenarioConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(std::llround(config.duration * config.imu_rate));
  std::vector<GroundTruthRecord> out;
  out.reserve(n);
  if (n == 0) return out;

  const GaitConfig& gait = config.gait;
  std::array<LegTrack, kNumLegs> track;
  for (int l = 0; l < kNumLegs; ++l) {
    track[l].f = foothold(config, l, 0.0);
    track[l].stance = true;
  }

  const auto at = [&](std::size_t k) { return static_cast<double>(k) / config.imu_rate; };
  BodyKinematics body = body_at(config, 0.0);

  for (std::size_t k = 0; k < n; ++k) {
    const double t = at(k);
    GroundTruthRecord rec;
    rec.t = t;
    rec.p = body.p;
    rec.G = body.G;
    rec.v = body.v;
    rec.omega_body = body.omega_body;
    rec.accel_world = body.a;

    try {
      for (int l = 0; l < kNumLegs; ++l) {
        LegTrack& tr = track[l];
        const bool stance = in_stance(config, l, t);
        const double tau = config.is_stand() ? 0.0 : cycle_phase(config, l, t);
        if (tr.stance && !stance) {
          const double swing_end = t - (tau - gait.stance_duration) + gait.swing_duration;
          tr.swing_from = tr.f;
          tr.swing_to = foothold(config, l, swing_end + 0.5 * gait.stance_duration);
        } else if (!tr.stance && stance) {
          tr.f = tr.swing_to;
          tr.touchdown_t = t - tau;
        }
        tr.stance = stance;

        rec.contact[l] = stance;
        if (stance) {
          rec.feet[l] = tr.f;
          rec.foot_vel[l] = stance_velocity(config, body, l, tr.f,
                                            foot_disturbance(config, l, t, tr.touchdown_t));
          rec.slip[l] = foot_slipping(config, l, t, tr.touchdown_t);
        } else {
          const double u = (tau - gait.stance_duration) / gait.swing_duration;
          const Swing s = cycloid(tr.swing_from, tr.swing_to, gait.step_height, u, gait.swing_duration);
          rec.feet[l] = s.pos;
          rec.foot_vel[l] = s.vel;
          rec.slip[l] = false;
          const Vec3 b = body.G.transpose() * (s.pos - body.p);
          kinematics::inverse(b, config.legs[static_cast<std::size_t>(l)]);
        }
      }
      out.push_back(rec);
      if (k + 1 == n) break;

      // RK4 for the stance feet over [t, t_next].
      const double t_next = at(k + 1);
      const double h = t_next - t;
      const BodyKinematics mid = body_at(config, t + 0.5 * h);
      const BodyKinematics end = body_at(config, t_next);
      for (int l = 0; l < kNumLegs; ++l) {
        LegTrack& tr = track[l];
        if (!tr.stance) continue;
        const double td = tr.touchdown_t;
        const auto vel = [&](const BodyKinematics& bk, double ti, const Vec3& f) {
          return stance_velocity(config, bk, l, f, foot_disturbance(config, l, ti, td));
        };
        const Vec3 k1 = rec.foot_vel[l];
        const Vec3 k2 = vel(mid, t + 0.5 * h, tr.f + 0.5 * h * k1);
        const Vec3 k3 = vel(mid, t + 0.5 * h, tr.f + 0.5 * h * k2);
        const Vec3 k4 = vel(end, t_next, tr.f + h * k3);
        tr.f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      body = end;
    } catch (const Error& e) {
      if (e.kind() != "workspace") throw;
      throw Error("workspace", "infeasible gait at t=" + format_time(t) + ": " + e.what(), "gait");
    }
  }
  return out;
}

std::vector<ImuSample> synthesize_imu(const std::vector<GroundTruthRecord>& truth,
                                      const NoiseConfig& noise, const SensorConfig& sensors,
                                      double imu_rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto draw = [&]() {
    const double x = normal(rng);
    const double y = normal(rng);
    const double z = normal(rng);
    return Vec3(x, y, z);
  };

  const double dt = 1.0 / imu_rate;
  const double scale = sensors.noise_scale;
  const double sa = scale * noise.accel / std::sqrt(dt);
  const double sw = scale * noise.gyro / std::sqrt(dt);
  const double sba = scale * noise.accel_bias * std::sqrt(dt);
  const double sbw = scale * noise.gyro_bias * std::sqrt(dt);

  Vec3 ba = sensors.initial_accel_bias;
  Vec3 bw = sensors.initial_gyro_bias;
  std::vector<ImuSample> out;
  out.reserve(truth.size());
  for (const auto& rec : truth) {
    ImuSample s;
    s.t = rec.t;
    const Vec3 nw = draw();
    const Vec3 na = draw();
    s.gyro = rec.omega_body + bw + sw * nw;
    s.accel = rec.G.transpose() * (rec.accel_world - kDefaultGravity) + ba + sa * na;
    out.push_back(s);
    const Vec3 wba = draw();
    const Vec3 wbw = draw();
    ba += sba * wba;
    bw += sbw * wbw;
  }
  return out;
}

std::vector<LegSample> synthesize_encoders(const std::vector<GroundTruthRecord>& truth,
                                           const std::array<LegParams, kNumLegs>& legs,
                                           const SensorConfig& sensors, int stride,
                                           std::uint64_t seed) {
  if (stride < 1) throw Error("argument", "encoder stride must be >= 1");
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<LegSample> out;
  out.reserve(truth.size() / static_cast<std::size_t>(stride) + 1);
  for (std::size_t k = 0; k < truth.size(); k += static_cast<std::size_t>(stride)) {
    const GroundTruthRecord& rec = truth[k];
    LegSample s;
    s.t = rec.t;
    for (int l = 0; l < kNumLegs; ++l) {
      const LegParams& params = legs[static_cast<std::size_t>(l)];
      const Vec3 b = rec.G.transpose() * (rec.feet[l] - rec.p);
      Vec3 q;
      try {
        q = kinematics::inverse(b, params);
      } catch (const Error& e) {
        throw Error("workspace", "encoder synthesis at t=" + format_time(rec.t) + ": " + e.what());
      }
      const Vec3 b_dot = rec.G.transpose() * (rec.foot_vel[l] - rec.v) - rec.omega_body.cross(b);
      Vec3 q_dot = kinematics::jacobian(q, params).partialPivLu().solve(b_dot);
      for (int i = 0; i < 3; ++i) q[i] += sensors.joint_angle_noise * normal(rng);
      for (int i = 0; i < 3; ++i) q_dot[i] += sensors.joint_rate_noise * normal(rng);
      s.joints[l] = JointState{q, q_dot};
      s.contact[l] = rec.contact[l];
    }
    out.push_back(s);
  }
  return out;
}

SimulationLog simulate(const ScenarioConfig& config) {
  SimulationLog log;
  log.truth = generate_truth(config);
  log.imu = synthesize_imu(log.truth, config.noise, config.sensors, config.imu_rate, config.seed);
  const int stride = static_cast<int>(std::llround(config.imu_rate / config.leg_rate));
  log.legs = synthesize_encoders(log.truth, config.legs, config.sensors, stride, config.seed);
  return log;
}

}  // namespace legodom
