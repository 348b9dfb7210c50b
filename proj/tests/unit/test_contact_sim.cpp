#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_support.hpp"

#include "legodom/contact_sim.hpp"
#include "legodom/error.hpp"
#include "legodom/log_io.hpp"
#include "legodom/scenario.hpp"

using namespace legodom;
namespace lt = legodom::test;

namespace {

ScenarioConfig quiet(ScenarioConfig c) {
  c.sensors.noise_scale = 0.0;
  c.sensors.joint_angle_noise = 0.0;
  c.sensors.joint_rate_noise = 0.0;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("straight line covers 9 m in 37 s") {
  const ScenarioConfig c = load_scenario(LEGODOM_CONFIG_DIR "/straight_9m.json");
  CHECK(c.cruise_speed() == doctest::Approx(0.25));
  CHECK(path_length(c) == doctest::Approx(9.0).epsilon(1e-15));
  const auto truth = generate_truth(c);
  REQUIRE(truth.size() == 18500);
  // trapezoidal profile: the last sample is tau short of the end of the ramp-down
  const double t_last = truth.back().t;
  CHECK(t_last == doctest::Approx(36.998));
  const double tau = c.duration - t_last;
  const double acc = c.cruise_speed() / c.gait.ramp_duration;
  CHECK(std::abs(truth.back().p.x() - (9.0 - 0.5 * acc * tau * tau)) < 1e-9);
  CHECK(std::abs(truth.back().p.y()) < 1e-12);
}

TEST_CASE("empty and static scenarios") {
  ScenarioConfig c;
  c.duration = 0.0;
  CHECK(generate_truth(c).empty());

  ScenarioConfig stand = quiet(load_scenario(LEGODOM_CONFIG_DIR "/static_stand.json"));
  const SimulationLog log = simulate(stand);
  REQUIRE(!log.truth.empty());
  for (const auto& r : log.truth) {
    CHECK(r.p == log.truth.front().p);
    CHECK(r.v.isZero(0.0));
    for (int l = 0; l < kNumLegs; ++l) {
      CHECK(r.contact[l]);
      CHECK(r.foot_vel[l].isZero(0.0));
    }
  }
  for (const auto& s : log.imu) {
    CHECK(s.gyro.isZero(0.0));
    CHECK((s.accel - Vec3(0, 0, 9.81)).norm() < 1e-12);
  }
  const auto& first = log.legs.front();
  for (int l = 0; l < kNumLegs; ++l) {
    const Vec3 body_foot = log.truth.front().G.transpose() * (log.truth.front().feet[l] - log.truth.front().p);
    const Vec3 q = kinematics::inverse(body_foot, stand.legs[static_cast<std::size_t>(l)]);
    for (const auto& s : log.legs) {
      CHECK((s.joints[l].angles - q).norm() < 1e-12);
      CHECK(s.joints[l].rates.isZero(1e-12));
    }
    CHECK(first.contact[l]);
  }

  stand.sensors.initial_accel_bias = Vec3(0.05, 0, 0);
  const auto biased = synthesize_imu(log.truth, stand.noise, stand.sensors, stand.imu_rate, 3);
  for (std::size_t k = 0; k < biased.size(); ++k) {
    CHECK((biased[k].accel - log.imu[k].accel - Vec3(0.05, 0, 0)).norm() < 1e-12);
  }
}

TEST_CASE("stance feet roll") {
  ScenarioConfig c = quiet(load_scenario(LEGODOM_CONFIG_DIR "/trot_10s.json"));
  c.duration = 3.0;
  c.touchdown_impulse = 0.0;
  c.slip_windows = {SlipWindow{1.0, 1.5, Vec3(0, 0.1, 0), {0, 3}}};
  const auto truth = generate_truth(c);
  const int stride = static_cast<int>(c.imu_rate / c.leg_rate);
  const auto legs = synthesize_encoders(truth, c.legs, c.sensors, stride, 1);
  std::size_t checked = 0, slipping = 0;
  for (const auto& s : legs) {
    const auto k = static_cast<std::size_t>(std::llround(s.t * c.imu_rate));
    const auto& r = truth[k];
    for (int l = 0; l < kNumLegs; ++l) {
      if (!r.contact[l]) continue;
      const Vec3 wf = kinematics::foot_angular_velocity(s.joints[l], r.omega_body, r.G);
      const Vec3 roll = wf.cross(kinematics::contact_radius(c.legs[static_cast<std::size_t>(l)].foot_radius));
      if (r.slip[l]) {
        CHECK((r.foot_vel[l] - roll - Vec3(0, 0.1, 0)).norm() < 1e-6);
        ++slipping;
      } else {
        CHECK((r.foot_vel[l] - roll).norm() < 1e-6);
        ++checked;
      }
    }
  }
  CHECK(checked > 1000);
  CHECK(slipping > 50);
}

TEST_CASE("trot alternates diagonal pairs") {
  const ScenarioConfig c = load_scenario(LEGODOM_CONFIG_DIR "/trot_10s.json");
  for (double t : {2.1, 2.4, 5.05, 7.3}) {
    CHECK(in_stance(c, 0, t) == in_stance(c, 3, t));
    CHECK(in_stance(c, 1, t) == in_stance(c, 2, t));
    CHECK(in_stance(c, 0, t) != in_stance(c, 1, t));
  }
}

TEST_CASE("seeded sensor streams are reproducible") {
  ScenarioConfig c = load_scenario(LEGODOM_CONFIG_DIR "/trot_10s.json");
  c.duration = 2.0;
  c.sensors.joint_angle_noise = 1e-3;
  const SimulationLog a = simulate(c);
  const SimulationLog b = simulate(c);
  REQUIRE(a.imu.size() == b.imu.size());
  for (std::size_t k = 0; k < a.imu.size(); ++k) {
    CHECK(a.imu[k].accel == b.imu[k].accel);
    CHECK(a.imu[k].gyro == b.imu[k].gyro);
  }
  c.seed = 2;
  CHECK(simulate(c).imu[10].accel != a.imu[10].accel);
}

TEST_CASE("log files round trip exactly") {
  ScenarioConfig c = load_scenario(LEGODOM_CONFIG_DIR "/slippery.json");
  c.duration = 14.0;
  c.sensors.joint_rate_noise = 0.01;
  const SimulationLog log = simulate(c);
  const auto dir = lt::scratch_dir("roundtrip");
  write_log(dir, c, log);
  const LogSet back = read_log(dir);

  REQUIRE(back.imu.size() == log.imu.size());
  REQUIRE(back.legs.size() == log.legs.size());
  REQUIRE(back.truth.size() == log.truth.size());
  for (std::size_t k = 0; k < log.imu.size(); ++k) {
    CHECK(back.imu[k].t == log.imu[k].t);
    CHECK(back.imu[k].accel == log.imu[k].accel);
    CHECK(back.imu[k].gyro == log.imu[k].gyro);
  }
  for (std::size_t k = 0; k < log.legs.size(); ++k) {
    for (int l = 0; l < kNumLegs; ++l) {
      CHECK(back.legs[k].joints[l].angles == log.legs[k].joints[l].angles);
      CHECK(back.legs[k].joints[l].rates == log.legs[k].joints[l].rates);
      CHECK(back.legs[k].contact[l] == log.legs[k].contact[l]);
    }
  }
  for (std::size_t k = 0; k < log.truth.size(); k += 97) {
    CHECK(back.truth[k].p == log.truth[k].p);
    CHECK((back.truth[k].G - log.truth[k].G).norm() < 1e-15);
    CHECK(back.truth[k].slip == log.truth[k].slip);
  }
  REQUIRE(back.slip_windows.size() == 2);
  CHECK(back.slip_windows[1].t_start == 13.1);
  CHECK(back.slip_windows[0].legs.size() == 4);

  // writing what was read reproduces the files byte for byte
  const auto again = lt::scratch_dir("roundtrip2");
  write_imu_csv(again / "imu.csv", back.imu);
  write_legs_csv(again / "legs.csv", back.legs);
  CHECK(slurp(again / "imu.csv") == slurp(dir / "imu.csv"));
  CHECK(slurp(again / "legs.csv") == slurp(dir / "legs.csv"));

  write_imu_csv(again / "empty.csv", {});
  CHECK(read_imu_csv(again / "empty.csv").empty());
  CHECK_THROWS_AS(read_log(again / "missing"), Error);
}

TEST_CASE("quaternion conversion") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const Mat3 R = lt::random_rotation(rng);
    const Eigen::Vector4d q = rotation_to_quaternion(R);
    CHECK(q[0] >= 0.0);
    CHECK(std::abs(q.norm() - 1.0) < 1e-15);
    CHECK((quaternion_to_rotation(q) - R).norm() < 1e-14);
  }
}

TEST_CASE("scenario schema") {
  nlohmann::json j = {{"duration", -1.0}};
  try {
    scenario_from_json(j);
    FAIL("negative duration accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == "config");
    CHECK(e.field() == "duration");
  }
  CHECK_THROWS_AS(scenario_from_json({{"duration", 1.0}, {"durration", 2.0}}), Error);
  CHECK_THROWS_AS(scenario_from_json({{"duration", 1.0}, {"imu_rate", 500}, {"leg_rate", 300}}),
                  Error);
  try {
    scenario_from_json({{"duration", 5.0}, {"slip_windows", {{{"t_start", 1.0}, {"t_end", 9.0}}}}});
    FAIL("slip window past the end accepted");
  } catch (const Error& e) {
    CHECK(e.field().find("slip_windows") == 0);
  }

  const ScenarioConfig c = load_scenario(LEGODOM_CONFIG_DIR "/circular.json");
  const ScenarioConfig echo = scenario_from_json(scenario_to_json(c));
  CHECK(scenario_to_json(echo) == scenario_to_json(c));
}

TEST_CASE("infeasible gait names the first bad timestamp") {
  ScenarioConfig c = load_scenario(LEGODOM_CONFIG_DIR "/trot_10s.json");
  c.gait.body_height = 0.7;
  try {
    generate_truth(c);
    FAIL("expected a workspace error");
  } catch (const Error& e) {
    CHECK(e.kind() == "workspace");
    CHECK(std::string(e.what()).find("t=") != std::string::npos);
  }
}
