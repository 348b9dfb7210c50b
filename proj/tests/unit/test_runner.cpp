#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_support.hpp"

#include "legodom/error.hpp"
#include "legodom/runner.hpp"

using namespace legodom;
namespace fs = std::filesystem;
namespace lt = legodom::test;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t data_rows(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n == 0 ? 0 : n - 1;
}

fs::path write_scenario(const fs::path& dir, const nlohmann::json& j) {
  const fs::path p = dir / "scenario_in.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("argument parsing") {
  CHECK(parse_number_list("1,100", "alpha") == std::vector<double>{1.0, 100.0});
  CHECK_THROWS_AS(parse_number_list("1,x", "alpha"), Error);
  const Eigen::MatrixXd m = parse_matrix("0.99,0.01;0.02,0.98", "transition");
  REQUIRE(m.rows() == 2);
  CHECK(m(1, 0) == 0.02);
  CHECK_THROWS_AS(parse_matrix("1,0;1", "transition"), Error);
}

TEST_CASE("estimator registry") {
  try {
    make_estimator("ukf");
    FAIL("ukf accepted");
  } catch (const Error& e) {
    const std::string msg = e.what();
    for (const auto& name : estimator_names()) CHECK(msg.find(name) != std::string::npos);
  }
  CHECK(make_estimator("eskf-pc").contact == ContactModel::PointContact);
  CHECK(make_estimator("eskf-l").alpha == 100.0);
  CHECK(make_estimator("imm-t").imm.alphas.size() == 3);
  CHECK_FALSE(make_estimator("imm-no-interaction").imm.interacting);

  EstimatorOverrides ov;
  ov.alphas = std::vector<double>{1.0, 1.0};
  ov.transition = Eigen::MatrixXd::Identity(2, 2);
  const EstimatorSpec s = make_estimator("imm-po", ov);
  CHECK(s.imm.alphas == std::vector<double>{1.0, 1.0});
  CHECK(s.imm.transition == Eigen::MatrixXd::Identity(2, 2));

  EstimatorOverrides wrong;
  wrong.modes = 3;
  wrong.alphas = std::vector<double>{1.0, 10.0};
  CHECK_THROWS_AS(make_estimator("imm-po", wrong), Error);
  EstimatorOverrides single;
  single.transition = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(make_estimator("eskf-r", single), Error);
}

TEST_CASE("simulate writes logs") {
  const fs::path dir = lt::scratch_dir("cmd_simulate");
  SimulateOptions opts;
  opts.config = LEGODOM_CONFIG_DIR "/straight_9m.json";
  opts.out = dir / "a";
  const SimulateResult r = cmd_simulate(opts);
  CHECK(r.imu_rows == 37 * 500);
  CHECK(r.leg_rows == 37 * 250);
  CHECK(r.truth_rows == 37 * 500);
  for (const char* f : {"imu.csv", "legs.csv", "truth.csv", "slip_windows.json", "scenario.json"}) {
    CHECK(fs::exists(opts.out / f));
  }
  CHECK(data_rows(opts.out / "imu.csv") == r.imu_rows);
  CHECK(data_rows(opts.out / "legs.csv") == r.leg_rows);

  opts.out = dir / "b";
  cmd_simulate(opts);
  for (const char* f : {"imu.csv", "legs.csv", "truth.csv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }

  nlohmann::json bad = {{"duration", -3.0}};
  opts.config = write_scenario(dir, bad);
  try {
    cmd_simulate(opts);
    FAIL("negative duration accepted");
  } catch (const Error& e) {
    CHECK(e.field() == "duration");
  }
}

TEST_CASE("estimate on a noiseless stand stays on the truth") {
  const fs::path dir = lt::scratch_dir("cmd_estimate");
  nlohmann::json j;
  std::ifstream(LEGODOM_CONFIG_DIR "/static_stand.json") >> j;
  j["sensors"] = {{"noise_scale", 0.0}};
  SimulateOptions sim;
  sim.config = write_scenario(dir, j);
  sim.out = dir / "log";
  cmd_simulate(sim);

  EstimateOptions est;
  est.log_dir = sim.out;
  est.out = dir / "est";
  est.estimators = {"eskf-r", "imm-po"};
  est.check_invariants = true;
  const auto runs = cmd_estimate(est);
  REQUIRE(runs.size() == 2);
  const LogSet log = read_log(sim.out);
  const Trajectory truth = truth_trajectory(log.truth);
  double worst = 0.0;
  for (const auto& pose : runs[0].trajectory) {
    const auto k = static_cast<std::size_t>(std::llround(pose.t * 500.0));
    worst = std::max(worst, (pose.p - truth[k].p).norm());
  }
  CHECK(worst < 1e-3);
  CHECK(runs[1].invariants.covariance_ok());
  CHECK(runs[1].invariants.max_mu_sum_error < 1e-12);
  CHECK(fs::exists(est.out / "imm-po" / "mu.csv"));
  CHECK_FALSE(fs::exists(est.out / "eskf-r" / "mu.csv"));
  CHECK(fs::exists(est.out / "eskf-r" / "diagnostics.csv"));

  est.estimators = {"ukf"};
  CHECK_THROWS_AS(cmd_estimate(est), Error);
}

TEST_CASE("evaluate") {
  const fs::path dir = lt::scratch_dir("cmd_evaluate");
  Trajectory truth;
  for (int k = 0; k < 400; ++k) truth.push_back({0.01 * k, Vec3(0.01 * k, 0, 0), Mat3::Identity()});
  Trajectory shifted = truth;
  for (auto& p : shifted) p.p += Vec3(0.0, 0.3, 0.4);
  write_trajectory_csv(dir / "truth.csv", truth);
  write_trajectory_csv(dir / "shifted.csv", shifted);

  EvaluateOptions opts;
  opts.estimate = dir / "truth.csv";
  opts.truth = dir / "truth.csv";
  opts.out = dir / "same";
  const EvaluateResult same = cmd_evaluate(opts);
  CHECK(same.report.ate_pos == 0.0);
  CHECK(same.report.rpe_pos == 0.0);
  CHECK(fs::exists(dir / "same" / "metrics.json"));
  CHECK(fs::exists(dir / "same" / "metrics.txt"));

  opts.estimate = dir / "shifted.csv";
  opts.align = Alignment::None;
  CHECK(cmd_evaluate(opts).report.ate_pos == doctest::Approx(0.5));

  opts.rpe_distance = 10.0;
  CHECK_THROWS_AS(cmd_evaluate(opts), Error);
}

TEST_CASE("sweep table shape") {
  const fs::path dir = lt::scratch_dir("cmd_sweep");
  nlohmann::json j;
  std::ifstream(LEGODOM_CONFIG_DIR "/trot_10s.json") >> j;
  j["duration"] = 6.0;
  std::ofstream(dir / "short.json") << j.dump();
  std::ofstream(dir / "manifest.json")
      << nlohmann::json{{"scenarios", {"short.json"}}, {"estimators", {"eskf-r", "imm-po"}}}.dump();

  SweepOptions opts;
  opts.manifest = dir / "manifest.json";
  opts.out = dir / "out";
  const SweepResult r = cmd_sweep(opts);
  REQUIRE(r.cells.size() == 2);
  CHECK(r.cells[0].ok);
  CHECK(r.cells[1].ok);
  CHECK(r.median_step_seconds.count("imm-po") == 1);

  std::ifstream in(dir / "out" / "sweep.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header.find("eskf-r:ate_pos[m]") != std::string::npos);
  CHECK(header.find("imm-po:ate_pos[m]") != std::string::npos);
  CHECK(std::count(header.begin(), header.end(), ',') == 8);
  CHECK(row.rfind("short,", 0) == 0);
  CHECK(fs::exists(dir / "out" / "cells.csv"));
  CHECK(fs::exists(dir / "out" / "runtime.json"));

  std::ofstream(dir / "bad.json") << nlohmann::json{{"scenarios", {"short.json"}},
                                                    {"estimators", {"ukf"}}}
                                         .dump();
  CHECK_THROWS_AS(load_sweep_manifest(dir / "bad.json"), Error);
}
