#include <cmath>
#include <limits>

#include "doctest.h"
#include "test_support.hpp"

#include "legodom/error.hpp"
#include "legodom/evaluation.hpp"

using namespace legodom;
namespace lt = legodom::test;

namespace {

Trajectory wavy_path(std::size_t n) {
  Trajectory traj;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = 0.01 * static_cast<double>(k);
    traj.push_back({t, Vec3(0.5 * t, 0.3 * std::sin(t), 0.02 * t), so3::exp(Vec3(0.01 * t, 0, 0.2 * t))});
  }
  return traj;
}

}  // namespace

TEST_CASE("association") {
  const Trajectory a = wavy_path(10);
  Trajectory b = a;
  b.erase(b.begin() + 3);
  for (auto& p : b) p.t += 4e-4;
  const auto pairs = associate(a, b);
  CHECK(pairs.size() == 9);
  CHECK(pairs[3].first == 4);
  CHECK(pairs[3].second == 3);
}

TEST_CASE("absolute trajectory error") {
  const Trajectory truth = wavy_path(500);
  const AteResult same = ate(truth, truth, Alignment::None);
  CHECK(same.pos == 0.0);
  CHECK(same.att < 1e-15);

  Trajectory shifted = truth;
  for (auto& p : shifted) p.p += Vec3(0.1, 0, 0);
  const AteResult none = ate(shifted, truth, Alignment::None);
  CHECK(none.pos == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(none.att < 1e-15);
  CHECK(ate(shifted, truth, Alignment::Rigid).pos < 1e-12);

  // rigid alignment absorbs any constant rotation and translation
  const Mat3 R = so3::exp(Vec3(0.2, -0.1, 0.7));
  Trajectory moved = truth;
  for (auto& p : moved) {
    p.p = R * p.p + Vec3(1, 2, 3);
    p.G = R * p.G;
  }
  const AteResult aligned = ate(moved, truth, Alignment::Rigid);
  CHECK(aligned.pos < 1e-9);
  CHECK(aligned.att < 1e-9);

  Trajectory late = truth;
  for (auto& p : late) p.t += 100.0;
  CHECK_THROWS_AS(ate(late, truth), Error);
}

TEST_CASE("relative pose error") {
  Trajectory line;
  for (int k = 0; k <= 1000; ++k) {
    line.push_back({0.01 * k, Vec3(0.01 * k, 0, 0), Mat3::Identity()});
  }
  const RpeResult zero = rpe(line, line, 1.0);
  CHECK(zero.pos == 0.0);
  CHECK(zero.att == 0.0);
  CHECK(zero.pairs > 0);

  Trajectory scaled = line;
  for (auto& p : scaled) p.p *= 1.01;
  CHECK(rpe(scaled, line, 1.0).pos == doctest::Approx(0.01).epsilon(1e-6));

  CHECK_THROWS_AS(rpe(line, line, 20.0), Error);
}

TEST_CASE("metric report") {
  const Trajectory truth = wavy_path(800);
  const MetricReport r = evaluate(truth, truth, Alignment::Rigid, 1.0);
  CHECK(r.ate_pos < 1e-12);
  CHECK(r.rpe_pos < 1e-12);
  const auto j = r.to_json();
  CHECK(j.at("align") == "rigid");
  CHECK(r.to_table().find("ATE_pos") != std::string::npos);
  CHECK(parse_alignment("none") == Alignment::None);
  CHECK_THROWS_AS(parse_alignment("sim3"), Error);
}

TEST_CASE("closed-loop matrix") {
  const Eigen::MatrixXd F = Eigen::MatrixXd::Random(4, 4);
  const Eigen::MatrixXd H = Eigen::MatrixXd::Random(2, 4);
  CHECK(closed_loop_matrix(F, H, Eigen::MatrixXd::Zero(4, 2)) == F);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(4, 4);
  CHECK(closed_loop_matrix(F, I, I).isZero(0.0));
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  CHECK(closed_loop_matrix(one, one, 0.5 * one)(0, 0) == 0.5);
  CHECK_THROWS_AS(closed_loop_matrix(F, H, Eigen::MatrixXd::Zero(3, 2)), Error);
}

TEST_CASE("spectral radius") {
  CHECK(spectral_radius(Eigen::MatrixXd::Identity(5, 5)).rho == doctest::Approx(1.0));
  CHECK(spectral_radius(Eigen::Vector2d(0.5, -0.9).asDiagonal().toDenseMatrix()).rho ==
        doctest::Approx(0.9));
  // companion matrix of z^2 - z - 1
  Eigen::MatrixXd C(2, 2);
  C << 1, 1, 1, 0;
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const SpectralRadius s = spectral_radius(C);
  CHECK(s.converged);
  CHECK(std::abs(s.rho - golden) < 1e-6);
  CHECK(std::abs(s.rho - 1.6180340) < 1e-6);

  // a rotation block has complex eigenvalues of modulus 0.8
  Eigen::MatrixXd rot(2, 2);
  rot << 0.0, -0.8, 0.8, 0.0;
  CHECK(spectral_radius(rot).rho == doctest::Approx(0.8));
}

TEST_CASE("observable spectral radius") {
  Eigen::MatrixXd F = Eigen::Vector2d(1.0, 0.5).asDiagonal();
  Eigen::MatrixXd H(1, 2);
  H << 0, 1;
  Eigen::MatrixXd K(2, 1);
  K << 0, 0.5;
  const Eigen::MatrixXd basis = unobservable_subspace(F, H);
  REQUIRE(basis.cols() == 1);
  CHECK(std::abs(std::abs(basis(0, 0)) - 1.0) < 1e-12);
  CHECK(spectral_radius(closed_loop_matrix(F, H, K)).rho == doctest::Approx(1.0));
  CHECK(observable_spectral_radius(F, H, K).rho == doctest::Approx(0.25));
}

TEST_CASE("mode timeline statistics") {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> flat;
  std::vector<Eigen::VectorXd> step;
  const std::vector<TimeWindow> windows{{2.0, 5.0}};
  for (int k = 0; k < 1000; ++k) {
    t.push_back(0.01 * k);
    flat.push_back(Eigen::Vector2d(0.5, 0.5));
    const bool inside = t.back() >= 2.0 && t.back() < 5.0;
    step.push_back(inside ? Eigen::Vector2d(0.0, 1.0) : Eigen::Vector2d(1.0, 0.0));
  }
  const ModeTimelineStats f = mode_timeline_stats(t, flat, windows);
  CHECK(f.inside_mean == doctest::Approx(0.5));
  CHECK(f.outside_mean == doctest::Approx(0.5));

  const ModeTimelineStats s = mode_timeline_stats(t, step, windows);
  CHECK(s.inside_mean == 1.0);
  CHECK(s.outside_mean == 0.0);
  CHECK(s.ratio == std::numeric_limits<double>::infinity());
  CHECK(s.switches == 2);
  CHECK(s.inside_samples == 300);

  // 30% coverage with a ramp inside and a constant floor outside
  std::vector<Eigen::VectorXd> mixed;
  double in_sum = 0.0, out_sum = 0.0;
  int in_n = 0, out_n = 0;
  for (double tk : t) {
    const bool inside = tk >= 2.0 && tk < 5.0;
    const double slip = inside ? 0.2 + 0.1 * (tk - 2.0) : 0.05;
    mixed.push_back(Eigen::Vector2d(1.0 - slip, slip));
    (inside ? in_sum : out_sum) += slip;
    (inside ? in_n : out_n) += 1;
  }
  const ModeTimelineStats m = mode_timeline_stats(t, mixed, windows);
  CHECK(m.inside_mean == doctest::Approx(in_sum / in_n).epsilon(1e-12));
  CHECK(m.outside_mean == doctest::Approx(out_sum / out_n).epsilon(1e-12));
  CHECK(m.ratio == doctest::Approx(m.inside_mean / m.outside_mean));

  CHECK_THROWS_AS(mode_timeline_stats({}, {}, windows), Error);
}
