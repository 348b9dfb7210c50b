#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "legodom/error.hpp"
#include "legodom/leg_kinematics.hpp"
#include "legodom/runner.hpp"
#include "legodom/so3.hpp"

namespace py = pybind11;
using namespace legodom;

namespace {

// Results cross the boundary as JSON text; the Python side decodes them.
std::string cell_json(const SweepCell& c) {
  nlohmann::json j{{"scenario", c.scenario}, {"seed", c.seed}, {"estimator", c.estimator},
                   {"ok", c.ok}, {"error", c.error}, {"mean_step_seconds", c.mean_step_seconds}};
  if (c.ok) j["metrics"] = c.metrics.to_json();
  if (c.modes) j["modes"] = c.modes->to_json();
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_legodom, m) {
  m.doc() = "Legged odometry with rolling-contact ESKF and IMM";

  static py::exception<Error> err(m, "LegodomError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      err((e.kind() + ": " + e.what()).c_str());
    }
  });

  m.def("so3_exp", [](const Vec3& v) -> Mat3 { return so3::exp(v); });
  m.def("so3_log", [](const Mat3& R) -> Vec3 { return so3::log(R); });

  m.def("foot_position", [](const Vec3& angles, int leg) {
    return kinematics::forward(angles, default_legs().at(leg));
  }, py::arg("angles"), py::arg("leg"));
  m.def("foot_jacobian", [](const Vec3& angles, int leg) -> Mat3 {
    return kinematics::jacobian(angles, default_legs().at(leg));
  }, py::arg("angles"), py::arg("leg"));
  m.def("inverse_kinematics", [](const Vec3& foot, int leg) {
    return kinematics::inverse(foot, default_legs().at(leg));
  }, py::arg("foot"), py::arg("leg"));

  m.def("simulate", [](const std::filesystem::path& config, const std::filesystem::path& out,
                       std::optional<std::uint64_t> seed) {
    py::gil_scoped_release nogil;
    SimulateResult r = cmd_simulate({config, out, seed});
    return std::tuple{r.imu_rows, r.leg_rows, r.truth_rows};
  }, py::arg("config"), py::arg("out"), py::arg("seed") = py::none());

  m.def("estimate", [](const std::filesystem::path& log_dir, const std::vector<std::string>& estimators,
                       const std::filesystem::path& out) {
    EstimateOptions o;
    o.log_dir = log_dir;
    o.estimators = estimators;
    o.out = out;
    py::gil_scoped_release nogil;
    std::vector<std::string> names;
    for (const EstimatorRun& run : cmd_estimate(o)) names.push_back(run.name);
    return names;
  }, py::arg("log_dir"), py::arg("estimators"), py::arg("out"));

  m.def("evaluate_json", [](const std::filesystem::path& estimate, const std::filesystem::path& truth,
                            const std::string& align, double rpe_distance,
                            std::optional<std::filesystem::path> mu,
                            std::optional<std::filesystem::path> slip_windows) {
    EvaluateOptions o;
    o.estimate = estimate;
    o.truth = truth;
    o.align = parse_alignment(align);
    o.rpe_distance = rpe_distance;
    o.mu = mu;
    o.slip_windows = slip_windows;
    EvaluateResult r = cmd_evaluate(o);
    nlohmann::json j{{"metrics", r.report.to_json()}};
    if (r.modes) j["modes"] = r.modes->to_json();
    return j.dump();
  }, py::arg("estimate"), py::arg("truth"), py::arg("align") = "rigid",
     py::arg("rpe_distance") = 1.0, py::arg("mu") = py::none(), py::arg("slip_windows") = py::none());

  m.def("sweep_json", [](const std::filesystem::path& manifest, const std::filesystem::path& out) {
    SweepResult r;
    {
      py::gil_scoped_release nogil;
      r = cmd_sweep({manifest, out, std::nullopt});
    }
    std::vector<std::string> cells;
    for (const SweepCell& c : r.cells) cells.push_back(cell_json(c));
    return cells;
  }, py::arg("manifest"), py::arg("out"));
}
