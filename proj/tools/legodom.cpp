// Command-line front end: simulate, estimate, evaluate, sweep.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "legodom/error.hpp"
#include "legodom/runner.hpp"

namespace {

int exit_code_for(const std::string& kind) {
  if (kind == "usage" || kind == "config") return 2;
  if (kind == "io") return 3;
  if (kind == "workspace" || kind == "evaluation") return 4;
  return 1;
}

int report_error(const std::string& kind, const std::string& message, const std::string& field = {}) {
  nlohmann::json j{{"error", {{"kind", kind}, {"message", message}}}};
  if (!field.empty()) j["error"]["field"] = field;
  std::cerr << j.dump() << std::endl;
  return exit_code_for(kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rolling-contact legged odometry: simulation, estimation and evaluation"};
  app.require_subcommand(1);

  // simulate
  legodom::SimulateOptions sim;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic log from a scenario file");
  simulate->add_option("--config", sim.config, "Scenario JSON file")->required();
  simulate->add_option("--out", sim.out, "Output log directory")->required();
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Override the scenario seed");

  // estimate
  legodom::EstimateOptions est;
  std::vector<std::string> est_names;
  std::string alpha_text, transition_text;
  int modes = 0;
  std::string est_config;
  auto* estimate = app.add_subcommand("estimate", "Run estimators over a log directory");
  estimate->add_option("log_dir", est.log_dir, "Log directory written by simulate")->required();
  estimate->add_option("--estimator", est_names, "Estimator name(s); repeat or comma-separate")
      ->delimiter(',');
  estimate->add_option("--out", est.out, "Output directory")->required();
  estimate->add_option("--config", est_config, "Scenario file (default: <log_dir>/scenario.json)");
  auto* modes_opt = estimate->add_option("--modes", modes, "Number of IMM modes");
  auto* alpha_opt = estimate->add_option("--alpha", alpha_text, "Foot-velocity noise scale(s), e.g. 1,100");
  auto* transition_opt =
      estimate->add_option("--transition", transition_text, "Mode transition matrix, e.g. '0.99,0.01;0.02,0.98'");
  estimate->add_flag("--check-invariants", est.check_invariants,
                     "Check covariance and probability invariants at every step");
  std::uint64_t est_seed = 0;
  estimate->add_option("--seed", est_seed, "Accepted for symmetry; estimation is deterministic");

  // evaluate
  legodom::EvaluateOptions ev;
  std::string align = "rigid";
  std::string ev_out, ev_mu, ev_windows;
  auto* evaluate = app.add_subcommand("evaluate", "Compute ATE/RPE of an estimated trajectory");
  evaluate->add_option("estimate", ev.estimate, "Estimated trajectory CSV")->required();
  evaluate->add_option("truth", ev.truth, "Ground-truth CSV (truth.csv)")->required();
  evaluate->add_option("--align", align, "Alignment: rigid or none")->check(CLI::IsMember({"rigid", "none"}));
  evaluate->add_option("--rpe-distance", ev.rpe_distance, "RPE segment length, m");
  evaluate->add_option("--mu", ev_mu, "Mode-probability CSV for mode statistics");
  evaluate->add_option("--windows", ev_windows, "Slip-window JSON (default: next to truth)");
  evaluate->add_option("--out", ev_out, "Directory for metrics.json and metrics.txt");

  // sweep
  legodom::SweepOptions sw;
  std::uint64_t sweep_seed = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario x estimator comparison");
  sweep->add_option("manifest", sw.manifest, "Sweep manifest JSON")->required();
  sweep->add_option("--out", sw.out, "Output directory")->required();
  auto* sweep_seed_opt = sweep->add_option("--seed", sweep_seed, "Run every scenario with this seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    if (*simulate) {
      if (*sim_seed_opt) sim.seed = sim_seed;
      const auto r = legodom::cmd_simulate(sim);
      std::cout << nlohmann::json{{"imu_rows", r.imu_rows}, {"leg_rows", r.leg_rows},
                                  {"truth_rows", r.truth_rows}, {"out", sim.out.string()}}
                       .dump()
                << std::endl;
    } else if (*estimate) {
      if (!est_names.empty()) est.estimators = est_names;
      if (!est_config.empty()) est.config = est_config;
      if (*modes_opt) est.overrides.modes = modes;
      if (*alpha_opt) est.overrides.alphas = legodom::parse_number_list(alpha_text, "alpha");
      if (*transition_opt) est.overrides.transition = legodom::parse_matrix(transition_text, "transition");
      const auto runs = legodom::cmd_estimate(est);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& r : runs) {
        out.push_back({{"estimator", r.name},
                       {"steps", r.trajectory.size()},
                       {"dir", (est.out / r.name).string()}});
      }
      std::cout << out.dump() << std::endl;
    } else if (*evaluate) {
      ev.align = legodom::parse_alignment(align);
      if (!ev_mu.empty()) ev.mu = ev_mu;
      if (!ev_windows.empty()) ev.slip_windows = ev_windows;
      if (!ev_out.empty()) ev.out = ev_out;
      const auto r = legodom::cmd_evaluate(ev);
      std::cout << r.report.to_table();
      if (r.modes) {
        std::printf("mu_slip   inside %.4f  outside %.4f  switches %zu\n", r.modes->inside_mean,
                    r.modes->outside_mean, r.modes->switches);
      }
    } else if (*sweep) {
      if (*sweep_seed_opt) sw.seed = sweep_seed;
      const auto r = legodom::cmd_sweep(sw);
      std::size_t failed = 0;
      for (const auto& c : r.cells) failed += c.ok ? 0 : 1;
      std::cout << nlohmann::json{{"cells", r.cells.size()}, {"failed", failed},
                                  {"out", sw.out.string()}}
                       .dump()
                << std::endl;
    }
  } catch (const legodom::Error& e) {
    return report_error(e.kind(), e.what(), e.field());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
