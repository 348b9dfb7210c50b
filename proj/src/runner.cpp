#include "legodom/runner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>

#include "legodom/contact_sim.hpp"
#include "legodom/error.hpp"
#include "legodom/log_io.hpp"

namespace legodom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create " + dir.string() + ": " + ec.message(), dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot open " + path.string() + " for writing", path.string());
  out << text;
  if (!out) throw Error("io", "write failed for " + path.string(), path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

double parse_double(const std::string& token, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
  if (token.empty() || used != token.size() || !std::isfinite(v)) {
    throw Error("config", field + ": '" + token + "' is not a number", field);
  }
  return v;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<TimeWindow> time_windows(const std::vector<SlipWindow>& windows) {
  std::vector<TimeWindow> out;
  for (const auto& w : windows) out.push_back({w.t_start, w.t_end});
  return out;
}

void write_run(const fs::path& dir, const EstimatorRun& run) {
  ensure_dir(dir);
  write_trajectory_csv(dir / "trajectory.csv", run.trajectory);

  Series diag;
  diag.columns = {"trace_P", "innovation_norm", "rows"};
  for (std::size_t k = 0; k < run.trajectory.size(); ++k) {
    diag.t.push_back(run.trajectory[k].t);
    Eigen::VectorXd row(3);
    row << run.trace_P[k], run.innovation_norm[k], static_cast<double>(run.rows[k]);
    diag.rows.push_back(row);
  }
  write_series_csv(dir / "diagnostics.csv", diag);
  if (!run.mu.columns.empty()) write_series_csv(dir / "mu.csv", run.mu);

  // Timing is not reproducible, so it stays out of the CSV outputs.
  write_json(dir / "runtime.json", {{"estimator", run.name},
                                    {"steps", run.step_seconds.size()},
                                    {"mean_step_seconds", run.mean_step_seconds()}});
}

ScenarioConfig scenario_for_log(const fs::path& log_dir, const std::optional<fs::path>& config) {
  const fs::path path = config ? *config : log_dir / "scenario.json";
  if (!fs::exists(path)) {
    throw Error("io", "no scenario file at " + path.string() + " (pass --config)", path.string());
  }
  return load_scenario(path);
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) out.push_back(parse_double(token, field));
  if (out.empty()) throw Error("config", field + ": empty list", field);
  return out;
}

Eigen::MatrixXd parse_matrix(const std::string& text, const std::string& field) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) rows.push_back(parse_number_list(row, field));
  if (rows.empty()) throw Error("config", field + ": empty matrix", field);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw Error("config", field + ": rows have different lengths", field);
    }
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return M;
}

SimulateResult cmd_simulate(const SimulateOptions& options) {
  ScenarioConfig config = load_scenario(options.config);
  if (options.seed) config.seed = *options.seed;
  const SimulationLog log = simulate(config);
  write_log(options.out, config, log);
  return {log.imu.size(), log.legs.size(), log.truth.size()};
}

std::vector<EstimatorRun> cmd_estimate(const EstimateOptions& options) {
  std::vector<EstimatorSpec> specs;
  for (const auto& name : options.estimators) specs.push_back(make_estimator(name, options.overrides));

  const LogSet log = read_log(options.log_dir);
  const ScenarioConfig config = scenario_for_log(options.log_dir, options.config);
  const FilterModel model = filter_model(config, ContactModel::Rolling);

  RunOptions run_options;
  run_options.check_invariants = options.check_invariants;
  std::vector<EstimatorRun> runs;
  for (const auto& spec : specs) {
    EstimatorRun run = run_estimator(spec, log, model, config.initial, run_options);
    write_run(options.out / spec.name, run);
    runs.push_back(std::move(run));
  }
  return runs;
}

EvaluateResult cmd_evaluate(const EvaluateOptions& options) {
  const Trajectory est = read_trajectory_csv(options.estimate);
  const Trajectory truth = read_trajectory_csv(options.truth);
  EvaluateResult res;
  res.report = evaluate(est, truth, options.align, options.rpe_distance);

  if (options.mu) {
    const Series mu = read_series_csv(*options.mu);
    const fs::path windows_path =
        options.slip_windows ? *options.slip_windows : options.truth.parent_path() / "slip_windows.json";
    const std::vector<SlipWindow> windows =
        fs::exists(windows_path) ? read_slip_windows_json(windows_path) : std::vector<SlipWindow>{};
    res.modes = mode_timeline_stats(mu.t, mu.rows, time_windows(windows));
  }

  if (options.out) {
    ensure_dir(*options.out);
    json j = res.report.to_json();
    if (res.modes) j["modes"] = res.modes->to_json();
    write_json(*options.out / "metrics.json", j);
    write_text(*options.out / "metrics.txt", res.report.to_table());
  }
  return res;
}

SweepManifest load_sweep_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open sweep manifest " + path.string(), path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config", "malformed sweep manifest " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error("config", "sweep manifest must be a JSON object");
  static const std::set<std::string> known{"schema_version", "scenarios",    "estimators",
                                           "seeds",          "align",        "rpe_distance",
                                           "check_invariants"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw Error("config", it.key() + ": unknown key", it.key());
  }
  SweepManifest m;
  const fs::path base = path.parent_path();
  try {
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != 1) {
      throw Error("config", "schema_version: unsupported", "schema_version");
    }
    for (const auto& s : j.at("scenarios")) m.scenarios.push_back(base / s.get<std::string>());
    for (const auto& e : j.at("estimators")) m.estimators.push_back(e.get<std::string>());
    if (j.contains("seeds")) {
      for (const auto& s : j.at("seeds")) m.seeds.push_back(s.get<std::uint64_t>());
    }
    if (j.contains("align")) m.align = parse_alignment(j.at("align").get<std::string>());
    if (j.contains("rpe_distance")) m.rpe_distance = j.at("rpe_distance").get<double>();
    if (j.contains("check_invariants")) m.check_invariants = j.at("check_invariants").get<bool>();
  } catch (const json::exception& e) {
    throw Error("config", "sweep manifest " + path.string() + ": " + e.what());
  }
  if (m.scenarios.empty()) throw Error("config", "scenarios: at least one is required", "scenarios");
  if (m.estimators.empty()) throw Error("config", "estimators: at least one is required", "estimators");
  for (const auto& e : m.estimators) make_estimator(e);
  return m;
}

SweepResult run_sweep(const SweepManifest& manifest, const fs::path& out) {
  ensure_dir(out);
  SweepResult result;
  std::vector<std::string> scenario_names;

  for (const auto& scenario_path : manifest.scenarios) {
    const std::string scenario = scenario_path.stem().string();
    scenario_names.push_back(scenario);

    std::optional<ScenarioConfig> base;
    std::string load_error;
    try {
      base = load_scenario(scenario_path);
    } catch (const std::exception& e) {
      load_error = e.what();
    }
    std::vector<std::uint64_t> seeds = manifest.seeds;
    if (seeds.empty()) seeds.push_back(base ? base->seed : 0);

    for (const std::uint64_t seed : seeds) {
      const fs::path cell_dir = out / "cells" / scenario / ("seed_" + std::to_string(seed));
      std::optional<LogSet> log;
      std::string sim_error = load_error;
      ScenarioConfig config;
      if (base) {
        try {
          config = *base;
          config.seed = seed;
          write_log(cell_dir / "log", config, simulate(config));
          log = read_log(cell_dir / "log");
        } catch (const std::exception& e) {
          sim_error = e.what();
        }
      }

      for (const auto& name : manifest.estimators) {
        SweepCell cell;
        cell.scenario = scenario;
        cell.seed = seed;
        cell.estimator = name;
        if (!log) {
          cell.error = "simulation failed: " + sim_error;
          result.cells.push_back(cell);
          continue;
        }
        try {
          RunOptions opts;
          opts.check_invariants = manifest.check_invariants;
          const EstimatorRun run = run_estimator(make_estimator(name), *log,
                                                 filter_model(config, ContactModel::Rolling),
                                                 config.initial, opts);
          write_run(cell_dir / name, run);
          cell.metrics = evaluate(run.trajectory, truth_trajectory(log->truth), manifest.align,
                                  manifest.rpe_distance);
          if (!run.mu.t.empty()) {
            cell.modes = mode_timeline_stats(run.mu.t, run.mu.rows, time_windows(log->slip_windows));
          }
          cell.invariants = run.invariants;
          cell.mean_step_seconds = run.mean_step_seconds();
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        result.cells.push_back(cell);
      }
    }
  }

  // Long-form table, one row per cell.
  std::string cells =
      "scenario,seed,estimator,status,ate_pos[m],ate_att[rad],rpe_pos[m],rpe_att[rad],"
      "mu_slip_inside,mu_slip_outside,mode_switches,max_mu_sum_error,max_asymmetry,"
      "min_eigen_ratio,skipped_updates,error\n";
  for (const auto& c : result.cells) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    cells += c.scenario + "," + std::to_string(c.seed) + "," + c.estimator + "," +
             (c.ok ? "ok" : "failed") + "," + fmt(c.ok ? c.metrics.ate_pos : nan) + "," +
             fmt(c.ok ? c.metrics.ate_att : nan) + "," + fmt(c.ok ? c.metrics.rpe_pos : nan) + "," +
             fmt(c.ok ? c.metrics.rpe_att : nan) + "," +
             fmt(c.modes ? c.modes->inside_mean : nan) + "," +
             fmt(c.modes ? c.modes->outside_mean : nan) + "," +
             (c.modes ? std::to_string(c.modes->switches) : "") + "," +
             fmt(c.invariants.max_mu_sum_error) + "," + fmt(c.invariants.max_asymmetry) + "," +
             fmt(c.invariants.min_eigen_ratio) + "," + std::to_string(c.invariants.skipped_updates) +
             "," + csv_escape(c.error) + "\n";
  }
  write_text(out / "cells.csv", cells);

  // Wide table: rows = scenarios, columns = estimator x metric, seed-averaged.
  std::string wide = "scenario";
  for (const auto& e : manifest.estimators) {
    for (const char* m : {"ate_pos[m]", "ate_att[rad]", "rpe_pos[m]", "rpe_att[rad]"}) {
      wide += "," + e + ":" + m;
    }
  }
  wide += "\n";
  for (const auto& scenario : scenario_names) {
    wide += scenario;
    for (const auto& e : manifest.estimators) {
      std::array<double, 4> sum{};
      int n = 0;
      for (const auto& c : result.cells) {
        if (c.scenario != scenario || c.estimator != e || !c.ok) continue;
        sum[0] += c.metrics.ate_pos;
        sum[1] += c.metrics.ate_att;
        sum[2] += c.metrics.rpe_pos;
        sum[3] += c.metrics.rpe_att;
        ++n;
      }
      for (double s : sum) {
        wide += "," + fmt(n > 0 ? s / n : std::numeric_limits<double>::quiet_NaN());
      }
    }
    wide += "\n";
  }
  write_text(out / "sweep.csv", wide);

  json runtime = json::object();
  for (const auto& e : manifest.estimators) {
    std::vector<double> times;
    for (const auto& c : result.cells) {
      if (c.estimator == e && c.ok) times.push_back(c.mean_step_seconds);
    }
    if (times.empty()) continue;
    std::sort(times.begin(), times.end());
    const std::size_t h = times.size() / 2;
    const double median = times.size() % 2 ? times[h] : 0.5 * (times[h - 1] + times[h]);
    result.median_step_seconds[e] = median;
    runtime[e] = {{"median_step_ms", median * 1e3}, {"cells", times.size()}};
  }
  write_json(out / "runtime.json", runtime);
  return result;
}

SweepResult cmd_sweep(const SweepOptions& options) {
  SweepManifest manifest = load_sweep_manifest(options.manifest);
  if (options.seed) manifest.seeds = {*options.seed};
  return run_sweep(manifest, options.out);
}

}  // namespace legodom
