#include "legodom/log_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>

#include <Eigen/Geometry>

#include "legodom/error.hpp"

namespace legodom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : path_(path), file_(std::fopen(path.c_str(), "w"), &std::fclose) {
    if (!file_) throw Error("io", "cannot open " + path.string() + " for writing", path.string());
  }

  void header(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      std::fputs(cols[i].c_str(), file_.get());
      std::fputc(i + 1 < cols.size() ? ',' : '\n', file_.get());
    }
  }

  void value(double v) {
    std::fprintf(file_.get(), first_ ? "%.17g" : ",%.17g", v);
    first_ = false;
  }
  void value(const Vec3& v) {
    for (int i = 0; i < 3; ++i) value(v[i]);
  }
  void end_row() {
    std::fputc('\n', file_.get());
    first_ = true;
  }

  void close() {
    if (std::ferror(file_.get()) || std::fclose(file_.release()) != 0) {
      throw Error("io", "write failed for " + path_.string(), path_.string());
    }
  }

 private:
  fs::path path_;
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file_;
  bool first_ = true;
};

struct CsvTable {
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name, const fs::path& path) const {
    const auto it = index.find(name);
    if (it == index.end()) {
      throw Error("io", path.string() + ": missing column '" + name + "'", path.string());
    }
    return it->second;
  }
};

std::string strip_unit(const std::string& s) {
  const auto pos = s.find('[');
  return pos == std::string::npos ? s : s.substr(0, pos);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string(), path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error("io", path.string() + ": empty file", path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  for (const auto& name : split(line)) {
    table.index[strip_unit(name)] = table.names.size();
    table.names.push_back(strip_unit(name));
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    row.reserve(table.names.size());
    const char* p = line.c_str();
    while (true) {
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(p, &end);
      if (end == p || errno == ERANGE) {
        throw Error("io", path.string() + ":" + std::to_string(lineno) + ": malformed number",
                    path.string());
      }
      row.push_back(v);
      p = end;
      if (*p == ',') {
        ++p;
      } else {
        break;
      }
    }
    if (*p != '\0' || row.size() != table.names.size()) {
      throw Error("io", path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(table.names.size()) + " columns",
                  path.string());
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Vec3 get3(const std::vector<double>& row, std::size_t first) {
  return Vec3(row[first], row[first + 1], row[first + 2]);
}

std::string leg_col(int l, const char* name, const char* unit = nullptr) {
  std::string s = std::string(leg_name(l)) + "_" + name;
  if (unit) s += std::string("[") + unit + "]";
  return s;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot open " + path.string() + " for writing", path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("io", "write failed for " + path.string(), path.string());
}

}  // namespace

Eigen::Vector4d rotation_to_quaternion(const Rotation& G) {
  Eigen::Quaterniond q(G);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q.w(), q.x(), q.y(), q.z()};
}

Rotation quaternion_to_rotation(const Eigen::Vector4d& q) {
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized().toRotationMatrix();
}

void write_imu_csv(const fs::path& path, const std::vector<ImuSample>& imu) {
  CsvWriter w(path);
  w.header({"t[s]", "wx[rad/s]", "wy[rad/s]", "wz[rad/s]", "ax[m/s^2]", "ay[m/s^2]", "az[m/s^2]"});
  for (const auto& s : imu) {
    w.value(s.t);
    w.value(s.gyro);
    w.value(s.accel);
    w.end_row();
  }
  w.close();
}

std::vector<ImuSample> read_imu_csv(const fs::path& path) {
  const CsvTable tab = read_csv(path);
  const std::size_t t = tab.col("t", path), w = tab.col("wx", path), a = tab.col("ax", path);
  std::vector<ImuSample> out;
  out.reserve(tab.rows.size());
  for (const auto& r : tab.rows) out.push_back({r[t], get3(r, w), get3(r, a)});
  return out;
}

void write_legs_csv(const fs::path& path, const std::vector<LegSample>& legs) {
  CsvWriter w(path);
  std::vector<std::string> cols{"t[s]"};
  for (int l = 0; l < kNumLegs; ++l) {
    for (const char* q : {"q1", "q2", "q3"}) cols.push_back(leg_col(l, q, "rad"));
    for (const char* q : {"dq1", "dq2", "dq3"}) cols.push_back(leg_col(l, q, "rad/s"));
    cols.push_back(leg_col(l, "contact"));
  }
  w.header(cols);
  for (const auto& s : legs) {
    w.value(s.t);
    for (int l = 0; l < kNumLegs; ++l) {
      w.value(s.joints[l].angles);
      w.value(s.joints[l].rates);
      w.value(s.contact[l] ? 1.0 : 0.0);
    }
    w.end_row();
  }
  w.close();
}

std::vector<LegSample> read_legs_csv(const fs::path& path) {
  const CsvTable tab = read_csv(path);
  const std::size_t t = tab.col("t", path);
  std::array<std::size_t, kNumLegs> q{}, dq{}, c{};
  for (int l = 0; l < kNumLegs; ++l) {
    q[l] = tab.col(leg_col(l, "q1"), path);
    dq[l] = tab.col(leg_col(l, "dq1"), path);
    c[l] = tab.col(leg_col(l, "contact"), path);
  }
  std::vector<LegSample> out;
  out.reserve(tab.rows.size());
  for (const auto& r : tab.rows) {
    LegSample s;
    s.t = r[t];
    for (int l = 0; l < kNumLegs; ++l) {
      s.joints[l] = JointState{get3(r, q[l]), get3(r, dq[l])};
      s.contact[l] = r[c[l]] != 0.0;
    }
    out.push_back(s);
  }
  return out;
}

void write_truth_csv(const fs::path& path, const std::vector<GroundTruthRecord>& truth) {
  CsvWriter w(path);
  std::vector<std::string> cols{"t[s]", "px[m]", "py[m]", "pz[m]", "qw", "qx", "qy", "qz",
                                "vx[m/s]", "vy[m/s]", "vz[m/s]"};
  for (int l = 0; l < kNumLegs; ++l) {
    for (const char* f : {"fx", "fy", "fz"}) cols.push_back(leg_col(l, f, "m"));
    for (const char* f : {"vfx", "vfy", "vfz"}) cols.push_back(leg_col(l, f, "m/s"));
    cols.push_back(leg_col(l, "contact"));
    cols.push_back(leg_col(l, "slip"));
  }
  w.header(cols);
  for (const auto& r : truth) {
    w.value(r.t);
    w.value(r.p);
    const Eigen::Vector4d q = rotation_to_quaternion(r.G);
    for (int i = 0; i < 4; ++i) w.value(q[i]);
    w.value(r.v);
    for (int l = 0; l < kNumLegs; ++l) {
      w.value(r.feet[l]);
      w.value(r.foot_vel[l]);
      w.value(r.contact[l] ? 1.0 : 0.0);
      w.value(r.slip[l] ? 1.0 : 0.0);
    }
    w.end_row();
  }
  w.close();
}

std::vector<GroundTruthRecord> read_truth_csv(const fs::path& path) {
  const CsvTable tab = read_csv(path);
  const std::size_t t = tab.col("t", path), p = tab.col("px", path), q = tab.col("qw", path),
                    v = tab.col("vx", path);
  std::array<std::size_t, kNumLegs> f{}, vf{}, c{}, sl{};
  for (int l = 0; l < kNumLegs; ++l) {
    f[l] = tab.col(leg_col(l, "fx"), path);
    vf[l] = tab.col(leg_col(l, "vfx"), path);
    c[l] = tab.col(leg_col(l, "contact"), path);
    sl[l] = tab.col(leg_col(l, "slip"), path);
  }
  std::vector<GroundTruthRecord> out;
  out.reserve(tab.rows.size());
  for (const auto& r : tab.rows) {
    GroundTruthRecord rec;
    rec.t = r[t];
    rec.p = get3(r, p);
    rec.G = quaternion_to_rotation(Eigen::Vector4d(r[q], r[q + 1], r[q + 2], r[q + 3]));
    rec.v = get3(r, v);
    for (int l = 0; l < kNumLegs; ++l) {
      rec.feet[l] = get3(r, f[l]);
      rec.foot_vel[l] = get3(r, vf[l]);
      rec.contact[l] = r[c[l]] != 0.0;
      rec.slip[l] = r[sl[l]] != 0.0;
    }
    out.push_back(rec);
  }
  return out;
}

void write_trajectory_csv(const fs::path& path, const Trajectory& traj) {
  CsvWriter w(path);
  w.header({"t[s]", "px[m]", "py[m]", "pz[m]", "qw", "qx", "qy", "qz"});
  for (const auto& pose : traj) {
    w.value(pose.t);
    w.value(pose.p);
    const Eigen::Vector4d q = rotation_to_quaternion(pose.G);
    for (int i = 0; i < 4; ++i) w.value(q[i]);
    w.end_row();
  }
  w.close();
}

Trajectory read_trajectory_csv(const fs::path& path) {
  const CsvTable tab = read_csv(path);
  const std::size_t t = tab.col("t", path), p = tab.col("px", path), q = tab.col("qw", path);
  Trajectory out;
  out.reserve(tab.rows.size());
  for (const auto& r : tab.rows) {
    out.push_back({r[t], get3(r, p),
                   quaternion_to_rotation(Eigen::Vector4d(r[q], r[q + 1], r[q + 2], r[q + 3]))});
  }
  return out;
}

void write_series_csv(const fs::path& path, const Series& series,
                      const std::vector<std::string>& units) {
  CsvWriter w(path);
  std::vector<std::string> cols{"t[s]"};
  for (std::size_t i = 0; i < series.columns.size(); ++i) {
    cols.push_back(series.columns[i] +
                   (i < units.size() && !units[i].empty() ? "[" + units[i] + "]" : ""));
  }
  w.header(cols);
  for (std::size_t k = 0; k < series.t.size(); ++k) {
    w.value(series.t[k]);
    for (Eigen::Index i = 0; i < series.rows[k].size(); ++i) w.value(series.rows[k][i]);
    w.end_row();
  }
  w.close();
}

Series read_series_csv(const fs::path& path) {
  const CsvTable tab = read_csv(path);
  const std::size_t t = tab.col("t", path);
  Series s;
  for (std::size_t i = 0; i < tab.names.size(); ++i) {
    if (i != t) s.columns.push_back(tab.names[i]);
  }
  for (const auto& r : tab.rows) {
    s.t.push_back(r[t]);
    Eigen::VectorXd row(static_cast<Eigen::Index>(s.columns.size()));
    Eigen::Index j = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i != t) row[j++] = r[i];
    }
    s.rows.push_back(std::move(row));
  }
  return s;
}

void write_slip_windows_json(const fs::path& path, const std::vector<SlipWindow>& windows) {
  json arr = json::array();
  for (const auto& w : windows) {
    json legs = json::array();
    for (int l : w.legs) legs.push_back(std::string(leg_name(l)));
    arr.push_back({{"t_start", w.t_start},
                   {"t_end", w.t_end},
                   {"velocity", {w.velocity.x(), w.velocity.y(), w.velocity.z()}},
                   {"legs", legs}});
  }
  write_json(path, json{{"slip_windows", arr}});
}

std::vector<SlipWindow> read_slip_windows_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string(), path.string());
  std::vector<SlipWindow> out;
  try {
    const json j = json::parse(in);
    for (const auto& w : j.at("slip_windows")) {
      SlipWindow sw;
      sw.t_start = w.at("t_start").get<double>();
      sw.t_end = w.at("t_end").get<double>();
      const auto& v = w.at("velocity");
      sw.velocity = Vec3(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
      sw.legs.clear();
      for (const auto& name : w.at("legs")) sw.legs.push_back(leg_index_from_name(name.get<std::string>()));
      out.push_back(sw);
    }
  } catch (const json::exception& e) {
    throw Error("io", path.string() + ": " + e.what(), path.string());
  }
  return out;
}

void write_log(const fs::path& dir, const ScenarioConfig& config, const SimulationLog& log) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io", "cannot create " + dir.string() + ": " + ec.message(), dir.string());
  write_imu_csv(dir / "imu.csv", log.imu);
  write_legs_csv(dir / "legs.csv", log.legs);
  write_truth_csv(dir / "truth.csv", log.truth);
  write_slip_windows_json(dir / "slip_windows.json", config.slip_windows);
  write_json(dir / "scenario.json", scenario_to_json(config));
}

LogSet read_log(const fs::path& dir) {
  for (const char* name : {"imu.csv", "legs.csv", "truth.csv"}) {
    if (!fs::exists(dir / name)) {
      throw Error("io", "log directory " + dir.string() + " is missing " + name,
                  (dir / name).string());
    }
  }
  LogSet set;
  set.imu = read_imu_csv(dir / "imu.csv");
  set.legs = read_legs_csv(dir / "legs.csv");
  set.truth = read_truth_csv(dir / "truth.csv");
  if (fs::exists(dir / "slip_windows.json")) {
    set.slip_windows = read_slip_windows_json(dir / "slip_windows.json");
  }
  return set;
}

Trajectory truth_trajectory(const std::vector<GroundTruthRecord>& truth) {
  Trajectory out;
  out.reserve(truth.size());
  for (const auto& r : truth) out.push_back({r.t, r.p, r.G});
  return out;
}

}  // namespace legodom
