#include "legodom/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "legodom/error.hpp"

namespace legodom {

namespace {

using nlohmann::json;

/// Reads an object's keys while recording which ones were consumed, so that
/// leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& what) {
    throw Error("config", field + ": " + what, field);
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return number(key);
  }

  double number(const std::string& key) {
    if (!has(key)) fail(field(key), "required field is missing");
    const json& v = raw(key);
    if (!v.is_number()) fail(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(field(key), "expected a finite number");
    return d;
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_string()) fail(field(key), "expected a string");
    return v.get<std::string>();
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_array() || v.size() != 3) fail(field(key), "expected an array of 3 numbers");
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) fail(field(key), "expected numbers");
      out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(field(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) ObjectReader::fail(field, what);
}

PathType parse_path_type(const std::string& s, const std::string& field) {
  if (s == "straight") return PathType::Straight;
  if (s == "circular") return PathType::Circular;
  if (s == "sinusoidal") return PathType::Sinusoidal;
  if (s == "slope") return PathType::Slope;
  ObjectReader::fail(field, "unknown path type '" + s + "'");
}

NoiseConfig parse_noise(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  NoiseConfig n;
  n.accel = r.number("accel", n.accel);
  n.gyro = r.number("gyro", n.gyro);
  n.accel_bias = r.number("accel_bias", n.accel_bias);
  n.gyro_bias = r.number("gyro_bias", n.gyro_bias);
  if (r.has("foot_velocity")) {
    const json& fv = r.raw("foot_velocity");
    if (fv.is_number()) {
      n.foot_velocity = fv.get<double>() * Mat3::Identity();
    } else if (fv.is_array() && fv.size() == 3) {
      n.foot_velocity = Vec3(fv[0].get<double>(), fv[1].get<double>(), fv[2].get<double>()).asDiagonal();
    } else {
      ObjectReader::fail(r.field("foot_velocity"), "expected a number or 3 diagonal entries");
    }
  }
  n.meas_position = r.number("meas_position", n.meas_position);
  n.meas_velocity = r.number("meas_velocity", n.meas_velocity);
  n.meas_rolling = r.number("meas_rolling", n.meas_rolling);
  n.alpha = r.number("alpha", n.alpha);
  r.finish();
  return n;
}

json noise_to_json(const NoiseConfig& n) {
  const Vec3 fv = n.foot_velocity.diagonal();
  return json{{"accel", n.accel},
              {"gyro", n.gyro},
              {"accel_bias", n.accel_bias},
              {"gyro_bias", n.gyro_bias},
              {"foot_velocity", {fv.x(), fv.y(), fv.z()}},
              {"meas_position", n.meas_position},
              {"meas_velocity", n.meas_velocity},
              {"meas_rolling", n.meas_rolling},
              {"alpha", n.alpha}};
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string_view path_type_name(PathType type) {
  switch (type) {
    case PathType::Straight: return "straight";
    case PathType::Circular: return "circular";
    case PathType::Sinusoidal: return "sinusoidal";
    case PathType::Slope: return "slope";
  }
  return "straight";
}

double ScenarioConfig::cruise_speed() const {
  return gait.stance_duration > 0.0 ? gait.step_length / gait.stance_duration : 0.0;
}

void ScenarioConfig::validate() const {
  require(duration >= 0.0, "duration", "must be >= 0");
  require(imu_rate > 0.0, "imu_rate", "must be > 0");
  require(leg_rate > 0.0, "leg_rate", "must be > 0");
  const double ratio = imu_rate / leg_rate;
  require(ratio >= 1.0 && std::abs(ratio - std::round(ratio)) < 1e-9, "leg_rate",
          "imu_rate must be an integer multiple of leg_rate");
  require(gait.stance_duration > 0.0, "gait.stance_duration", "must be > 0");
  require(gait.swing_duration > 0.0, "gait.swing_duration", "must be > 0");
  require(gait.step_length >= 0.0, "gait.step_length", "must be >= 0");
  require(gait.step_height >= 0.0, "gait.step_height", "must be >= 0");
  require(gait.body_height > 0.0, "gait.body_height", "must be > 0");
  require(gait.ramp_duration >= 0.0, "gait.ramp_duration", "must be >= 0");
  require(path.radius > 0.0, "path.radius", "must be > 0");
  require(path.wavelength > 0.0, "path.wavelength", "must be > 0");
  require(std::abs(path.angle) < 1.2, "path.angle", "must be within (-1.2, 1.2) rad");
  require(terrain.wavelength > 0.0, "terrain.wavelength", "must be > 0");
  require(touchdown_impulse >= 0.0, "touchdown_impulse", "must be >= 0");
  require(sensors.noise_scale >= 0.0, "sensors.noise_scale", "must be >= 0");
  require(sensors.joint_angle_noise >= 0.0, "sensors.joint_angle_noise", "must be >= 0");
  require(sensors.joint_rate_noise >= 0.0, "sensors.joint_rate_noise", "must be >= 0");
  for (std::size_t i = 0; i < slip_windows.size(); ++i) {
    const auto& w = slip_windows[i];
    const std::string f = "slip_windows[" + std::to_string(i) + "]";
    require(w.t_start >= 0.0 && w.t_end <= duration && w.t_start < w.t_end, f,
            "window must satisfy 0 <= t_start < t_end <= duration");
    require(!w.legs.empty(), f + ".legs", "must name at least one leg");
  }
  require(initial.touchdown_foot_position >= 0.0, "initial_uncertainty.touchdown_foot_position",
          "must be >= 0");
  require(initial.touchdown_foot_velocity >= 0.0, "initial_uncertainty.touchdown_foot_velocity",
          "must be >= 0");
  noise.validate();
  for (const auto& leg : legs) leg.validate();
}

ScenarioConfig scenario_from_json(const json& j) {
  ObjectReader r(j, "");
  ScenarioConfig c;
  const double version = r.number("schema_version", kScenarioSchemaVersion);
  require(version == kScenarioSchemaVersion, "schema_version",
          "unsupported schema version (expected " + std::to_string(kScenarioSchemaVersion) + ")");
  c.name = r.string("name", c.name);
  c.duration = r.number("duration");
  c.imu_rate = r.number("imu_rate", c.imu_rate);
  c.leg_rate = r.number("leg_rate", c.leg_rate);
  const double seed = r.number("seed", static_cast<double>(c.seed));
  require(seed >= 0.0 && seed == std::floor(seed), "seed", "must be a non-negative integer");
  c.seed = static_cast<std::uint64_t>(seed);
  c.touchdown_impulse = r.number("touchdown_impulse", c.touchdown_impulse);

  if (r.has("gait")) {
    ObjectReader g(r.raw("gait"), "gait");
    c.gait.stance_duration = g.number("stance_duration", c.gait.stance_duration);
    c.gait.swing_duration = g.number("swing_duration", c.gait.swing_duration);
    c.gait.step_length = g.number("step_length", c.gait.step_length);
    c.gait.step_height = g.number("step_height", c.gait.step_height);
    c.gait.body_height = g.number("body_height", c.gait.body_height);
    c.gait.ramp_duration = g.number("ramp_duration", c.gait.ramp_duration);
    g.finish();
  }
  if (r.has("path")) {
    ObjectReader p(r.raw("path"), "path");
    c.path.type = parse_path_type(p.string("type", "straight"), "path.type");
    c.path.radius = p.number("radius", c.path.radius);
    c.path.amplitude = p.number("amplitude", c.path.amplitude);
    c.path.wavelength = p.number("wavelength", c.path.wavelength);
    c.path.angle = p.number("angle", c.path.angle);
    p.finish();
  }
  if (r.has("terrain")) {
    ObjectReader t(r.raw("terrain"), "terrain");
    c.terrain.amplitude = t.number("amplitude", c.terrain.amplitude);
    c.terrain.wavelength = t.number("wavelength", c.terrain.wavelength);
    t.finish();
  }
  if (r.has("slip_windows")) {
    const json& arr = r.raw("slip_windows");
    require(arr.is_array(), "slip_windows", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "slip_windows[" + std::to_string(i) + "]";
      ObjectReader w(arr[i], path);
      SlipWindow sw;
      sw.t_start = w.number("t_start");
      sw.t_end = w.number("t_end");
      sw.velocity = w.vec3("velocity", sw.velocity);
      if (w.has("legs")) {
        const json& legs = w.raw("legs");
        require(legs.is_array(), path + ".legs", "expected an array of leg names");
        sw.legs.clear();
        for (const auto& name : legs) {
          require(name.is_string(), path + ".legs", "expected leg names");
          sw.legs.push_back(leg_index_from_name(name.get<std::string>()));
        }
      }
      w.finish();
      c.slip_windows.push_back(sw);
    }
  }
  if (r.has("noise")) c.noise = parse_noise(r.raw("noise"), "noise");
  if (r.has("sensors")) {
    ObjectReader s(r.raw("sensors"), "sensors");
    c.sensors.noise_scale = s.number("noise_scale", c.sensors.noise_scale);
    c.sensors.joint_angle_noise = s.number("joint_angle_noise", c.sensors.joint_angle_noise);
    c.sensors.joint_rate_noise = s.number("joint_rate_noise", c.sensors.joint_rate_noise);
    c.sensors.initial_accel_bias = s.vec3("initial_accel_bias", c.sensors.initial_accel_bias);
    c.sensors.initial_gyro_bias = s.vec3("initial_gyro_bias", c.sensors.initial_gyro_bias);
    s.finish();
  }
  if (r.has("initial_uncertainty")) {
    ObjectReader u(r.raw("initial_uncertainty"), "initial_uncertainty");
    auto& iu = c.initial;
    iu.position = u.number("position", iu.position);
    iu.velocity = u.number("velocity", iu.velocity);
    iu.attitude = u.number("attitude", iu.attitude);
    iu.foot_position = u.number("foot_position", iu.foot_position);
    iu.foot_velocity = u.number("foot_velocity", iu.foot_velocity);
    iu.accel_bias = u.number("accel_bias", iu.accel_bias);
    iu.gyro_bias = u.number("gyro_bias", iu.gyro_bias);
    iu.touchdown_foot_position = u.number("touchdown_foot_position", iu.touchdown_foot_position);
    iu.touchdown_foot_velocity = u.number("touchdown_foot_velocity", iu.touchdown_foot_velocity);
    u.finish();
  }
  if (r.has("legs")) {
    ObjectReader l(r.raw("legs"), "legs");
    const double l1 = l.number("l1", c.legs[0].l1);
    const double l2 = l.number("l2", c.legs[0].l2);
    const double l3 = l.number("l3", c.legs[0].l3);
    const double rf = l.number("foot_radius", c.legs[0].foot_radius);
    const Vec3 hip = l.vec3("hip_offset", c.legs[0].hip_offset);
    l.finish();
    for (auto& leg : c.legs) {
      leg.l1 = l1;
      leg.l2 = l2;
      leg.l3 = l3;
      leg.foot_radius = rf;
      const bool front = leg.index == 0 || leg.index == 1;
      leg.hip_offset = Vec3(front ? std::abs(hip.x()) : -std::abs(hip.x()),
                            leg.side_sign * std::abs(hip.y()), hip.z());
    }
  }
  r.finish();
  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json windows = json::array();
  for (const auto& w : c.slip_windows) {
    json legs = json::array();
    for (int l : w.legs) legs.push_back(std::string(leg_name(l)));
    windows.push_back({{"t_start", w.t_start}, {"t_end", w.t_end}, {"velocity", vec_json(w.velocity)},
                       {"legs", legs}});
  }
  const auto& lf = c.legs[0];
  return json{
      {"schema_version", kScenarioSchemaVersion},
      {"name", c.name},
      {"duration", c.duration},
      {"imu_rate", c.imu_rate},
      {"leg_rate", c.leg_rate},
      {"seed", c.seed},
      {"touchdown_impulse", c.touchdown_impulse},
      {"gait",
       {{"stance_duration", c.gait.stance_duration},
        {"swing_duration", c.gait.swing_duration},
        {"step_length", c.gait.step_length},
        {"step_height", c.gait.step_height},
        {"body_height", c.gait.body_height},
        {"ramp_duration", c.gait.ramp_duration}}},
      {"path",
       {{"type", std::string(path_type_name(c.path.type))},
        {"radius", c.path.radius},
        {"amplitude", c.path.amplitude},
        {"wavelength", c.path.wavelength},
        {"angle", c.path.angle}}},
      {"terrain", {{"amplitude", c.terrain.amplitude}, {"wavelength", c.terrain.wavelength}}},
      {"slip_windows", windows},
      {"noise", noise_to_json(c.noise)},
      {"sensors",
       {{"noise_scale", c.sensors.noise_scale},
        {"joint_angle_noise", c.sensors.joint_angle_noise},
        {"joint_rate_noise", c.sensors.joint_rate_noise},
        {"initial_accel_bias", vec_json(c.sensors.initial_accel_bias)},
        {"initial_gyro_bias", vec_json(c.sensors.initial_gyro_bias)}}},
      {"initial_uncertainty",
       {{"position", c.initial.position},
        {"velocity", c.initial.velocity},
        {"attitude", c.initial.attitude},
        {"foot_position", c.initial.foot_position},
        {"foot_velocity", c.initial.foot_velocity},
        {"accel_bias", c.initial.accel_bias},
        {"gyro_bias", c.initial.gyro_bias},
        {"touchdown_foot_position", c.initial.touchdown_foot_position},
        {"touchdown_foot_velocity", c.initial.touchdown_foot_velocity}}},
      {"legs",
       {{"l1", lf.l1},
        {"l2", lf.l2},
        {"l3", lf.l3},
        {"foot_radius", lf.foot_radius},
        {"hip_offset", vec_json(lf.hip_offset)}}},
  };
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open scenario file " + path.string(), path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config", "malformed scenario file " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

Covariance initial_covariance(const InitialUncertainty& u) {
  ErrorVector sd;
  sd.segment<3>(err::kPos).setConstant(u.position);
  sd.segment<3>(err::kVel).setConstant(u.velocity);
  sd.segment<3>(err::kRot).setConstant(u.attitude);
  sd.segment<12>(err::kFootPos).setConstant(u.foot_position);
  sd.segment<12>(err::kFootVel).setConstant(u.foot_velocity);
  sd.segment<3>(err::kAccelBias).setConstant(u.accel_bias);
  sd.segment<3>(err::kGyroBias).setConstant(u.gyro_bias);
  return sd.array().square().matrix().asDiagonal();
}

FilterModel filter_model(const ScenarioConfig& config, ContactModel contact) {
  FilterModel m;
  m.legs = config.legs;
  m.noise = config.noise;
  m.contact = contact;
  m.options.touchdown_position_var = config.initial.touchdown_foot_position * config.initial.touchdown_foot_position;
  m.options.touchdown_velocity_var = config.initial.touchdown_foot_velocity * config.initial.touchdown_foot_velocity;
  if (config.path.type == PathType::Slope) {
    m.options.ground_normal = Vec3(-std::sin(config.path.angle), 0.0, std::cos(config.path.angle));
  }
  return m;
}

}  // namespace legodom
