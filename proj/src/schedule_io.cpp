#include "pdd/schedule_io.hpp"

#include <cmath>

namespace pdd {

namespace json_util {

const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(std::string("missing required field '") + key + "'", path);
  return *it;
}

double number(const nlohmann::json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) throw ConfigError("expected a number", path + "." + key);
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError("expected a finite number", path + "." + key);
  return x;
}

double number_or(const nlohmann::json& obj, const char* key, double fallback, const std::string& path) {
  return obj.contains(key) ? number(obj, key, path) : fallback;
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError("unknown key '" + item.key() + "'", path);
  }
}

}  // namespace json_util

using namespace json_util;

namespace {

NoiseTone tone_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("noise entry must be an object", path);
  reject_unknown(j, {"B_e", "omega_e", "theta", "polarization"}, path);
  NoiseTone t;
  t.amplitude = number(j, "B_e", path);
  t.angular_frequency = number_or(j, "omega_e", 0.0, path);
  t.phase = number_or(j, "theta", 0.0, path);
  if (j.contains("polarization")) {
    const auto& p = j["polarization"];
    if (!p.is_array() || p.size() != 3) throw ConfigError("expected a 3-vector", path + ".polarization");
    for (int k = 0; k < 3; ++k) {
      if (!p[k].is_number()) throw ConfigError("expected a number", path + ".polarization[" + std::to_string(k) + "]");
      t.polarization[k] = p[k].get<double>();
    }
  }
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), path);
  }
  return t;
}

nlohmann::json tone_to_json(const NoiseTone& t) {
  return {{"B_e", t.amplitude},
          {"omega_e", t.angular_frequency},
          {"theta", t.phase},
          {"polarization", {t.polarization.x(), t.polarization.y(), t.polarization.z()}}};
}

std::string text_or(const nlohmann::json& obj, const char* key, const std::string& fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) throw ConfigError("expected a string", path + "." + key);
  return obj[key].get<std::string>();
}

}  // namespace

FieldSchedule schedule_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError("schedule must be a JSON object", path);
  if (j.contains("schema")) {
    if (!j["schema"].is_number_integer() || j["schema"].get<int>() != schedule_schema_version)
      throw ConfigError("unsupported schedule schema", path + ".schema");
  }
  const auto& kind_v = require(j, "kind", path);
  if (!kind_v.is_string()) throw ConfigError("expected a string", path + ".kind");
  const std::string kind = kind_v.get<std::string>();

  ScheduleDescriptor desc;
  if (kind == "static" || kind == "none") {
    reject_unknown(j, {"schema", "kind", "B", "t_f", "noise"}, path);
    desc = StaticParams{number(j, "B", path), number(j, "t_f", path)};
  } else if (kind == "pulsed") {
    reject_unknown(j, {"schema", "kind", "B_t", "tau", "t_center", "t_f", "return", "t_return", "noise"}, path);
    PulsedParams p;
    p.b_t = number(j, "B_t", path);
    p.tau = number(j, "tau", path);
    p.t_center = number(j, "t_center", path);
    p.t_f = number(j, "t_f", path);
    const std::string ret = text_or(j, "return", "linear", path);
    if (ret == "linear") p.return_mode = ReturnMode::linear;
    else if (ret == "instant") p.return_mode = ReturnMode::instant;
    else throw ConfigError("expected \"linear\" or \"instant\"", path + ".return");
    p.t_return = number_or(j, "t_return", -1.0, path);
    desc = p;
  } else if (kind == "continuous") {
    reject_unknown(j, {"schema", "kind", "B_t", "period", "omega_r", "t_f", "ramp", "noise"}, path);
    ContinuousParams p;
    p.b_t = number(j, "B_t", path);
    if (j.contains("period") == j.contains("omega_r"))
      throw ConfigError("exactly one of 'period' and 'omega_r' is required", path);
    if (j.contains("period")) {
      const double period = number(j, "period", path);
      if (period <= 0) throw ConfigError("must be positive", path + ".period");
      p.omega_r = units::two_pi / period;
    } else {
      p.omega_r = number(j, "omega_r", path);
    }
    p.t_f = number(j, "t_f", path);
    const std::string ramp = text_or(j, "ramp", "balanced", path);
    if (ramp == "balanced") p.ramp = RampShape::balanced;
    else if (ramp == "sin2") p.ramp = RampShape::sin2;
    else throw ConfigError("expected \"balanced\" or \"sin2\"", path + ".ramp");
    desc = p;
  } else {
    throw ConfigError("unknown schedule kind '" + kind + "'", path + ".kind");
  }

  FieldSchedule schedule = [&] {
    try {
      return build_schedule(desc);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), path);
    }
  }();
  if (j.contains("noise")) {
    const auto& noise = j["noise"];
    if (!noise.is_array()) throw ConfigError("expected an array", path + ".noise");
    for (std::size_t k = 0; k < noise.size(); ++k)
      schedule = schedule.with_noise(tone_from_json(noise[k], path + ".noise[" + std::to_string(k) + "]"));
  }
  return schedule;
}

FieldSchedule parse_schedule_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), "$");
  }
  return schedule_from_json(j);
}

nlohmann::json schedule_to_json(const FieldSchedule& schedule) {
  if (!schedule.descriptor()) throw ConfigError("schedule was not built from a descriptor and cannot be serialized");
  nlohmann::json j = std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StaticParams>) {
          return {{"kind", "static"}, {"B", p.b}, {"t_f", p.t_f}};
        } else if constexpr (std::is_same_v<T, PulsedParams>) {
          nlohmann::json o = {{"kind", "pulsed"},     {"B_t", p.b_t}, {"tau", p.tau},
                              {"t_center", p.t_center}, {"t_f", p.t_f},
                              {"return", p.return_mode == ReturnMode::linear ? "linear" : "instant"}};
          if (p.t_return >= 0) o["t_return"] = p.t_return;
          return o;
        } else {
          return {{"kind", "continuous"},
                  {"B_t", p.b_t},
                  {"omega_r", p.omega_r},
                  {"t_f", p.t_f},
                  {"ramp", p.ramp == RampShape::balanced ? "balanced" : "sin2"}};
        }
      },
      *schedule.descriptor());
  j["schema"] = schedule_schema_version;
  if (!schedule.tones().empty()) {
    j["noise"] = nlohmann::json::array();
    for (const auto& t : schedule.tones()) j["noise"].push_back(tone_to_json(t));
  }
  return j;
}

std::string serialize_schedule(const FieldSchedule& schedule) { return schedule_to_json(schedule).dump(); }

}  // namespace pdd
