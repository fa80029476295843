#pragma once

// JSON schedule format (schema 1). Units are fixed: Gauss, us, rad/us, rad.
//
//   {"schema": 1, "kind": "pulsed", "B_t": 10, "tau": 2, "t_center": 50, "t_f": 100,
//    "return": "linear", "t_return": 1,
//    "noise": [{"B_e": 1e-4, "omega_e": 0.1, "theta": 0, "polarization": [0, 0, 1]}]}
//   {"kind": "continuous", "B_t": 10, "period": 10, "t_f": 100, "ramp": "balanced"}
//   {"kind": "static", "B": 10, "t_f": 100}
//
// "continuous" accepts either "period" (us) or "omega_r" (rad/us). "none" is an alias
// of "static". Unknown keys are rejected.

#include "json.hpp"
#include <string>

#include "pdd/field_schedule.hpp"

namespace pdd {

inline constexpr int schedule_schema_version = 1;

FieldSchedule parse_schedule_config(const std::string& text);
FieldSchedule schedule_from_json(const nlohmann::json& j, const std::string& path = "$");

/// Requires a schedule built from a descriptor; custom segment lists are not serializable.
nlohmann::json schedule_to_json(const FieldSchedule& schedule);
std::string serialize_schedule(const FieldSchedule& schedule);

/// Helpers shared with the experiment-config reader.
namespace json_util {
const nlohmann::json& require(const nlohmann::json& obj, const char* key, const std::string& path);
double number(const nlohmann::json& obj, const char* key, const std::string& path);
double number_or(const nlohmann::json& obj, const char* key, double fallback, const std::string& path);
void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& path);
}  // namespace json_util

}  // namespace pdd
