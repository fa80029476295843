#include "pdd/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "pdd/gate_sim.hpp"
#include "pdd/schedule_io.hpp"

namespace pdd {

using json = nlohmann::json;
using namespace json_util;

std::string to_string(AnalysisKind k) {
  switch (k) {
    case AnalysisKind::echo_demo: return "echo-demo";
    case AnalysisKind::filter: return "filter";
    case AnalysisKind::leakage_sweep: return "leakage-sweep";
    case AnalysisKind::control_error: return "control-error";
    case AnalysisKind::gate: return "gate";
    case AnalysisKind::sensitivity: return "sensitivity";
  }
  return "echo-demo";
}

AnalysisKind parse_analysis(const std::string& s) {
  for (auto k : {AnalysisKind::echo_demo, AnalysisKind::filter, AnalysisKind::leakage_sweep,
                 AnalysisKind::control_error, AnalysisKind::gate, AnalysisKind::sensitivity})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown analysis '" + s + "'", "$.analysis");
}

std::string tool_version() { return PDD_VERSION; }

HyperfineLabel parse_label(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("label must look like F,m (got '" + text + "')");
  try {
    return {HalfInt::parse(text.substr(0, comma)), HalfInt::parse(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ConfigError("label must look like F,m (got '" + text + "')");
  }
}

namespace {

// ---- JSON helpers -------------------------------------------------------------------

HalfInt quantum_number(const json& v, const std::string& path) {
  try {
    if (v.is_string()) return HalfInt::parse(v.get<std::string>());
    if (v.is_number()) return HalfInt::from_double(v.get<double>());
  } catch (const std::exception& e) {
    throw ConfigError(e.what(), path);
  }
  throw ConfigError("expected a half-integer", path);
}

HyperfineLabel label_from_json(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2) throw ConfigError("expected [F, m]", path);
  return {quantum_number(v[0], path + "[0]"), quantum_number(v[1], path + "[1]")};
}

json label_to_json(const HyperfineLabel& l) { return json::array({l.F.value(), l.m.value()}); }

std::string text_or(const json& obj, const char* key, const std::string& fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) throw ConfigError("expected a string", path + "." + key);
  return obj[key].get<std::string>();
}

bool flag_or(const json& obj, const char* key, bool fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) throw ConfigError("expected true or false", path + "." + key);
  return obj[key].get<bool>();
}

int integer_or(const json& obj, const char* key, int fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) throw ConfigError("expected an integer", path + "." + key);
  return obj[key].get<int>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError("expected a non-empty array of numbers", path);
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!v[k].is_number()) throw ConfigError("expected a number", path + "[" + std::to_string(k) + "]");
    out.push_back(v[k].get<double>());
  }
  return out;
}

const json& object_or_empty(const json& obj, const char* key, const std::string& path) {
  static const json empty = json::object();
  if (!obj.contains(key)) return empty;
  if (!obj[key].is_object()) throw ConfigError("expected an object", path + "." + key);
  return obj[key];
}

// Either an explicit list or {"min", "max", "points", "spacing"}.
std::vector<double> grid(const json& v, const std::string& path) {
  if (v.is_array()) return numbers(v, path);
  if (!v.is_object()) throw ConfigError("expected a list or a {min, max, points} object", path);
  reject_unknown(v, {"min", "max", "points", "spacing"}, path);
  const double lo = number(v, "min", path), hi = number(v, "max", path);
  const int n = integer_or(v, "points", 0, path);
  const std::string spacing = text_or(v, "spacing", "log", path);
  if (n < 2) throw ConfigError("need at least 2 points", path + ".points");
  if (!(lo > 0) || !(hi > lo)) throw ConfigError("need 0 < min < max", path);
  std::vector<double> out;
  for (int k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) / (n - 1);
    if (spacing == "log") out.push_back(lo * std::pow(hi / lo, u));
    else if (spacing == "linear") out.push_back(lo + (hi - lo) * u);
    else throw ConfigError("expected \"log\" or \"linear\"", path + ".spacing");
  }
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

// ---- resolution ---------------------------------------------------------------------

const std::string root = "$";

json default_schedule(AnalysisKind k) {
  switch (k) {
    case AnalysisKind::echo_demo:
      return {{"kind", "pulsed"}, {"B_t", 10.0}, {"tau", 2.0}, {"t_center", 1.5}, {"t_f", 4.0}};
    case AnalysisKind::control_error:
      return {{"kind", "pulsed"}, {"B_t", 10.0}, {"tau", 2.0}, {"t_center", 50.0}, {"t_f", 100.0}};
    default: return nullptr;
  }
}

json default_filter_schedules() {
  return json::array({json{{"kind", "static"}, {"B", 10.0}, {"t_f", 100.0}},
                      json{{"kind", "pulsed"}, {"B_t", 10.0}, {"tau", 10.0}, {"t_center", 50.0}, {"t_f", 100.0}},
                      json{{"kind", "continuous"}, {"B_t", 10.0}, {"period", 10.0}, {"t_f", 100.0}}});
}

json resolve_schedule(const json& j, const std::string& path) { return schedule_to_json(schedule_from_json(j, path)); }

std::vector<HyperfineLabel> default_qubit(const HyperfineSystem& sys) {
  for (auto it = sys.blocks().rbegin(); it != sys.blocks().rend(); ++it)
    if (it->F >= HalfInt(1)) return {{it->F, -1}, {it->F, 1}};
  throw ConfigError("species has no F >= 1 block; give \"qubit\" explicitly");
}

json resolve_params(AnalysisKind kind, const json& p, const json& top, const RunOptions& run) {
  const std::string path = "$.params";
  json r;
  switch (kind) {
    case AnalysisKind::echo_demo: {
      reject_unknown(p, {"samples"}, path);
      r["samples"] = integer_or(p, "samples", 401, path);
      if (r["samples"].get<int>() < 2) throw ConfigError("need at least 2 samples", path + ".samples");
      break;
    }
    case AnalysisKind::filter: {
      reject_unknown(p, {"omega_e", "f_khz", "B_e", "n_phases", "schedules", "check_linearity",
                         "check_step_convergence"},
                     path);
      if (p.contains("omega_e") && p.contains("f_khz"))
        throw ConfigError("give either omega_e or f_khz, not both", path);
      std::vector<double> omega;
      if (p.contains("omega_e")) {
        omega = grid(p["omega_e"], path + ".omega_e");
      } else {
        const json f = p.contains("f_khz") ? p["f_khz"] : json{{"min", 0.01}, {"max", 1000.0}, {"points", 21}};
        for (double x : grid(f, path + ".f_khz")) omega.push_back(units::khz(x));
      }
      r["omega_e"] = omega;
      r["B_e"] = number_or(p, "B_e", 1e-4, path);
      r["n_phases"] = integer_or(p, "n_phases", 8, path);
      r["check_linearity"] = flag_or(p, "check_linearity", true, path);
      r["check_step_convergence"] = flag_or(p, "check_step_convergence", true, path);
      json scheds = p.contains("schedules") ? p["schedules"]
                    : top.contains("schedule") ? json::array({top["schedule"]})
                                               : default_filter_schedules();
      if (!scheds.is_array() || scheds.empty()) throw ConfigError("expected a non-empty list", path + ".schedules");
      r["schedules"] = json::array();
      for (std::size_t k = 0; k < scheds.size(); ++k)
        r["schedules"].push_back(resolve_schedule(scheds[k], path + ".schedules[" + std::to_string(k) + "]"));
      break;
    }
    case AnalysisKind::leakage_sweep: {
      reject_unknown(p, {"scheme", "tau", "t_f", "B_t"}, path);
      std::string scheme = text_or(p, "scheme", "pulsed", path);
      if (run.scheme) scheme = *run.scheme;
      r["scheme"] = to_string(parse_scheme(scheme));
      r["tau"] = number_or(p, "tau", 10.0, path);
      r["t_f"] = number_or(p, "t_f", 100.0, path);
      r["B_t"] = grid(p.contains("B_t") ? p["B_t"] : json{{"min", 0.25}, {"max", 10.0}, {"points", 13}},
                      path + ".B_t");
      scheme_factory(parse_scheme(scheme), r["tau"], r["t_f"]);
      break;
    }
    case AnalysisKind::control_error: {
      reject_unknown(p, {"delta_B", "lambda2", "t_r"}, path);
      r["delta_B"] = number_or(p, "delta_B", 2.5e-4, path);
      r["lambda2"] = number_or(p, "lambda2", 1.0 / 3.0, path);
      r["t_r"] = p.contains("t_r") ? numbers(p["t_r"], path + ".t_r") : std::vector<double>{3.0, 100.0};
      break;
    }
    case AnalysisKind::gate: {
      reject_unknown(p, {"n_spins", "spin", "omega_a", "delta", "coupling", "phase", "n_max", "B_t", "frames",
                         "samples", "t_gate", "check_truncation"},
                     path);
      r["n_spins"] = integer_or(p, "n_spins", 2, path);
      r["spin"] = quantum_number(p.value("spin", json("1/2")), path + ".spin").str();
      r["omega_a"] = number_or(p, "omega_a", units::mhz(2.0), path);
      r["delta"] = number_or(p, "delta", units::khz(10.0), path);
      r["phase"] = number_or(p, "phase", units::pi / 2, path);
      r["coupling"] = number_or(p, "coupling", coupling_for_phase(r["delta"], r["phase"]), path);
      r["n_max"] = integer_or(p, "n_max", 20, path);
      r["B_t"] = number_or(p, "B_t", 10.0, path);
      if (r["delta"].get<double>() == 0.0) throw ConfigError("delta must be nonzero", path + ".delta");
      r["t_gate"] = number_or(p, "t_gate", units::two_pi / std::abs(r["delta"].get<double>()), path);
      r["samples"] = integer_or(p, "samples", 201, path);
      r["check_truncation"] = flag_or(p, "check_truncation", true, path);
      json frames = p.contains("frames") ? p["frames"] : json::array({"effective", "full"});
      if (!frames.is_array() || frames.empty()) throw ConfigError("expected a non-empty list", path + ".frames");
      for (const auto& f : frames)
        if (!f.is_string() || (f != "effective" && f != "full"))
          throw ConfigError("frames must be \"effective\" or \"full\"", path + ".frames");
      r["frames"] = frames;
      break;
    }
    case AnalysisKind::sensitivity: {
      reject_unknown(p, {"B0", "mode"}, path);
      r["B0"] = number_or(p, "B0", 1.0, path);
      const std::string mode = text_or(p, "mode", "projected", path);
      if (mode != "projected" && mode != "full") throw ConfigError("expected \"projected\" or \"full\"", path + ".mode");
      r["mode"] = mode;
      break;
    }
  }
  return r;
}

ZeemanMode mode_of(const json& resolved) {
  return resolved["mode"] == "full" ? ZeemanMode::full : ZeemanMode::projected;
}

HyperfineSystem system_of(const json& resolved) {
  return SpeciesTable::builtin().get(resolved["species"].get<std::string>()).system();
}

std::vector<HyperfineLabel> qubit_of(const json& resolved) {
  std::vector<HyperfineLabel> q;
  for (const auto& l : resolved["qubit"]) q.push_back(label_from_json(l, "$.qubit"));
  return q;
}

ComplexVector state_of(const HyperfineSystem& sys, const json& resolved) {
  std::vector<std::pair<HyperfineLabel, std::complex<double>>> amps;
  for (const auto& e : resolved["initial_state"])
    amps.push_back({label_from_json(json::array({e[0], e[1]}), "$.initial_state"), {e[2].get<double>(), e[3].get<double>()}});
  return make_state(sys, amps);
}

AnalysisOptions analysis_options(const json& resolved, unsigned workers) {
  const json& t = resolved["tolerances"];
  AnalysisOptions a;
  a.propagation.dt_init = t["dt_init"];
  a.propagation.tol = t["tol"];
  a.propagation.max_steps = t["max_steps"];
  a.propagation.integrator = t["integrator"] == "magnus4" ? Integrator::magnus4 : Integrator::midpoint;
  a.leakage_bound = t["leakage_bound"];
  a.mode = mode_of(resolved);
  a.workers = workers;
  return a;
}

}  // namespace

ExperimentConfig resolve_experiment(const json& doc, std::optional<AnalysisKind> kind, const RunOptions& run) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", root);
  reject_unknown(doc, {"schema", "analysis", "species", "mode", "schedule", "initial_state", "qubit", "tolerances",
                       "params", "pair"},
                 root);
  if (doc.contains("schema") && (!doc["schema"].is_number_integer() || doc["schema"] != experiment_schema_version))
    throw ConfigError("unsupported config schema", "$.schema");
  ExperimentConfig cfg;
  if (doc.contains("analysis")) {
    if (!doc["analysis"].is_string()) throw ConfigError("expected a string", "$.analysis");
    cfg.kind = parse_analysis(doc["analysis"]);
    if (kind && *kind != cfg.kind)
      throw ConfigError("config is for '" + to_string(cfg.kind) + "' but the subcommand is '" + to_string(*kind) + "'",
                        "$.analysis");
  } else if (kind) {
    cfg.kind = *kind;
  } else {
    throw ConfigError("missing required field 'analysis'", root);
  }

  json& r = cfg.resolved;
  r["schema"] = experiment_schema_version;
  r["analysis"] = to_string(cfg.kind);
  r["species"] = text_or(doc, "species", "ba137", root);
  if (!SpeciesTable::builtin().contains(r["species"]))
    throw ConfigError("unknown species preset '" + r["species"].get<std::string>() + "'", "$.species");
  const HyperfineSystem sys = system_of(r);
  r["mode"] = text_or(doc, "mode", "projected", root);
  if (r["mode"] != "projected" && r["mode"] != "full") throw ConfigError("expected \"projected\" or \"full\"", "$.mode");

  const json& tol = object_or_empty(doc, "tolerances", root);
  reject_unknown(tol, {"dt_init", "tol", "max_steps", "integrator", "leakage_bound"}, "$.tolerances");
  const PropagationOptions defaults;
  r["tolerances"] = {{"dt_init", number_or(tol, "dt_init", defaults.dt_init, "$.tolerances")},
                     {"tol", number_or(tol, "tol", defaults.tol, "$.tolerances")},
                     {"max_steps", tol.contains("max_steps") ? tol["max_steps"].get<std::size_t>() : defaults.max_steps},
                     {"integrator", text_or(tol, "integrator", "midpoint", "$.tolerances")},
                     {"leakage_bound", number_or(tol, "leakage_bound", 1e-2, "$.tolerances")}};
  if (r["tolerances"]["integrator"] != "midpoint" && r["tolerances"]["integrator"] != "magnus4")
    throw ConfigError("expected \"midpoint\" or \"magnus4\"", "$.tolerances.integrator");
  if (!(r["tolerances"]["dt_init"].get<double>() > 0) || !(r["tolerances"]["tol"].get<double>() > 0))
    throw ConfigError("dt_init and tol must be positive", "$.tolerances");

  std::vector<HyperfineLabel> qubit;
  if (doc.contains("qubit")) {
    const json& q = doc["qubit"];
    if (!q.is_array() || q.size() != 2) throw ConfigError("expected two [F, m] labels", "$.qubit");
    for (std::size_t k = 0; k < 2; ++k) qubit.push_back(label_from_json(q[k], "$.qubit[" + std::to_string(k) + "]"));
  } else {
    qubit = default_qubit(sys);
  }
  if (run.pair) qubit = *run.pair;
  if (doc.contains("pair")) {
    const json& q = doc["pair"];
    if (!q.is_array() || q.size() != 2) throw ConfigError("expected two [F, m] labels", "$.pair");
    if (!run.pair) qubit = {label_from_json(q[0], "$.pair[0]"), label_from_json(q[1], "$.pair[1]")};
  }
  for (std::size_t k = 0; k < qubit.size(); ++k) {
    try {
      sys.index_of(qubit[k]);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "$.qubit[" + std::to_string(k) + "]");
    }
  }
  r["qubit"] = json::array({label_to_json(qubit[0]), label_to_json(qubit[1])});

  r["initial_state"] = json::array();
  if (doc.contains("initial_state")) {
    const json& s = doc["initial_state"];
    if (!s.is_array() || s.empty()) throw ConfigError("expected a list of [F, m, amplitude]", "$.initial_state");
    for (std::size_t k = 0; k < s.size(); ++k) {
      const std::string p = "$.initial_state[" + std::to_string(k) + "]";
      const json& e = s[k];
      if (!e.is_array() || (e.size() != 3 && e.size() != 4)) throw ConfigError("expected [F, m, re] or [F, m, re, im]", p);
      const HyperfineLabel l = label_from_json(json::array({e[0], e[1]}), p);
      try {
        sys.index_of(l);
      } catch (const ConfigError& err) {
        throw ConfigError(err.what(), p);
      }
      for (std::size_t c = 2; c < e.size(); ++c)
        if (!e[c].is_number()) throw ConfigError("expected a number", p + "[" + std::to_string(c) + "]");
      r["initial_state"].push_back({l.F.value(), l.m.value(), e[2].get<double>(), e.size() == 4 ? e[3].get<double>() : 0.0});
    }
  } else {
    r["initial_state"].push_back({qubit[0].F.value(), qubit[0].m.value(), std::sqrt(1.0 / 3.0), 0.0});
    r["initial_state"].push_back({qubit[1].F.value(), qubit[1].m.value(), std::sqrt(2.0 / 3.0), 0.0});
  }
  try {
    state_of(sys, r);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), "$.initial_state");
  }

  const json sched = doc.contains("schedule") ? doc["schedule"] : default_schedule(cfg.kind);
  if (!sched.is_null() && cfg.kind != AnalysisKind::filter) r["schedule"] = resolve_schedule(sched, "$.schedule");

  const json& params = object_or_empty(doc, "params", root);
  r["params"] = resolve_params(cfg.kind, params, doc, run);
  return cfg;
}

namespace {

// ---- output -------------------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::filesystem::path write_csv(const RunOptions& run, const std::string& name, const json& config, const Table& t) {
  std::filesystem::create_directories(run.out_dir);
  const auto path = run.out_dir / (name + ".csv");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "# pddsim " << tool_version() << "\n# config " << config.dump() << "\n";
  for (std::size_t k = 0; k < t.header.size(); ++k) os << (k ? "," : "") << t.header[k];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    os << "\n";
  }
  return path;
}

std::filesystem::path write_json(const RunOptions& run, const std::string& name, const json& config,
                                 const json& results) {
  std::filesystem::create_directories(run.out_dir);
  const auto path = run.out_dir / (name + ".json");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << json{{"tool", "pddsim"}, {"version", tool_version()}, {"config", config}, {"results", results}}.dump(2)
     << "\n";
  return path;
}

std::string label_column(const HyperfineLabel& l) { return "P(" + l.F.str() + ";" + l.m.str() + ")"; }

json magnus_json(const HyperfineSystem& sys, const FieldSchedule& s, const ComplexVector& psi0,
                 const std::vector<HyperfineLabel>& qubit) {
  const MagnusEstimate m = magnus_diabatic_estimate(s, sys.block_larmor_per_gauss(qubit[0].F));
  return {{"first_order_leakage", magnus_leakage_estimate(sys, s, psi0, qubit)},
          {"a_y", m.first_order.real()},
          {"a_x", m.first_order.imag()},
          {"jz_shift", m.jz_shift}};
}

// ---- analyses -----------------------------------------------------------------------

RunReport run_echo(const json& cfg, const RunOptions& run) {
  const HyperfineSystem sys = system_of(cfg);
  const FieldSchedule schedule = schedule_from_json(cfg["schedule"]);
  const ComplexVector psi0 = state_of(sys, cfg);
  const auto qubit = qubit_of(cfg);
  AnalysisOptions opts = analysis_options(cfg, run.workers);
  opts.propagation.blocks = support_blocks(sys, psi0);

  const int n = cfg["params"]["samples"];
  for (int k = 0; k < n; ++k) opts.propagation.sample_times.push_back(schedule.duration() * k / (n - 1));
  const PropagationResult res = propagate(sys, schedule, psi0, opts.propagation, opts.mode);
  opts.propagation.sample_times.clear();
  const TargetMap map = target_map_for(scheme_of(schedule));
  const Calibration cal = calibrate_phases(sys, schedule.without_noise(), map, opts.propagation, opts.leakage_bound, opts.mode);
  const double fid = fidelity(res.final_state.amplitudes, calibrated_target(cal, psi0));

  Table t;
  t.header = {"t", "Bx", "By", "Bz"};
  for (const auto& l : sys.basis()) t.header.push_back(label_column(l));
  t.header.push_back("outside_qubit");
  double peak = 0.0, peak_t = 0.0;
  for (const auto& s : res.trajectory) {
    const Vector3 b = schedule(s.time);
    std::vector<std::string> row{fmt(s.time), fmt(b.x()), fmt(b.y()), fmt(b.z())};
    for (Eigen::Index k = 0; k < sys.dim(); ++k) row.push_back(fmt(std::norm(s.amplitudes(k))));
    const double out = leakage(sys, s.amplitudes, qubit);
    row.push_back(fmt(out));
    if (out > peak) peak = out, peak_t = s.time;
    t.rows.push_back(std::move(row));
  }
  json pops = json::object();
  for (Eigen::Index k = 0; k < sys.dim(); ++k)
    pops[sys.basis()[static_cast<std::size_t>(k)].str()] = std::norm(res.final_state.amplitudes(k));
  json results = {{"final_populations", pops},
                  {"leakage", leakage(sys, res.final_state.amplitudes, qubit)},
                  {"calibrated_fidelity", fid},
                  {"transient_peak_outside_qubit", peak},
                  {"transient_peak_time", peak_t},
                  {"norm_drift", res.norm_drift},
                  {"step_count", res.step_count},
                  {"dt", res.dt},
                  {"magnus", magnus_json(sys, schedule.without_noise(), psi0, qubit)}};
  RunReport rep;
  rep.files = {write_csv(run, "echo-demo", cfg, t), write_json(run, "echo-demo", cfg, results)};
  rep.summary = results;
  return rep;
}

RunReport run_filter(const json& cfg, const RunOptions& run) {
  const HyperfineSystem sys = system_of(cfg);
  const ComplexVector psi0 = state_of(sys, cfg);
  const json& p = cfg["params"];
  FilterOptions fo;
  fo.b_e = p["B_e"];
  fo.n_phases = p["n_phases"];
  fo.check_linearity = p["check_linearity"];
  fo.check_step_convergence = p["check_step_convergence"];
  fo.analysis = analysis_options(cfg, run.workers);
  const std::vector<double> omega = p["omega_e"];

  Table t;
  t.header = {"f_khz", "omega_e"};
  json curves = json::array();
  std::vector<FilterCurve> results;
  for (const auto& sj : p["schedules"]) {
    const FieldSchedule s = schedule_from_json(sj);
    FilterCurve c = filter_response(sys, s, psi0, omega, fo);
    std::string name = "S_" + to_string(c.scheme);
    for (const auto& h : t.header)
      if (h == name) name += "_" + std::to_string(results.size());
    t.header.push_back(name);
    json cj = {{"column", name},       {"scheme", to_string(c.scheme)}, {"schedule", sj},
               {"baseline", c.baseline}, {"dt", c.dt},                  {"B_e", c.b_e_used},
               {"n_phases", c.n_phases}};
    cj["baseline_dominated"] = c.baseline_dominated;
    if (c.linearity)
      cj["linearity"] = {{"omega_e", c.linearity->omega},
                         {"S_full", c.linearity->s_full},
                         {"S_half", c.linearity->s_half},
                         {"relative_deviation", c.linearity->relative_deviation},
                         {"passed", c.linearity->passed}};
    if (c.step_convergence) cj["step_convergence"] = *c.step_convergence;
    curves.push_back(cj);
    results.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < omega.size(); ++i) {
    std::vector<std::string> row{fmt(units::to_mhz(omega[i]) * 1e3), fmt(omega[i])};
    for (const auto& c : results) row.push_back(fmt(c.s_values[i]));
    t.rows.push_back(std::move(row));
  }
  RunReport rep;
  rep.files = {write_csv(run, "filter", cfg, t), write_json(run, "filter", cfg, {{"curves", curves}})};
  rep.summary = {{"curves", curves}};
  return rep;
}

RunReport run_sweep(const json& cfg, const RunOptions& run) {
  const HyperfineSystem sys = system_of(cfg);
  const ComplexVector psi0 = state_of(sys, cfg);
  const auto qubit = qubit_of(cfg);
  const json& p = cfg["params"];
  const auto factory = scheme_factory(parse_scheme(p["scheme"]), p["tau"], p["t_f"]);
  const std::vector<double> grid_b = p["B_t"];
  const auto points = leakage_sweep(sys, factory, grid_b, psi0, qubit, analysis_options(cfg, run.workers));

  Table t;
  t.header = {"B_t", "leakage", "magnus_estimate", "step_count", "error"};
  json rows = json::array();
  std::optional<double> threshold;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& pt = points[k];
    double est = std::nan("");
    try {
      est = magnus_leakage_estimate(sys, factory(pt.b_t), psi0, qubit);
    } catch (const std::exception&) {
    }
    t.rows.push_back({fmt(pt.b_t), fmt(pt.leakage), fmt(est), std::to_string(pt.step_count), pt.error});
    rows.push_back({{"B_t", pt.b_t}, {"leakage", pt.leakage}, {"magnus_estimate", est}, {"error", pt.error}});
  }
  // Smallest grid value from which every larger B_t stays at or below 1e-4.
  for (std::size_t k = points.size(); k-- > 0;) {
    if (!(points[k].leakage <= 1e-4)) break;
    threshold = points[k].b_t;
  }
  json results = {{"points", rows}, {"b_t_below_1e-4", threshold ? json(*threshold) : json(nullptr)}};
  RunReport rep;
  rep.files = {write_csv(run, "leakage-sweep", cfg, t), write_json(run, "leakage-sweep", cfg, results)};
  rep.summary = results;
  return rep;
}

RunReport run_control(const json& cfg, const RunOptions& run) {
  const HyperfineSystem sys = system_of(cfg);
  const auto qubit = qubit_of(cfg);
  const json& p = cfg["params"];
  const double sens = std::abs(qubit_sensitivity(sys, qubit[0], qubit[1]));
  json entries = json::array();
  for (double t_r : p["t_r"].get<std::vector<double>>()) {
    const ControlError e = control_error_infidelity(p["delta_B"], sens, t_r, p["lambda2"]);
    entries.push_back({{"t_r", t_r}, {"infidelity", e.infidelity}, {"outside_taylor_regime", e.outside_taylor_regime}});
  }
  json results = {{"sensitivity_rad_per_us_per_gauss", sens},
                  {"sensitivity_mhz_per_gauss", units::to_mhz(sens)},
                  {"entries", entries}};
  if (cfg.contains("schedule")) {
    const FieldSchedule s = schedule_from_json(cfg["schedule"]);
    const ErrorBudget b = error_budget(sys, s, state_of(sys, cfg), qubit, p["delta_B"], p["lambda2"],
                                       analysis_options(cfg, run.workers));
    results["budget"] = {{"exposure_time", control_exposure_time(s)},
                         {"leakage", b.leakage},
                         {"control_infidelity", b.control_infidelity},
                         {"ac_zeeman_shift", b.ac_zeeman_shift},
                         {"first_order_leakage_estimate", b.first_order_leakage_estimate}};
  }
  RunReport rep;
  rep.files = {write_json(run, "control-error", cfg, results)};
  rep.summary = results;
  return rep;
}

RunReport run_gate(const json& cfg, const RunOptions& run) {
  const json& p = cfg["params"];
  SpinMotionSystem sys;
  sys.n_spins = p["n_spins"];
  sys.spin = HalfInt::parse(p["spin"].get<std::string>());
  sys.mode_frequency = p["omega_a"];
  sys.detuning = p["delta"];
  sys.coupling = p["coupling"];
  sys.n_max = p["n_max"];
  const HyperfineSystem hs = system_of(cfg);
  sys.zeeman_splitting = units::mu_b * hs.g_j() * p["B_t"].get<double>();
  sys.validate();
  const double t_gate = p["t_gate"];
  const ComplexVector spin0 = plus_spin_state(sys);
  const ComplexVector psi0 = product_state(sys, spin0, 0);
  const int n = p["samples"];

  json frames = json::object();
  std::optional<GateResult> eff, full;
  Table t;
  for (const auto& f : p["frames"]) {
    GateOptions go;
    go.frame = f == "full" ? GateFrame::full_rotating_axis : GateFrame::effective;
    go.check_truncation = p["check_truncation"];
    go.propagation.tol = cfg["tolerances"]["tol"];
    go.propagation.max_steps = cfg["tolerances"]["max_steps"];
    go.propagation.integrator =
        cfg["tolerances"]["integrator"] == "magnus4" ? Integrator::magnus4 : Integrator::midpoint;
    if (go.frame == GateFrame::effective)
      for (int k = 0; k < n; ++k) go.sample_times.push_back(t_gate * k / (n - 1));
    GateResult r = simulate_gate(sys, psi0, t_gate, go);
    json disp = json::array();
    for (std::size_t b = 0; b < r.branches.size(); ++b)
      disp.push_back({{"m", r.branches[b]}, {"re", r.final_displacement[b].real()}, {"im", r.final_displacement[b].imag()}});
    frames[f.get<std::string>()] = {{"bell_fidelity", r.bell_fidelity},
                                    {"residual_spin_motion_entanglement", r.residual_spin_motion_entanglement},
                                    {"geometric_phase", r.geometric_phase},
                                    {"predicted_phase", r.predicted_phase},
                                    {"final_displacement", disp},
                                    {"truncation_delta", r.truncation_delta ? json(*r.truncation_delta) : json(nullptr)},
                                    {"step_count", r.step_count}};
    if (go.frame == GateFrame::effective) {
      t.header = {"t"};
      for (double m : r.branches) t.header.insert(t.header.end(), {"re_alpha_m" + fmt(m), "im_alpha_m" + fmt(m)});
      for (const auto& pt : r.trajectory) {
        std::vector<std::string> row{fmt(pt.t)};
        for (const auto& a : pt.alpha) row.insert(row.end(), {fmt(a.real()), fmt(a.imag())});
        t.rows.push_back(std::move(row));
      }
      eff = std::move(r);
    } else {
      full = std::move(r);
    }
  }
  json results = {{"frames", frames}, {"t_gate", t_gate}};
  if (eff) {
    const ComplexVector oracle = closed_form_state(sys, spin0, t_gate);
    results["closed_form_overlap"] = std::norm(oracle.dot(eff->final_state));
    results["omega_eff_extracted"] = extract_effective_coupling(sys, 0.01 * t_gate);
    results["omega_eff_expected"] = sys.coupling / 2;
  }
  if (eff && full)
    results["frame_overlap"] = std::norm(eff->final_state.dot(to_zeeman_frame(sys, full->final_state, t_gate)));
  RunReport rep;
  if (!t.rows.empty()) rep.files.push_back(write_csv(run, "gate", cfg, t));
  rep.files.push_back(write_json(run, "gate", cfg, results));
  rep.summary = results;
  return rep;
}

RunReport run_sensitivity(const json& cfg, const RunOptions& run) {
  const HyperfineSystem sys = system_of(cfg);
  const auto pair = qubit_of(cfg);
  const json& p = cfg["params"];
  const double s = qubit_sensitivity(sys, pair[0], pair[1], p["B0"],
                                     p["mode"] == "full" ? ZeemanMode::full : ZeemanMode::projected);
  json results = {{"pair", {pair[0].str(), pair[1].str()}},
                  {"sensitivity_rad_per_us_per_gauss", s},
                  {"sensitivity_mhz_per_gauss", units::to_mhz(s)}};
  RunReport rep;
  rep.files = {write_json(run, "sensitivity", cfg, results)};
  rep.summary = results;
  return rep;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  switch (config.kind) {
    case AnalysisKind::echo_demo: return run_echo(config.resolved, options);
    case AnalysisKind::filter: return run_filter(config.resolved, options);
    case AnalysisKind::leakage_sweep: return run_sweep(config.resolved, options);
    case AnalysisKind::control_error: return run_control(config.resolved, options);
    case AnalysisKind::gate: return run_gate(config.resolved, options);
    case AnalysisKind::sensitivity: return run_sensitivity(config.resolved, options);
  }
  throw ConfigError("unknown analysis");
}

json validate_experiment(const std::string& text) {
  json report = {{"valid", false}, {"errors", json::array()}, {"warnings", json::array()}, {"preflight", json::array()}};
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    report["errors"].push_back({{"path", "$"}, {"message", std::string("malformed JSON: ") + e.what()}});
    return report;
  }
  ExperimentConfig cfg;
  try {
    cfg = resolve_experiment(doc, std::nullopt);
  } catch (const ConfigError& e) {
    report["errors"].push_back({{"path", e.path()}, {"message", e.what()}});
    return report;
  } catch (const std::exception& e) {
    report["errors"].push_back({{"path", "$"}, {"message", e.what()}});
    return report;
  }
  report["valid"] = true;
  report["analysis"] = to_string(cfg.kind);
  const json& r = cfg.resolved;

  std::vector<std::pair<std::string, json>> schedules;
  if (r.contains("schedule")) schedules.emplace_back("$.schedule", r["schedule"]);
  if (cfg.kind == AnalysisKind::filter)
    for (std::size_t k = 0; k < r["params"]["schedules"].size(); ++k)
      schedules.emplace_back("$.params.schedules[" + std::to_string(k) + "]", r["params"]["schedules"][k]);
  if (cfg.kind == AnalysisKind::leakage_sweep) {
    const auto& p = r["params"];
    const auto b = p["B_t"].get<std::vector<double>>();
    const auto s = scheme_factory(parse_scheme(p["scheme"]), p["tau"], p["t_f"])(*std::min_element(b.begin(), b.end()));
    schedules.emplace_back("$.params.B_t (smallest)", schedule_to_json(s));
  }
  const HyperfineSystem sys = system_of(r);
  const ComplexVector psi0 = state_of(sys, r);
  const auto qubit = qubit_of(r);
  for (const auto& [path, sj] : schedules) {
    try {
      const FieldSchedule s = schedule_from_json(sj).without_noise();
      const double est = magnus_leakage_estimate(sys, s, psi0, qubit);
      report["preflight"].push_back({{"path", path}, {"predicted_leakage", est}});
      if (est > 1e-3)
        report["warnings"].push_back(
            {{"path", path}, {"message", "diabatic regime: predicted leakage " + fmt(est) + " exceeds 1e-3"}});
    } catch (const std::exception& e) {
      report["warnings"].push_back({{"path", path}, {"message", std::string("pre-flight skipped: ") + e.what()}});
    }
  }
  if (cfg.kind == AnalysisKind::gate) {
    const auto& p = r["params"];
    const double wz = units::mu_b * sys.g_j() * p["B_t"].get<double>();
    if (wz < 5 * p["omega_a"].get<double>())
      report["warnings"].push_back({{"path", "$.params.B_t"},
                                    {"message", "Zeeman splitting is not far above the mode frequency; the "
                                                "effective-frame approximation may not hold"}});
  }
  return report;
}

}  // namespace pdd
