// pddsim: command-line front end for the experiment runners.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "pdd/errors.hpp"
#include "pdd/experiment.hpp"

namespace {

using nlohmann::json;

constexpr int exit_config = 2;
constexpr int exit_numerics = 3;

void report_error(const std::string& kind, const std::string& message, const std::string& path = "") {
  json e = {{"error", kind}, {"message", message}};
  if (!path.empty()) e["path"] = path;
  std::cerr << e.dump() << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw pdd::ConfigError("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct Common {
  std::string config;
  std::string out = ".";
  unsigned workers = 0;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--workers", c.workers, "worker threads (0 = hardware concurrency)");
  sub->add_option("--seed", c.seed, "accepted for reproducibility records; runs are deterministic");
}

int run(pdd::AnalysisKind kind, const Common& c, pdd::RunOptions opts) {
  opts.out_dir = c.out;
  opts.workers = c.workers;
  opts.seed = c.seed;
  const json doc = c.config.empty() ? json::object() : json::parse(read_file(c.config));
  const auto cfg = pdd::resolve_experiment(doc, kind, opts);
  const auto report = pdd::run_experiment(cfg, opts);
  json out = {{"analysis", pdd::to_string(kind)}, {"files", json::array()}, {"summary", report.summary}};
  for (const auto& f : report.files) out["files"].push_back(f.string());
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Field-rotation dynamical decoupling simulator"};
  app.set_version_flag("--version", pdd::tool_version());
  app.require_subcommand(1);

  struct Entry {
    pdd::AnalysisKind kind;
    const char* help;
    CLI::App* sub = nullptr;
    Common common;
  };
  std::vector<Entry> entries{
      {pdd::AnalysisKind::echo_demo, "single pulsed echo with population trajectory"},
      {pdd::AnalysisKind::filter, "noise filter response of one or more schedules"},
      {pdd::AnalysisKind::leakage_sweep, "final leakage versus field magnitude"},
      {pdd::AnalysisKind::control_error, "infidelity from field magnitude errors"},
      {pdd::AnalysisKind::gate, "spin-motion gate from a rotating quantization axis"},
      {pdd::AnalysisKind::sensitivity, "differential field sensitivity of a level pair"}};
  for (auto& e : entries) {
    e.sub = app.add_subcommand(pdd::to_string(e.kind), e.help);
    add_common(e.sub, e.common);
  }
  std::string scheme;
  entries[2].sub->add_option("--scheme", scheme, "pulsed or continuous")->check(CLI::IsMember({"pulsed", "continuous"}));
  std::vector<std::string> pair;
  entries[5].sub->add_option("--pair", pair, "two labels as F,m")->expected(2);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("--config", validate_path, "experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (validate->parsed()) {
      const json report = pdd::validate_experiment(read_file(validate_path));
      std::cout << report.dump(2) << "\n";
      return report["valid"].get<bool>() ? 0 : exit_config;
    }
    for (const auto& e : entries) {
      if (!e.sub->parsed()) continue;
      pdd::RunOptions opts;
      if (!scheme.empty()) opts.scheme = scheme;
      if (!pair.empty()) opts.pair = std::vector<pdd::HyperfineLabel>{pdd::parse_label(pair[0]), pdd::parse_label(pair[1])};
      return run(e.kind, e.common, opts);
    }
  } catch (const pdd::ConfigError& e) {
    report_error("config", e.what(), e.path());
    return exit_config;
  } catch (const json::exception& e) {
    report_error("config", std::string("malformed JSON: ") + e.what());
    return exit_config;
  } catch (const pdd::ConvergenceError& e) {
    report_error("convergence", e.what());
    return exit_numerics;
  } catch (const pdd::CalibrationError& e) {
    report_error("calibration", e.what());
    return exit_numerics;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return 1;
  }
  return 1;
}
