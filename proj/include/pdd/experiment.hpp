#pragma once

// Experiment configs (JSON, schema 1) and the runners behind the pddsim subcommands.
//
//   {"schema": 1, "analysis": "leakage-sweep", "species": "ba137",
//    "schedule": {...}, "initial_state": [[1, -1, 0.577], [1, 1, 0.816]],
//    "tolerances": {"dt_init": 0.01, "tol": 1e-10}, "params": {...}}
//
// Every key is optional except where an analysis needs it; resolution fills defaults
// and the resolved document is embedded in every output file.

#include "json.hpp"
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pdd/pdd_analysis.hpp"
#include "pdd/species.hpp"

namespace pdd {

inline constexpr int experiment_schema_version = 1;

enum class AnalysisKind { echo_demo, filter, leakage_sweep, control_error, gate, sensitivity };

std::string to_string(AnalysisKind k);
AnalysisKind parse_analysis(const std::string& s);

/// Version string embedded in outputs.
std::string tool_version();

struct RunOptions {
  std::filesystem::path out_dir = ".";
  unsigned workers = 0;
  std::uint64_t seed = 0;  ///< reserved; every algorithm is deterministic
  std::optional<std::string> scheme;                      ///< leakage-sweep override
  std::optional<std::vector<HyperfineLabel>> pair;        ///< sensitivity override
};

/// Validated config with every default filled in.
struct ExperimentConfig {
  AnalysisKind kind = AnalysisKind::echo_demo;
  nlohmann::json resolved;
};

/// Throws ConfigError (with a JSON path) on schema violations. `kind` is used when the
/// document has no "analysis" key and must match it otherwise.
ExperimentConfig resolve_experiment(const nlohmann::json& doc, std::optional<AnalysisKind> kind,
                                    const RunOptions& options = {});

struct RunReport {
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

/// Runs the analysis and writes `<analysis>.csv` and/or `<analysis>.json` to out_dir.
RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// Schema check plus adiabaticity pre-flight. Never throws for bad input; the report
/// lists errors and warnings.
nlohmann::json validate_experiment(const std::string& text);

/// "F,m" -> label, e.g. "1,-1" or "3/2,1/2".
HyperfineLabel parse_label(const std::string& text);

}  // namespace pdd
