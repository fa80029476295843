#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pdd/experiment.hpp"

using namespace pdd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pddsim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int exit_code(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(PDDSIM_PATH) + " " + args + " > " + (out / "stdout.txt").string() + " 2> " +
                          (out / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const fs::path configs = PDD_CONFIG_DIR;

}  // namespace

TEST_CASE("analysis names round trip") {
  for (auto k : {AnalysisKind::echo_demo, AnalysisKind::filter, AnalysisKind::leakage_sweep,
                 AnalysisKind::control_error, AnalysisKind::gate, AnalysisKind::sensitivity})
    CHECK(parse_analysis(to_string(k)) == k);
  CHECK_THROWS_AS(parse_analysis("ramsey"), ConfigError);
}

TEST_CASE("labels parse from F,m text") {
  CHECK(parse_label("1,-1") == HyperfineLabel{1, -1});
  CHECK(parse_label("3/2,1/2") == HyperfineLabel{HalfInt::from_twice(3), half});
  CHECK_THROWS_AS(parse_label("1"), ConfigError);
  CHECK_THROWS_AS(parse_label("x,1"), ConfigError);
}

TEST_CASE("resolution fills defaults") {
  const auto cfg = resolve_experiment(json::object(), AnalysisKind::echo_demo);
  const auto& r = cfg.resolved;
  CHECK(r["species"] == "ba137");
  CHECK(r["schedule"]["kind"] == "pulsed");
  CHECK(r["schedule"]["B_t"] == 10.0);
  CHECK(r["qubit"] == json::parse("[[1.0, -1.0], [1.0, 1.0]]"));
  CHECK(r["initial_state"].size() == 2);
  CHECK(r["params"]["samples"] == 401);
}

TEST_CASE("resolution errors carry a JSON path") {
  auto path_of = [](const json& doc) {
    try {
      resolve_experiment(doc, std::nullopt);
    } catch (const ConfigError& e) {
      return e.path();
    }
    return std::string("<none>");
  };
  CHECK(path_of(json::parse(R"({"analysis":"echo-demo","species":"xx"})")) == "$.species");
  CHECK(path_of(json::parse(R"({"analysis":"echo-demo","params":{"samples":"many"}})")) == "$.params.samples");
  CHECK(path_of(json::parse(R"({"analysis":"echo-demo","schedule":{"kind":"pulsed","tau":2,"t_center":1,"t_f":4}})"))
            .rfind("$.schedule", 0) == 0);
  CHECK(path_of(json::parse(R"({"analysis":"echo-demo","initial_state":[[1,5,1]]})")).rfind("$.initial_state", 0) == 0);
  CHECK(path_of(json::parse(R"({"analysis":"echo-demo","colour":"red"})")) == "$");
  CHECK(path_of(json::parse(R"({"species":"ba137"})")) == "$");
  CHECK_THROWS_AS(resolve_experiment(json::parse(R"({"analysis":"gate"})"), AnalysisKind::filter), ConfigError);
}

TEST_CASE("validate: shipped configs pass, fast rotations warn, bad JSON is an error") {
  for (const auto& entry : fs::directory_iterator(configs)) {
    CAPTURE(entry.path().string());
    const json rep = validate_experiment(slurp(entry.path()));
    CHECK(rep["valid"] == true);
  }
  const json echo = validate_experiment(slurp(configs / "echo.json"));
  REQUIRE(echo["preflight"].size() == 1);
  CHECK(echo["preflight"][0]["predicted_leakage"].get<double>() < 1e-6);
  CHECK(echo["warnings"].empty());

  const json fast = validate_experiment(slurp(configs / "diabatic_warning.json"));
  REQUIRE(fast["warnings"].size() == 1);
  CHECK(fast["warnings"][0]["message"].get<std::string>().find("diabatic") != std::string::npos);

  const json broken = validate_experiment("{\"analysis\": ");
  CHECK(broken["valid"] == false);
  CHECK(broken["errors"][0]["path"] == "$");
  const json wrong = validate_experiment(R"({"analysis":"filter","params":{"B_e":"x"}})");
  CHECK(wrong["valid"] == false);
  CHECK(wrong["errors"][0]["path"] == "$.params.B_e");
}

TEST_CASE("echo-demo writes CSV and JSON with provenance") {
  const fs::path out = scratch("echo");
  RunOptions opts;
  opts.out_dir = out;
  const auto report = run_experiment(resolve_experiment(json::parse(slurp(configs / "echo.json")), std::nullopt),
                                     opts);
  REQUIRE(report.files.size() == 2);
  std::ifstream csv(out / "echo-demo.csv");
  std::string l1, l2, header;
  std::getline(csv, l1);
  std::getline(csv, l2);
  std::getline(csv, header);
  CHECK(l1.rfind("# pddsim ", 0) == 0);
  CHECK(l2.rfind("# config {", 0) == 0);
  CHECK(header.rfind("t,Bx,By,Bz,", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 401);
  const json j = json::parse(slurp(out / "echo-demo.json"));
  CHECK(j["version"] == tool_version());
  CHECK(j["results"]["leakage"].get<double>() < 1e-5);
  CHECK(j["results"]["final_populations"]["|1,-1>"].get<double>() == doctest::Approx(2.0 / 3).epsilon(1e-5));
}

TEST_CASE("pddsim exit codes and outputs") {
  const fs::path out = scratch("cli");
  CHECK(exit_code("sensitivity --pair 1,-1 1,1 --out " + out.string(), out) == 0);
  const json s = json::parse(slurp(out / "sensitivity.json"));
  CHECK(s["results"]["sensitivity_mhz_per_gauss"].get<double>() == doctest::Approx(1.4).epsilon(0.01));

  CHECK(exit_code("validate --config " + (configs / "echo.json").string(), out) == 0);

  std::ofstream(out / "bad.json") << R"({"analysis":"echo-demo","schedule":{"kind":"pulsed","B_t":1}})";
  CHECK(exit_code("echo-demo --config " + (out / "bad.json").string() + " --out " + out.string(), out) == 2);
  const json err = json::parse(slurp(out / "stderr.txt"));
  CHECK(err["error"] == "config");
  CHECK(err["path"].get<std::string>().rfind("$.schedule", 0) == 0);

  std::ofstream(out / "broken.json") << "{";
  CHECK(exit_code("echo-demo --config " + (out / "broken.json").string(), out) == 2);
  CHECK(exit_code("validate --config " + (out / "broken.json").string(), out) == 2);

  std::ofstream(out / "tight.json") << R"({"analysis":"echo-demo","tolerances":{"tol":1e-16,"max_steps":100}})";
  CHECK(exit_code("echo-demo --config " + (out / "tight.json").string() + " --out " + out.string(), out) == 3);

  CHECK(exit_code("sensitivity --pair 1,1 1,1 --out " + out.string(), out) == 2);
  CHECK(exit_code("no-such-command", out) != 0);
  CHECK(exit_code("leakage-sweep --scheme sideways", out) != 0);
}
