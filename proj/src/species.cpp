#include "pdd/species.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pdd/units.hpp"

namespace pdd {

HyperfineSystem SpeciesPreset::system(bool keep_nuclear_g) const {
  return HyperfineSystem(nuclear_spin, electron_spin, hyperfine_constant, g_j, keep_nuclear_g ? g_i : 0.0);
}

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x))
    throw ConfigError("expected a number, got '" + v + "'", where);
  return x;
}

}  // namespace

SpeciesTable SpeciesTable::parse(const std::string& text) {
  SpeciesTable table;
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::istringstream in(text);
  std::string line, current;
  int version = -1, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", where);
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty() || sections.count(current)) throw ConfigError("empty or duplicate section", where);
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value", where);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (current.empty()) {
      if (key != "format_version") throw ConfigError("unknown top-level key '" + key + "'", where);
      version = static_cast<int>(parse_number(value, where));
      continue;
    }
    sections[current][key] = value;
  }
  if (version != supported_version)
    throw ConfigError("unsupported species file version " + std::to_string(version));

  for (auto& [name, kv] : sections) {
    auto take = [&](const char* key) {
      auto it = kv.find(key);
      if (it == kv.end()) throw ConfigError(std::string("missing key '") + key + "'", name);
      std::string v = it->second;
      kv.erase(it);
      return v;
    };
    SpeciesPreset p;
    p.name = name;
    p.nuclear_spin = HalfInt::parse(take("I"));
    p.electron_spin = HalfInt::parse(take("J"));
    p.hyperfine_constant = units::mhz(parse_number(take("A_2pi_MHz"), name));
    p.g_j = parse_number(take("g_J"), name);
    p.g_i = parse_number(take("g_I"), name);
    if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'", name);
    table.presets_.emplace(name, std::move(p));
  }
  return table;
}

SpeciesTable SpeciesTable::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open species file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::filesystem::path default_data_dir() { return PDD_DATA_DIR; }

const SpeciesTable& SpeciesTable::builtin() {
  static const SpeciesTable table = load(default_data_dir() / "species.txt");
  return table;
}

const SpeciesPreset& SpeciesTable::get(const std::string& name) const {
  auto it = presets_.find(name);
  if (it == presets_.end()) throw ConfigError("unknown species preset '" + name + "'");
  return it->second;
}

}  // namespace pdd
