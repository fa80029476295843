#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "pdd/spin_algebra.hpp"

namespace pdd {

/// One entry of the species data file. Frequencies in rad/us.
struct SpeciesPreset {
  std::string name;
  HalfInt nuclear_spin;
  HalfInt electron_spin;
  double hyperfine_constant;
  double g_j;
  double g_i;

  /// g_I is dropped in projected mode; `keep_nuclear_g` keeps it for full-mode work.
  HyperfineSystem system(bool keep_nuclear_g = true) const;
};

class SpeciesTable {
 public:
  static constexpr int supported_version = 1;

  /// Parses the key-value text format of data/species.txt.
  static SpeciesTable parse(const std::string& text);
  static SpeciesTable load(const std::filesystem::path& path);
  /// The table shipped with the library (PDD_DATA_DIR/species.txt).
  static const SpeciesTable& builtin();

  const SpeciesPreset& get(const std::string& name) const;
  bool contains(const std::string& name) const { return presets_.count(name) != 0; }
  const std::map<std::string, SpeciesPreset>& presets() const { return presets_; }

 private:
  std::map<std::string, SpeciesPreset> presets_;
};

std::filesystem::path default_data_dir();

}  // namespace pdd
