#pragma once

// Unit system used throughout the library:
//   time               microseconds (us)
//   angular frequency  rad/us  (so that hbar = 1 and H carries rad/us)
//   magnetic field     Gauss
//   angles             radians
//
// A Hamiltonian matrix H therefore generates evolution exp(-i H t) with t in us.

#include <numbers>

namespace pdd::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Bohr magneton over Planck's constant, MHz/Gauss (CODATA).
inline constexpr double mu_b_over_h_mhz_per_gauss = 1.399624604;

/// Bohr magneton over hbar in rad/(us Gauss).
inline constexpr double mu_b = two_pi * mu_b_over_h_mhz_per_gauss;

/// Free-electron g-factor used when a preset does not override it.
inline constexpr double g_electron = 2.0023193;

/// 2 pi x (frequency in MHz) -> rad/us.
constexpr double mhz(double f) { return two_pi * f; }
constexpr double khz(double f) { return two_pi * f * 1e-3; }

/// rad/us -> MHz.
constexpr double to_mhz(double omega) { return omega / two_pi; }

}  // namespace pdd::units
