#pragma once

// Noise-response, leakage and error-budget analyses built on the propagator.

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdd/field_schedule.hpp"
#include "pdd/propagator.hpp"
#include "pdd/spin_algebra.hpp"

namespace pdd {

enum class SchemeTag { none, pulsed, continuous };

std::string to_string(SchemeTag s);
SchemeTag parse_scheme(const std::string& s);

/// Scheme implied by the schedule's descriptor; custom schedules count as `none`.
SchemeTag scheme_of(const FieldSchedule& schedule);

/// Pulsed references reverse m; everything else is expected to return home.
TargetMap target_map_for(SchemeTag scheme);

/// F blocks on which `psi` has nonzero weight.
std::vector<HalfInt> support_blocks(const HyperfineSystem& sys, const ComplexVector& psi);

struct AnalysisOptions {
  PropagationOptions propagation;
  double leakage_bound = 1e-2;  ///< calibration off-structure limit
  ZeemanMode mode = ZeemanMode::projected;
  unsigned workers = 0;  ///< 0 selects the hardware concurrency
};

/// 1 - |<T|psi(t_f)>|^2 for `schedule` plus `tone`, with T the calibrated image of psi0.
double memory_infidelity(const HyperfineSystem& sys, const FieldSchedule& schedule, const NoiseTone& tone,
                         const ComplexVector& psi0, const AnalysisOptions& options = {});

/// Same with a calibration computed by the caller.
double memory_infidelity(const HyperfineSystem& sys, const FieldSchedule& schedule, const NoiseTone& tone,
                         const ComplexVector& psi0, const Calibration& calibration,
                         const AnalysisOptions& options = {});

struct FilterOptions {
  double b_e = 1e-4;  ///< Gauss
  int n_phases = 8;
  Vector3 polarization = Vector3::UnitZ();
  /// Repeat the largest point at b_e / 2 and require agreement within this fraction.
  double linearity_tolerance = 0.05;
  bool check_linearity = true;
  /// Compare the highest-frequency point against a run at half the step size.
  bool check_step_convergence = true;
  AnalysisOptions analysis;
};

struct LinearityCheck {
  double omega = 0.0;
  double s_full = 0.0;
  double s_half = 0.0;
  double relative_deviation = 0.0;
  bool passed = false;
};

struct FilterCurve {
  std::vector<double> omega;     ///< rad/us
  std::vector<double> s_values;  ///< infidelity per Gauss^2
  double b_e_used = 0.0;
  int n_phases = 0;
  SchemeTag scheme = SchemeTag::none;
  double baseline = 0.0;  ///< B_e = 0 infidelity that was subtracted
  /// Points whose phase-averaged infidelity did not exceed the baseline.
  std::vector<bool> baseline_dominated;
  std::optional<LinearityCheck> linearity;
  double dt = 0.0;  ///< fixed step used for every point
  /// |S(dt) - S(dt/2)| / S(dt/2) at the highest frequency, when checked.
  std::optional<double> step_convergence;
};

/// Weak-tone filter response S(omega_e): phase-averaged memory infidelity minus the
/// noise-free baseline, divided by B_e^2. Every run shares one fixed step size taken
/// from an adaptive run at the highest frequency, so discretization errors cancel in
/// the subtraction.
FilterCurve filter_response(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                            const std::vector<double>& omega_grid, const FilterOptions& options = {});

struct SweepPoint {
  double b_t = 0.0;
  double leakage = 0.0;
  std::size_t step_count = 0;
  std::string error;  ///< empty on success
};

using ScheduleFactory = std::function<FieldSchedule(double b_t)>;

/// Noise-free propagation per B_t; leakage out of `subspace` at t_f.
std::vector<SweepPoint> leakage_sweep(const HyperfineSystem& sys, const ScheduleFactory& factory,
                                      const std::vector<double>& b_t_grid, const ComplexVector& psi0,
                                      const std::vector<HyperfineLabel>& subspace,
                                      const AnalysisOptions& options = {});

/// Pulsed: rotation over `tau` centered at t_f / 2. Continuous: omega_r = 2 pi / tau.
ScheduleFactory scheme_factory(SchemeTag scheme, double tau, double t_f);

struct MagnusEstimate {
  /// a_y + i a_x with a_y = int phi_dot cos(eps), a_x = int phi_dot sin(eps).
  std::complex<double> first_order;
  /// Same integrals with eps advanced at the dressed rate sign(w) sqrt(w^2 + phi_dot^2).
  std::complex<double> dressed_first_order;
  /// theta_z = -(1/2) int int_{t'' < t'} phi_dot' phi_dot'' sin(eps'' - eps').
  double jz_shift = 0.0;
  double epsilon_total = 0.0;  ///< eps(t_f)
  double phi_total = 0.0;      ///< frame angle at t_f
};

/// Magnus terms of the diabatic coupling in the frame that follows the field axis.
///
/// The frame angle is continuous; on-axis reversals keep it fixed and make the
/// signed field along the frame axis negative, so eps may decrease. `phase_step`
/// bounds the Zeeman phase advanced per quadrature step.
MagnusEstimate magnus_diabatic_estimate(const FieldSchedule& schedule,
                                        double splitting_per_gauss = units::mu_b * units::g_electron,
                                        double phase_step = 0.02);

/// First-order leakage || (1 - P) A psi0 ||^2 with A = a_x F_x + a_y F_y evaluated per F block
/// (eps scaled by that block's signed Larmor rate) and P the projector onto `subspace`.
/// Uses the dressed first-order integrals.
double magnus_leakage_estimate(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                               const std::vector<HyperfineLabel>& subspace, double phase_step = 0.02);

/// Block propagator predicted from the Magnus diagonal terms:
/// exp(-i phi_f F_y) exp(-i (eps_F + jz) F_z), with jz omitted when `with_jz_shift` is false.
ComplexMatrix magnus_block_propagator(const HyperfineSystem& sys, const FieldSchedule& schedule, HalfInt F,
                                      bool with_jz_shift, double phase_step = 0.02);

struct ControlError {
  double infidelity = 0.0;
  bool outside_taylor_regime = false;  ///< infidelity > 0.1
};

/// (dB * sensitivity * t_r)^2 * lambda2.
ControlError control_error_infidelity(double delta_b, double sensitivity, double t_r, double lambda2 = 1.0 / 3.0);

/// Time the control field is applied: rotation window plus return leg for pulsed
/// schedules, t_f for continuous ones, zero for static.
double control_exposure_time(const FieldSchedule& schedule);

/// d(E_a - E_b)/dB at b0 along z by central difference, rad/(us G). In full mode each
/// label is tracked through the eigenvector of largest overlap.
double qubit_sensitivity(const HyperfineSystem& sys, const HyperfineLabel& a, const HyperfineLabel& b,
                         double b0 = 1.0, ZeemanMode mode = ZeemanMode::projected);

struct ErrorBudget {
  double leakage = 0.0;
  double control_infidelity = 0.0;
  double ac_zeeman_shift = 0.0;  ///< rad, Magnus jz term for the qubit block
  double first_order_leakage_estimate = 0.0;
};

ErrorBudget error_budget(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                         const std::vector<HyperfineLabel>& qubit, double delta_b, double lambda2 = 1.0 / 3.0,
                         const AnalysisOptions& options = {});

}  // namespace pdd
