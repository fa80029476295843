#pragma once

// Spin-dependent-force gate driven by rotating the quantization axis near a motional
// sideband in a static gradient. The Hilbert space is spin_1 x ... x spin_n x mode,
// the mode truncated at n_max quanta.

#include <complex>
#include <optional>
#include <vector>

#include "pdd/field_schedule.hpp"
#include "pdd/propagator.hpp"
#include "pdd/spin_algebra.hpp"
#include "pdd/units.hpp"

namespace pdd {

struct SpinMotionSystem {
  int n_spins = 2;
  HalfInt spin = HalfInt::from_twice(1);        ///< per-ion spin; 1/2 for projected qubits
  double mode_frequency = units::mhz(2.0);      ///< omega_a, rad/us
  int n_max = 20;                               ///< highest Fock state kept
  double coupling = units::khz(10.0);           ///< Omega_zz, rad/us
  double detuning = units::khz(10.0);           ///< delta = omega_a - omega_r, rad/us
  double zeeman_splitting = units::mu_b * units::g_electron * 10.0;  ///< mu_B B_t g_J, rad/us
  /// Constant J_z term of the static field; zero drops it (it only adds a calibratable phase).
  double static_shift = 0.0;

  void validate() const;
  double rotation_rate() const { return mode_frequency - detuning; }
  Eigen::Index spin_dim() const;
  Eigen::Index motion_dim() const { return n_max + 1; }
  Eigen::Index dim() const { return spin_dim() * motion_dim(); }
};

enum class GateFrame {
  full_rotating_axis,  ///< Omega (a+ e^{i w_a t} + h.c.)(J_z cos w_r t + J_x sin w_r t) + w_z J_z
  effective            ///< (Omega / 2)(a+ e^{i delta t} + h.c.) J_z
};

/// Field noise b(t) in Gauss along the lab axis the quantization field rotates away from.
/// In the full frame it couples through J_z cos w_r t + J_x sin w_r t; in the effective
/// frame it couples directly to J_z, as for an ion whose axis is not rotated.
struct GateNoise {
  double amplitude = 0.0;  ///< Gauss
  double angular_frequency = 0.0;
  double phase = 0.0;
  double larmor_per_gauss = units::mu_b * units::g_electron;
};

/// Operators on the spin x mode space.
struct GateOperators {
  SpinOperators collective;  ///< J on the spin factor alone
  ComplexMatrix jx, jy, jz;  ///< J embedded in the full space
  ComplexMatrix a;           ///< annihilation operator embedded in the full space
};

GateOperators gate_operators(const SpinMotionSystem& sys);

HamiltonianFn build_gate_hamiltonian(const SpinMotionSystem& sys, GateFrame frame,
                                     const std::optional<GateNoise>& noise = std::nullopt);

/// Full-frame Hamiltonian in the interaction picture of w_z J_z (exact, no RWA):
/// psi_full(t) = exp(-i w_z J_z t) psi(t).
HamiltonianFn build_gate_hamiltonian_zeeman_frame(const SpinMotionSystem& sys,
                                                  const std::optional<GateNoise>& noise = std::nullopt);

/// exp(i w_z J_z t) state: full-frame state expressed in the Zeeman interaction picture.
ComplexVector to_zeeman_frame(const SpinMotionSystem& sys, const ComplexVector& state, double t);

/// Collective J_z eigenvalue of each spin basis state.
std::vector<double> collective_m(const SpinMotionSystem& sys);

/// spin (x) |n>.
ComplexVector product_state(const SpinMotionSystem& sys, const ComplexVector& spin_state, int fock = 0);

/// Every spin in the +x eigenstate of its own J (|+> for spin 1/2).
ComplexVector plus_spin_state(const SpinMotionSystem& sys);

/// Closed-form effective-frame displacement of the branch with collective eigenvalue m:
/// alpha_m(t) = -(Omega m / (2 delta)) (e^{i delta t} - 1).
std::complex<double> closed_form_displacement(const SpinMotionSystem& sys, double m, double t);

/// Closed-form geometric phase per unit m^2: (Omega/2)^2 (delta t - sin delta t) / delta^2.
double closed_form_phase(const SpinMotionSystem& sys, double t);

/// Effective-frame state predicted for spin_state (x) |0>:
/// sum_s c_s e^{i Phi m_s^2} |s> (x) |alpha_{m_s}>.
ComplexVector closed_form_state(const SpinMotionSystem& sys, const ComplexVector& spin_state, double t);

/// Spin-only image of spin_state under the closed-form gate at a closed loop.
ComplexVector closed_form_spin_target(const SpinMotionSystem& sys, const ComplexVector& spin_state, double t);

/// Coupling that gives a differential phase `phase` between adjacent m^2 = 0 and 1
/// branches after one loop: Omega = delta sqrt(2 phase / pi).
double coupling_for_phase(double detuning, double phase);

/// Spin density matrix with the mode traced out.
ComplexMatrix reduced_spin_state(const SpinMotionSystem& sys, const ComplexVector& state);

/// <B| Tr_mode |psi><psi| |B>.
double bell_fidelity(const SpinMotionSystem& sys, const ComplexVector& state, const ComplexVector& target_bell);

/// 1 - Tr rho_spin^2.
double residual_entanglement(const SpinMotionSystem& sys, const ComplexVector& state);

struct PhaseSpacePoint {
  double t = 0.0;
  std::vector<std::complex<double>> alpha;  ///< one entry per branch
};

struct GateOptions {
  GateFrame frame = GateFrame::effective;
  PropagationOptions propagation = [] {
    PropagationOptions p;
    p.action = ExpAction::taylor;
    p.dt_init = 0.05;
    return p;
  }();
  std::optional<ComplexVector> target_bell;  ///< spin-space target; closed form when absent
  bool check_truncation = true;              ///< rerun at n_max + 4
  double truncation_tolerance = 1e-6;
  std::optional<GateNoise> noise;
  std::vector<double> sample_times;  ///< phase-space trajectory samples
};

struct GateResult {
  ComplexVector final_state;  ///< in the chosen frame (full frame: lab rotating-axis frame)
  double bell_fidelity = 0.0;
  double residual_spin_motion_entanglement = 0.0;
  double geometric_phase = 0.0;  ///< measured differential phase, rad
  double predicted_phase = 0.0;  ///< closed-form value of the same quantity
  std::vector<double> branches;  ///< distinct collective m values
  std::vector<std::complex<double>> final_displacement;  ///< per branch
  std::vector<PhaseSpacePoint> trajectory;
  std::optional<double> truncation_delta;  ///< |F(n_max) - F(n_max + 4)|
  std::size_t step_count = 0;
};

/// Throws ConvergenceError when the truncation check exceeds its tolerance.
GateResult simulate_gate(const SpinMotionSystem& sys, const ComplexVector& psi0, double t_gate,
                         const GateOptions& options = {});

/// Mean conditional displacement <a> of each branch, in branch order.
std::vector<std::complex<double>> branch_displacements(const SpinMotionSystem& sys, const ComplexVector& state,
                                                       const std::vector<double>& branches);

/// Omega_eff = |alpha_m(t)| / (|m| t) from a short effective-frame run of the all-up state.
double extract_effective_coupling(const SpinMotionSystem& sys, double t_probe);

}  // namespace pdd
