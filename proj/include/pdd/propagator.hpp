#pragma once

// Time-ordered propagation of i d(psi)/dt = H(t) psi with H in rad/us.
//
// Each step applies exp(-i h H(t + h/2)) (exponential midpoint, second order) computed
// from a Hermitian eigendecomposition, so every step is unitary to roundoff. The step
// is refined by halving until the dt and dt/2 results agree to `tol`.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pdd/field_schedule.hpp"
#include "pdd/spin_algebra.hpp"

namespace pdd {

enum class Integrator {
  midpoint,  ///< exponential midpoint, order 2
  magnus4    ///< two-exponential commutator-free Magnus, order 4
};

/// How each step exponential is applied to the state.
enum class ExpAction {
  eigen,  ///< dense exp(-i h H) from a Hermitian eigendecomposition
  taylor  ///< truncated Taylor series of the action on the state columns (large, sparse-ish H)
};

struct PropagationOptions {
  double dt_init = 0.01;  ///< us
  /// Accept when max over columns of 1 - |<psi_dt | psi_dt/2>| falls below this.
  double tol = 1e-10;
  std::size_t max_steps = std::size_t{1} << 23;
  Integrator integrator = Integrator::midpoint;
  ExpAction action = ExpAction::eigen;
  /// Disables refinement and integrates with exactly this step size.
  std::optional<double> fixed_dt;
  /// Times at which the trajectory is recorded; independent of the step grid.
  std::vector<double> sample_times;
  /// Projected mode only: restrict to these F blocks (empty means every block).
  std::vector<HalfInt> blocks;
};

using HamiltonianFn = std::function<ComplexMatrix(double)>;

/// A time interval over which H(t) is smooth; `constant` intervals take one exact step.
struct Interval {
  double t_start;
  double t_end;
  bool constant = false;
};

struct QuantumState {
  ComplexVector amplitudes;
  double time = 0.0;
};

struct PropagationResult {
  QuantumState final_state;
  std::vector<QuantumState> trajectory;  ///< one entry per requested sample time
  double norm_drift = 0.0;
  std::size_t step_count = 0;
  double dt = 0.0;                 ///< accepted step size
  double convergence_error = 0.0;  ///< last dt vs dt/2 disagreement
};

struct UnitaryResult {
  ComplexMatrix unitary;
  std::vector<bool> computed;  ///< columns actually propagated (projected block filter)
  std::size_t step_count = 0;
  double dt = 0.0;
  double convergence_error = 0.0;
};

/// Evolution of the columns of `psi` over consecutive intervals with a fixed step size.
struct FixedEvolution {
  ComplexMatrix psi;
  std::vector<ComplexMatrix> samples;
  std::size_t steps = 0;
};

FixedEvolution evolve_fixed(const HamiltonianFn& h, const ComplexMatrix& psi0, std::span<const Interval> intervals,
                            double dt, Integrator integrator, std::span<const double> sample_times = {},
                            ExpAction action = ExpAction::eigen);

/// exp(-i t H) psi by a scaled Taylor series; accurate to roundoff for any ||t H||.
ComplexMatrix taylor_action(const ComplexMatrix& h, double t, const ComplexMatrix& psi);

/// Adaptive driver: halves dt until successive results agree to options.tol.
/// Throws ConvergenceError when the step budget is exhausted.
struct AdaptiveEvolution {
  FixedEvolution result;
  double dt = 0.0;
  double error = 0.0;
};

AdaptiveEvolution evolve_adaptive(const HamiltonianFn& h, const ComplexMatrix& psi0,
                                  std::span<const Interval> intervals, const PropagationOptions& options);

/// 1 - Re(e^{-i chi} <a|b>) maximized over normalized columns, with chi the phase of the
/// summed column overlaps. One column reduces to 1 - |<a|b>|; several columns also see
/// relative phase errors.
double overlap_defect(const ComplexMatrix& a, const ComplexMatrix& b);

/// Intervals of a schedule's segments; hold segments are constant when noise-free.
std::vector<Interval> schedule_intervals(const FieldSchedule& schedule);

/// Full-basis Hamiltonian sampler for a schedule.
HamiltonianFn zeeman_sampler(const HyperfineSystem& sys, const FieldSchedule& schedule, ZeemanMode mode);

PropagationResult propagate(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                            const PropagationOptions& options = {}, ZeemanMode mode = ZeemanMode::projected);

UnitaryResult propagate_unitary(const HyperfineSystem& sys, const FieldSchedule& schedule,
                                const PropagationOptions& options = {}, ZeemanMode mode = ZeemanMode::projected);

/// How a noise-free reference is expected to permute the basis.
enum class TargetMap {
  identity,  ///< |F, m> -> |F, m>
  reverse_m  ///< |F, m> -> |F, -m>
};

std::vector<Eigen::Index> target_permutation(const HyperfineSystem& sys, TargetMap map);

/// Per-destination phases of a reference propagator: phases(d) = arg U(d, s) with d the
/// image of s. Downstream fidelities divide these out.
struct Calibration {
  TargetMap map = TargetMap::identity;
  std::vector<Eigen::Index> destination;
  Eigen::VectorXd phases;
  std::vector<bool> valid;  ///< columns that were calibrated
  double off_structure_weight = 0.0;
};

Calibration calibrate_from_unitary(const UnitaryResult& reference, std::vector<Eigen::Index> destination,
                                   TargetMap map, double leakage_bound);

/// Throws CalibrationError when the reference moves more than `leakage_bound` of any
/// calibrated column off the expected permutation.
Calibration calibrate_phases(const HyperfineSystem& sys, const FieldSchedule& reference, TargetMap map,
                             const PropagationOptions& options = {}, double leakage_bound = 1e-2,
                             ZeemanMode mode = ZeemanMode::projected);

/// Ideal image of psi0 under the calibrated reference: sum_s psi0(s) e^{i phase(d)} |d>.
ComplexVector calibrated_target(const Calibration& calibration, const ComplexVector& psi0);

/// |<T|psi>|^2 / (<T|T><psi|psi>) with T(d) = target(d) e^{i phases(d)}. Normalizing keeps
/// integrator norm drift out of small infidelities.
double fidelity(const ComplexVector& state, const ComplexVector& target, const Eigen::VectorXd& phases);
double fidelity(const ComplexVector& state, const ComplexVector& target);

/// Weight of psi outside `subspace`, relative to |psi|^2.
double leakage(const ComplexVector& state, std::span<const Eigen::Index> subspace);
double leakage(const HyperfineSystem& sys, const ComplexVector& state, std::span<const HyperfineLabel> subspace);
/// Subspace-averaged leakage of a propagator: 1 - (1/|S|) sum_{s, s' in S} |U(s', s)|^2.
double leakage(const ComplexMatrix& unitary, std::span<const Eigen::Index> subspace);

/// State vector from (label, amplitude) pairs; normalizes and rejects zero vectors.
ComplexVector make_state(const HyperfineSystem& sys,
                         std::span<const std::pair<HyperfineLabel, std::complex<double>>> amplitudes);

}  // namespace pdd
