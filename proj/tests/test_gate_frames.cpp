// Full rotating-axis frame against the effective sideband Hamiltonian. These runs resolve
// the MHz-scale terms and take longer than the rest of the suite.

#include "doctest.h"

#include "pdd/gate_sim.hpp"

using namespace pdd;
using units::pi;

namespace {

SpinMotionSystem fast_gate(double b_t) {
  SpinMotionSystem s;
  s.detuning = units::khz(50);
  s.coupling = coupling_for_phase(s.detuning, pi / 2);
  s.n_max = 10;
  s.zeeman_splitting = units::mu_b * units::g_electron * b_t;
  return s;
}

GateResult run(const SpinMotionSystem& s, GateFrame frame, std::optional<GateNoise> noise = std::nullopt) {
  GateOptions o;
  o.frame = frame;
  o.check_truncation = false;
  o.noise = noise;
  return simulate_gate(s, product_state(s, plus_spin_state(s)), 2 * pi / std::abs(s.detuning), o);
}

double frame_discrepancy(const SpinMotionSystem& s) {
  const double t = 2 * pi / std::abs(s.detuning);
  const auto eff = run(s, GateFrame::effective), full = run(s, GateFrame::full_rotating_axis);
  return 1 - std::norm(eff.final_state.dot(to_zeeman_frame(s, full.final_state, t)));
}

}  // namespace

TEST_CASE("full-frame discrepancy shrinks as the Zeeman splitting grows") {
  const double d1 = frame_discrepancy(fast_gate(1.0));
  const double d3 = frame_discrepancy(fast_gate(3.0));
  const double d10 = frame_discrepancy(fast_gate(10.0));
  MESSAGE("1 - overlap at 1, 3, 10 G: " << d1 << ", " << d3 << ", " << d10);
  CHECK(d1 > d3);
  CHECK(d3 > d10);
  CHECK(d10 < 1e-3);
}

TEST_CASE("rotating the axis protects the gate from slow field noise") {
  const auto s = fast_gate(10.0);
  const GateNoise slow{1e-3, units::khz(1), 0.0, units::mu_b * units::g_electron};
  const double eff_drop = run(s, GateFrame::effective).bell_fidelity - run(s, GateFrame::effective, slow).bell_fidelity;
  const double full_drop =
      run(s, GateFrame::full_rotating_axis).bell_fidelity - run(s, GateFrame::full_rotating_axis, slow).bell_fidelity;
  MESSAGE("fidelity loss, static axis: " << eff_drop << ", rotating axis: " << full_drop);
  CHECK(eff_drop > 1e-2);
  CHECK(std::abs(full_drop) < 1e-2 * eff_drop);
}
