#include "doctest.h"

#include "pdd/gate_sim.hpp"

using namespace pdd;
using units::pi;

namespace {

double loop_time(const SpinMotionSystem& s) { return 2 * pi / std::abs(s.detuning); }

// (|00> + e^{i p} |11>) / sqrt(2) style targets are produced by the closed form; this one
// is written out by hand for the pi/2 gate on |++>: amplitudes e^{i Phi m^2} / 2.
ComplexVector hand_target(double phase) {
  ComplexVector t(4);
  t << std::polar(0.5, phase), 0.5, 0.5, std::polar(0.5, phase);
  return t;
}

}  // namespace

TEST_CASE("spin-motion dimensions and validation") {
  SpinMotionSystem s;
  CHECK(s.spin_dim() == 4);
  CHECK(s.dim() == 4 * 21);
  s.spin = HalfInt(1);
  s.n_spins = 3;
  CHECK(s.spin_dim() == 27);
  s.n_max = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  const auto m = collective_m(SpinMotionSystem{});
  CHECK(m == std::vector<double>{1.0, 0.0, 0.0, -1.0});
}

TEST_CASE("closed-form helpers") {
  SpinMotionSystem s;
  CHECK(coupling_for_phase(s.detuning, pi / 2) == doctest::Approx(std::abs(s.detuning)));
  CHECK(closed_form_phase(s, loop_time(s)) == doctest::Approx(pi / 2));
  CHECK(std::abs(closed_form_displacement(s, 1.0, loop_time(s))) < 1e-12);
  const double t = 0.3 * loop_time(s);
  const auto a = closed_form_displacement(s, -1.0, t);
  CHECK(std::abs(a - s.coupling / (2 * s.detuning) * (std::polar(1.0, s.detuning * t) - 1.0)) < 1e-12);
}

TEST_CASE("Bell fidelity of simple states") {
  SpinMotionSystem s;
  ComplexVector bell = ComplexVector::Zero(4);
  bell(0) = bell(3) = 1 / std::sqrt(2.0);
  CHECK(bell_fidelity(s, product_state(s, bell), bell) == doctest::Approx(1.0));
  ComplexVector up = ComplexVector::Zero(4);
  up(0) = 1;
  CHECK(bell_fidelity(s, product_state(s, up), bell) == doctest::Approx(0.5));
  CHECK(residual_entanglement(s, product_state(s, bell)) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK_THROWS_AS(bell_fidelity(s, product_state(s, up), ComplexVector::Ones(3)), ConfigError);
}

TEST_CASE("no coupling means free evolution") {
  SpinMotionSystem s;
  s.coupling = 0.0;
  GateOptions o;
  o.check_truncation = false;
  o.sample_times = {0.25 * loop_time(s), 0.5 * loop_time(s)};
  const auto psi0 = product_state(s, plus_spin_state(s));
  const auto r = simulate_gate(s, psi0, loop_time(s), o);
  CHECK((r.final_state - psi0).norm() < 1e-12);
  for (const auto& p : r.trajectory)
    for (auto a : p.alpha) CHECK(std::abs(a) < 1e-12);
}

TEST_CASE("J_z eigenstates are displaced without spin change") {
  SpinMotionSystem s;
  const double t = 0.3 * loop_time(s);
  for (int k : {0, 1, 3}) {
    ComplexVector spin = ComplexVector::Zero(4);
    spin(k) = 1;
    GateOptions o;
    o.check_truncation = false;
    o.target_bell = spin;
    const auto r = simulate_gate(s, product_state(s, spin), t, o);
    CHECK(std::norm(closed_form_state(s, spin, t).dot(r.final_state)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.bell_fidelity == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("effective-frame gate closes the loop and matches the closed form") {
  SpinMotionSystem s;
  const auto spin0 = plus_spin_state(s);
  GateOptions o;
  for (int k = 0; k <= 20; ++k) o.sample_times.push_back(loop_time(s) * k / 20);
  const auto r = simulate_gate(s, product_state(s, spin0), loop_time(s), o);
  CHECK(r.residual_spin_motion_entanglement < 1e-6);
  for (auto a : r.final_displacement) CHECK(std::abs(a) < 1e-6);
  CHECK(std::abs(r.geometric_phase - r.predicted_phase) < 1e-6);
  CHECK(r.bell_fidelity > 0.9999);
  const double oracle = bell_fidelity(s, closed_form_state(s, spin0, loop_time(s)), hand_target(pi / 2));
  CHECK(std::abs(bell_fidelity(s, r.final_state, hand_target(pi / 2)) - oracle) < 1e-6);
  REQUIRE(r.truncation_delta);
  CHECK(*r.truncation_delta < 1e-6);
  // Trajectory follows alpha_m(t) at every sample.
  for (const auto& p : r.trajectory)
    for (std::size_t b = 0; b < r.branches.size(); ++b)
      CHECK(std::abs(p.alpha[b] - closed_form_displacement(s, r.branches[b], p.t)) < 1e-6);
}

TEST_CASE("extracted effective coupling is half the bare coupling") {
  SpinMotionSystem s;
  CHECK(extract_effective_coupling(s, 0.01 * loop_time(s)) == doctest::Approx(s.coupling / 2).epsilon(1e-3));
}

TEST_CASE("doubling the Fock cutoff does not move the fidelity") {
  SpinMotionSystem s;
  GateOptions o;
  o.check_truncation = false;
  const auto r20 = simulate_gate(s, product_state(s, plus_spin_state(s)), loop_time(s), o);
  SpinMotionSystem big = s;
  big.n_max = 40;
  const auto r40 = simulate_gate(big, product_state(big, plus_spin_state(big)), loop_time(big), o);
  CHECK(std::abs(r20.bell_fidelity - r40.bell_fidelity) < 1e-6);
}

TEST_CASE("too small a cutoff is reported") {
  SpinMotionSystem s;
  s.coupling = 4 * std::abs(s.detuning);
  s.n_max = 3;
  CHECK_THROWS_AS(simulate_gate(s, product_state(s, plus_spin_state(s)), loop_time(s)), ConvergenceError);
}

TEST_CASE("higher collective spins follow the same closed form") {
  SpinMotionSystem s;
  s.spin = HalfInt(1);
  s.n_max = 30;
  s.coupling = coupling_for_phase(s.detuning, pi / 4);
  const auto spin0 = plus_spin_state(s);
  GateOptions o;
  o.check_truncation = false;
  const auto r = simulate_gate(s, product_state(s, spin0), loop_time(s), o);
  CHECK(std::norm(closed_form_state(s, spin0, loop_time(s)).dot(r.final_state)) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.residual_spin_motion_entanglement < 1e-6);
}

TEST_CASE("Zeeman-frame transform is unitary and invertible") {
  SpinMotionSystem s;
  const auto psi = product_state(s, plus_spin_state(s), 2);
  const auto back = to_zeeman_frame(s, to_zeeman_frame(s, psi, 0.37), -0.37);
  CHECK((back - psi).norm() < 1e-14);
  CHECK(to_zeeman_frame(s, psi, 1.0).norm() == doctest::Approx(1.0));
}

TEST_CASE("input errors") {
  SpinMotionSystem s;
  CHECK_THROWS_AS(simulate_gate(s, ComplexVector::Ones(5), 1.0), ConfigError);
  CHECK_THROWS_AS(simulate_gate(s, product_state(s, plus_spin_state(s)), -1.0), ConfigError);
}
