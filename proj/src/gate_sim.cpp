#include "pdd/gate_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pdd {

void SpinMotionSystem::validate() const {
  if (n_spins < 1) throw ConfigError("n_spins must be at least 1");
  if (spin.twice() < 1) throw ConfigError("spin must be at least 1/2");
  if (n_max < 1) throw ConfigError("n_max must be at least 1");
  if (!std::isfinite(mode_frequency) || !std::isfinite(coupling) || !std::isfinite(detuning) ||
      !std::isfinite(zeeman_splitting) || !std::isfinite(static_shift))
    throw ConfigError("gate parameters must be finite");
  if (!(mode_frequency > 0)) throw ConfigError("mode frequency must be positive");
}

Eigen::Index SpinMotionSystem::spin_dim() const {
  Eigen::Index d = 1;
  for (int k = 0; k < n_spins; ++k) d *= spin.twice() + 1;
  return d;
}

namespace {

ComplexMatrix identity(Eigen::Index n) { return ComplexMatrix::Identity(n, n); }

ComplexMatrix lowering(Eigen::Index dim) {
  ComplexMatrix a = ComplexMatrix::Zero(dim, dim);
  for (Eigen::Index n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

// Spin-factor block of the state: rows are spin indices, columns Fock numbers.
ComplexMatrix as_grid(const SpinMotionSystem& sys, const ComplexVector& state) {
  if (state.size() != sys.dim()) throw ConfigError("state does not match the spin-motion dimension");
  ComplexMatrix m(sys.spin_dim(), sys.motion_dim());
  for (Eigen::Index s = 0; s < m.rows(); ++s) m.row(s) = state.segment(s * m.cols(), m.cols()).transpose();
  return m;
}

ComplexVector from_grid(const ComplexMatrix& m) {
  ComplexVector v(m.size());
  for (Eigen::Index s = 0; s < m.rows(); ++s) v.segment(s * m.cols(), m.cols()) = m.row(s).transpose();
  return v;
}

double wrap(double x) { return std::remainder(x, units::two_pi); }

struct GateTerms {
  ComplexMatrix zf, xf, yf;  // J_{z,x,y} (x) a+
  ComplexMatrix jz, jx, jy;  // J_{z,x,y} (x) 1
};

GateTerms gate_terms(const SpinMotionSystem& sys) {
  const GateOperators ops = gate_operators(sys);
  const ComplexMatrix ad = ops.a.adjoint();
  return {ops.jz * ad, ops.jx * ad, ops.jy * ad, ops.jz, ops.jx, ops.jy};
}

double noise_field(const std::optional<GateNoise>& noise, double t) {
  if (!noise) return 0.0;
  return noise->larmor_per_gauss * noise->amplitude * std::cos(noise->angular_frequency * t + noise->phase);
}

}  // namespace

GateOperators gate_operators(const SpinMotionSystem& sys) {
  sys.validate();
  const SpinOperators single = angular_momentum_ops(sys.spin);
  const Eigen::Index d = single.dim();
  SpinOperators coll{ComplexMatrix::Zero(sys.spin_dim(), sys.spin_dim()),
                     ComplexMatrix::Zero(sys.spin_dim(), sys.spin_dim()),
                     ComplexMatrix::Zero(sys.spin_dim(), sys.spin_dim())};
  for (int k = 0; k < sys.n_spins; ++k) {
    auto embed = [&](const ComplexMatrix& op) {
      ComplexMatrix m = identity(1);
      for (int q = 0; q < sys.n_spins; ++q) m = kron(m, q == k ? op : identity(d));
      return m;
    };
    coll.x += embed(single.x);
    coll.y += embed(single.y);
    coll.z += embed(single.z);
  }
  const ComplexMatrix im = identity(sys.motion_dim());
  return {coll, kron(coll.x, im), kron(coll.y, im), kron(coll.z, im),
          kron(identity(sys.spin_dim()), lowering(sys.motion_dim()))};
}

HamiltonianFn build_gate_hamiltonian(const SpinMotionSystem& sys, GateFrame frame,
                                     const std::optional<GateNoise>& noise) {
  const GateTerms g = gate_terms(sys);
  const double om = sys.coupling, wa = sys.mode_frequency, wr = sys.rotation_rate(), d = sys.detuning;
  const double wz = sys.zeeman_splitting, shift = sys.static_shift;
  using C = std::complex<double>;
  if (frame == GateFrame::effective) {
    return [g, om, d, shift, noise](double t) -> ComplexMatrix {
      const C e = std::polar(om / 2, d * t);
      ComplexMatrix h = e * g.zf;
      h += h.adjoint().eval();
      h += (shift + noise_field(noise, t)) * g.jz;
      return h;
    };
  }
  return [g, om, wa, wr, wz, shift, noise](double t) -> ComplexMatrix {
    const double c = std::cos(wr * t), s = std::sin(wr * t);
    const C e = std::polar(om, wa * t);
    ComplexMatrix h = e * (c * g.zf + s * g.xf);
    h += h.adjoint().eval();
    const double b = noise_field(noise, t);
    h += (wz + shift + b * c) * g.jz + (b * s) * g.jx;
    return h;
  };
}

HamiltonianFn build_gate_hamiltonian_zeeman_frame(const SpinMotionSystem& sys, const std::optional<GateNoise>& noise) {
  const GateTerms g = gate_terms(sys);
  const double om = sys.coupling, wa = sys.mode_frequency, wr = sys.rotation_rate();
  const double wz = sys.zeeman_splitting, shift = sys.static_shift;
  return [g, om, wa, wr, wz, shift, noise](double t) -> ComplexMatrix {
    const double c = std::cos(wr * t), s = std::sin(wr * t);
    const double cz = std::cos(wz * t), sz = std::sin(wz * t);
    const std::complex<double> e = std::polar(om, wa * t);
    ComplexMatrix h = e * (c * g.zf + (s * cz) * g.xf - (s * sz) * g.yf);
    h += h.adjoint().eval();
    const double b = noise_field(noise, t);
    h += (shift + b * c) * g.jz + (b * s * cz) * g.jx - (b * s * sz) * g.jy;
    return h;
  };
}

ComplexVector to_zeeman_frame(const SpinMotionSystem& sys, const ComplexVector& state, double t) {
  const auto ms = collective_m(sys);
  ComplexMatrix g = as_grid(sys, state);
  for (Eigen::Index s = 0; s < g.rows(); ++s)
    g.row(s) *= std::polar(1.0, sys.zeeman_splitting * ms[static_cast<std::size_t>(s)] * t);
  return from_grid(g);
}

std::vector<double> collective_m(const SpinMotionSystem& sys) {
  const SpinOperators single = angular_momentum_ops(sys.spin);
  std::vector<double> m{0.0};
  for (int k = 0; k < sys.n_spins; ++k) {
    std::vector<double> next;
    for (double prev : m)
      for (Eigen::Index i = 0; i < single.dim(); ++i) next.push_back(prev + single.z(i, i).real());
    m = std::move(next);
  }
  return m;
}

ComplexVector product_state(const SpinMotionSystem& sys, const ComplexVector& spin_state, int fock) {
  if (spin_state.size() != sys.spin_dim()) throw ConfigError("spin state has the wrong dimension");
  if (fock < 0 || fock > sys.n_max) throw ConfigError("Fock number outside the truncated space");
  ComplexVector mode = ComplexVector::Zero(sys.motion_dim());
  mode(fock) = 1.0;
  return kron(spin_state, mode);
}

ComplexVector plus_spin_state(const SpinMotionSystem& sys) {
  const SpinOperators single = angular_momentum_ops(sys.spin);
  ComplexVector top = ComplexVector::Zero(single.dim());
  top(0) = 1.0;
  const ComplexVector one = rotation_about_y(single, units::pi / 2) * top;
  ComplexVector out = ComplexVector::Ones(1);
  for (int k = 0; k < sys.n_spins; ++k) out = kron(out, one);
  return out;
}

std::complex<double> closed_form_displacement(const SpinMotionSystem& sys, double m, double t) {
  if (sys.detuning == 0.0) return {0.0, -sys.coupling * m * t / 2};
  return -(sys.coupling * m / (2 * sys.detuning)) * (std::polar(1.0, sys.detuning * t) - 1.0);
}

double closed_form_phase(const SpinMotionSystem& sys, double t) {
  const double g = sys.coupling / 2, d = sys.detuning;
  if (d == 0.0) return 0.0;
  return g * g * (d * t - std::sin(d * t)) / (d * d);
}

namespace {

ComplexVector coherent(std::complex<double> alpha, Eigen::Index dim) {
  ComplexVector v(dim);
  v(0) = std::exp(-std::norm(alpha) / 2);
  for (Eigen::Index n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  return v;
}

std::complex<double> branch_phase(const SpinMotionSystem& sys, double m, double t) {
  return std::polar(1.0, closed_form_phase(sys, t) * m * m - sys.static_shift * m * t);
}

}  // namespace

ComplexVector closed_form_state(const SpinMotionSystem& sys, const ComplexVector& spin_state, double t) {
  if (spin_state.size() != sys.spin_dim()) throw ConfigError("spin state has the wrong dimension");
  const auto ms = collective_m(sys);
  ComplexMatrix grid = ComplexMatrix::Zero(sys.spin_dim(), sys.motion_dim());
  for (Eigen::Index s = 0; s < grid.rows(); ++s) {
    const double m = ms[static_cast<std::size_t>(s)];
    grid.row(s) = (spin_state(s) * branch_phase(sys, m, t) *
                   coherent(closed_form_displacement(sys, m, t), sys.motion_dim()))
                      .transpose();
  }
  return from_grid(grid);
}

ComplexVector closed_form_spin_target(const SpinMotionSystem& sys, const ComplexVector& spin_state, double t) {
  if (spin_state.size() != sys.spin_dim()) throw ConfigError("spin state has the wrong dimension");
  const auto ms = collective_m(sys);
  ComplexVector out(spin_state.size());
  for (Eigen::Index s = 0; s < out.size(); ++s)
    out(s) = spin_state(s) * branch_phase(sys, ms[static_cast<std::size_t>(s)], t);
  return out.normalized();
}

double coupling_for_phase(double detuning, double phase) {
  if (!(phase >= 0)) throw ConfigError("target phase must be non-negative");
  return std::abs(detuning) * std::sqrt(2 * phase / units::pi);
}

ComplexMatrix reduced_spin_state(const SpinMotionSystem& sys, const ComplexVector& state) {
  const ComplexMatrix g = as_grid(sys, state);
  return g * g.adjoint();
}

double bell_fidelity(const SpinMotionSystem& sys, const ComplexVector& state, const ComplexVector& target_bell) {
  if (target_bell.size() != sys.spin_dim()) throw ConfigError("Bell target has the wrong dimension");
  const ComplexMatrix rho = reduced_spin_state(sys, state);
  const double f = (target_bell.adjoint() * rho * target_bell)(0, 0).real() / target_bell.squaredNorm();
  return std::clamp(f, 0.0, 1.0);
}

double residual_entanglement(const SpinMotionSystem& sys, const ComplexVector& state) {
  const ComplexMatrix rho = reduced_spin_state(sys, state);
  const double purity = (rho * rho).trace().real() / std::pow(rho.trace().real(), 2);
  return std::clamp(1.0 - purity, 0.0, 1.0);
}

std::vector<std::complex<double>> branch_displacements(const SpinMotionSystem& sys, const ComplexVector& state,
                                                       const std::vector<double>& branches) {
  const ComplexMatrix g = as_grid(sys, state);
  const ComplexMatrix a = lowering(sys.motion_dim());
  const auto ms = collective_m(sys);
  std::vector<std::complex<double>> out;
  for (double b : branches) {
    std::complex<double> num = 0.0;
    double weight = 0.0;
    for (Eigen::Index s = 0; s < g.rows(); ++s) {
      if (std::abs(ms[static_cast<std::size_t>(s)] - b) > 1e-9) continue;
      const ComplexVector v = g.row(s).transpose();
      num += v.dot(a * v);
      weight += v.squaredNorm();
    }
    out.push_back(weight > 0 ? num / weight : std::complex<double>(0.0));
  }
  return out;
}

namespace {

std::vector<double> distinct_branches(const SpinMotionSystem& sys) {
  auto ms = collective_m(sys);
  std::sort(ms.begin(), ms.end(), std::greater<>());
  ms.erase(std::unique(ms.begin(), ms.end(), [](double x, double y) { return std::abs(x - y) < 1e-9; }), ms.end());
  return ms;
}

// Spin part of spin (x) |0>; throws when the mode is not in its ground state.
ComplexVector ground_mode_spin_part(const SpinMotionSystem& sys, const ComplexVector& psi0) {
  const ComplexMatrix g = as_grid(sys, psi0);
  if (g.rightCols(g.cols() - 1).norm() > 1e-12)
    throw ConfigError("closed-form gate target needs the mode in its ground state; pass target_bell explicitly");
  return g.col(0);
}

ComplexVector pad_mode(const SpinMotionSystem& from, const SpinMotionSystem& to, const ComplexVector& psi) {
  const ComplexMatrix g = as_grid(from, psi);
  ComplexMatrix out = ComplexMatrix::Zero(to.spin_dim(), to.motion_dim());
  out.leftCols(g.cols()) = g;
  return from_grid(out);
}

}  // namespace

GateResult simulate_gate(const SpinMotionSystem& sys, const ComplexVector& psi0, double t_gate,
                         const GateOptions& options) {
  sys.validate();
  if (psi0.size() != sys.dim()) throw ConfigError("initial state does not match the spin-motion dimension");
  if (std::abs(psi0.norm() - 1.0) > 1e-9) throw ConfigError("initial state must be normalized");
  if (!(t_gate > 0)) throw ConfigError("gate time must be positive");

  const ComplexVector target =
      options.target_bell ? *options.target_bell
                          : closed_form_spin_target(sys, ground_mode_spin_part(sys, psi0), t_gate);
  if (target.size() != sys.spin_dim()) throw ConfigError("Bell target has the wrong dimension");

  const bool full = options.frame == GateFrame::full_rotating_axis;
  const HamiltonianFn h = full ? build_gate_hamiltonian_zeeman_frame(sys, options.noise)
                               : build_gate_hamiltonian(sys, GateFrame::effective, options.noise);
  PropagationOptions prop = options.propagation;
  prop.sample_times = options.sample_times;
  const std::vector<Interval> window{{0.0, t_gate, false}};
  const AdaptiveEvolution ev = evolve_adaptive(h, psi0, window, prop);

  // Metrics are taken in the frame that removes the Zeeman precession.
  const ComplexVector psi = ev.result.psi.col(0);
  GateResult r;
  r.step_count = ev.result.steps;
  r.bell_fidelity = bell_fidelity(sys, psi, target);
  r.residual_spin_motion_entanglement = residual_entanglement(sys, psi);
  r.branches = distinct_branches(sys);
  r.final_displacement = branch_displacements(sys, psi, r.branches);
  for (std::size_t k = 0; k < ev.result.samples.size(); ++k)
    r.trajectory.push_back({options.sample_times[k], branch_displacements(sys, ev.result.samples[k].col(0), r.branches)});

  const auto ms = collective_m(sys);
  const Eigen::Index a = 0;
  Eigen::Index b = 0;
  for (Eigen::Index s = 1; s < static_cast<Eigen::Index>(ms.size()); ++s)
    if (std::abs(ms[static_cast<std::size_t>(s)]) < std::abs(ms[static_cast<std::size_t>(b)]) - 1e-9) b = s;
  const ComplexMatrix rho0 = reduced_spin_state(sys, psi0), rho = reduced_spin_state(sys, psi);
  const double ma = ms[static_cast<std::size_t>(a)], mb = ms[static_cast<std::size_t>(b)];
  r.predicted_phase = wrap(closed_form_phase(sys, t_gate) * (ma * ma - mb * mb) - sys.static_shift * (ma - mb) * t_gate);
  r.geometric_phase = std::abs(rho0(a, b)) > 1e-12 ? wrap(std::arg(rho(a, b)) - std::arg(rho0(a, b)))
                                                   : std::numeric_limits<double>::quiet_NaN();

  r.final_state = full ? to_zeeman_frame(sys, psi, -t_gate) : psi;

  if (options.check_truncation) {
    SpinMotionSystem bigger = sys;
    bigger.n_max += 4;
    GateOptions again = options;
    again.check_truncation = false;
    again.sample_times.clear();
    again.target_bell = target;
    const GateResult rb = simulate_gate(bigger, pad_mode(sys, bigger, psi0), t_gate, again);
    r.truncation_delta = std::abs(rb.bell_fidelity - r.bell_fidelity);
    if (*r.truncation_delta > options.truncation_tolerance)
      throw ConvergenceError("Fock truncation not converged: fidelity changes by " +
                             std::to_string(*r.truncation_delta) + " from n_max = " + std::to_string(sys.n_max) +
                             " to " + std::to_string(bigger.n_max));
  }
  return r;
}

double extract_effective_coupling(const SpinMotionSystem& sys, double t_probe) {
  if (!(t_probe > 0)) throw ConfigError("probe time must be positive");
  ComplexVector up = ComplexVector::Zero(sys.spin_dim());
  up(0) = 1.0;
  GateOptions opts;
  opts.check_truncation = false;
  opts.target_bell = up;
  opts.propagation.dt_init = t_probe / 8;
  const GateResult r = simulate_gate(sys, product_state(sys, up, 0), t_probe, opts);
  const double m = collective_m(sys).front();
  return std::abs(r.final_displacement.front()) / (std::abs(m) * t_probe);
}

}  // namespace pdd
