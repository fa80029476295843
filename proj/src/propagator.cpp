#include "pdd/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdd {

namespace {

ComplexMatrix apply_exp(const ComplexMatrix& h, double dt, const ComplexMatrix& psi, ExpAction action) {
  if (action == ExpAction::taylor) return taylor_action(h, dt, psi);
  return exp_hermitian(h, dt) * psi;
}

ComplexMatrix step(const HamiltonianFn& h, double t, double dt, Integrator integrator, ExpAction action,
                   const ComplexMatrix& psi) {
  if (integrator == Integrator::midpoint) return apply_exp(h(t + dt / 2), dt, psi, action);
  static const double r = std::sqrt(3.0) / 6.0;
  const ComplexMatrix h1 = h(t + (0.5 - r) * dt), h2 = h(t + (0.5 + r) * dt);
  const double a1 = 0.25 + r, a2 = 0.25 - r;
  return apply_exp(a2 * h1 + a1 * h2, dt, apply_exp(a1 * h1 + a2 * h2, dt, psi, action), action);
}

std::size_t steps_for(const Interval& iv, double dt) {
  if (iv.constant) return 1;
  const double n = std::ceil((iv.t_end - iv.t_start) / dt - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

}  // namespace

FixedEvolution evolve_fixed(const HamiltonianFn& h, const ComplexMatrix& psi0, std::span<const Interval> intervals,
                            double dt, Integrator integrator, std::span<const double> sample_times,
                            ExpAction action) {
  if (!(dt > 0)) throw ConfigError("step size must be positive");
  FixedEvolution out;
  out.psi = psi0;
  out.samples.resize(sample_times.size());

  std::vector<std::size_t> order(sample_times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sample_times[a] < sample_times[b]; });
  std::size_t next = 0;
  const double t_begin = intervals.empty() ? 0.0 : intervals.front().t_start;
  const double t_final = intervals.empty() ? 0.0 : intervals.back().t_end;
  for (auto idx : order)
    if (sample_times[idx] < t_begin || sample_times[idx] > t_final)
      throw ConfigError("sample time outside the propagation window");

  for (const Interval& iv : intervals) {
    const std::size_t n = steps_for(iv, dt);
    const double h_step = (iv.t_end - iv.t_start) / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = iv.t_start + h_step * static_cast<double>(k);
      const double t_next = (k + 1 == n) ? iv.t_end : t + h_step;
      while (next < order.size() && sample_times[order[next]] < t_next) {
        const double s = sample_times[order[next]];
        out.samples[order[next]] = (s <= t) ? out.psi : step(h, t, s - t, integrator, action, out.psi);
        ++next;
      }
      out.psi = step(h, t, t_next - t, integrator, action, out.psi);
      ++out.steps;
    }
  }
  while (next < order.size()) out.samples[order[next++]] = out.psi;
  return out;
}

ComplexMatrix taylor_action(const ComplexMatrix& h, double t, const ComplexMatrix& psi) {
  const double norm = h.cwiseAbs().colwise().sum().maxCoeff() * std::abs(t);
  const int pieces = std::max(1, static_cast<int>(std::ceil(norm / 0.5)));
  const std::complex<double> c(0.0, -t / pieces);
  ComplexMatrix v = psi;
  for (int p = 0; p < pieces; ++p) {
    ComplexMatrix term = v, sum = v;
    for (int k = 1; k < 64; ++k) {
      term = (c / static_cast<double>(k)) * (h * term);
      sum += term;
      if (term.norm() <= 1e-18 * sum.norm()) break;
    }
    v = std::move(sum);
  }
  return v;
}

double overlap_defect(const ComplexMatrix& a, const ComplexMatrix& b) {
  std::complex<double> common = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double na = a.col(c).norm(), nb = b.col(c).norm();
    if (na > 0.0 && nb > 0.0) common += a.col(c).dot(b.col(c)) / (na * nb);
  }
  const std::complex<double> unwind = std::abs(common) > 0.0 ? std::conj(common) / std::abs(common) : 1.0;
  double worst = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double na = a.col(c).norm(), nb = b.col(c).norm();
    if (na == 0.0 && nb == 0.0) continue;
    const double ov = std::real(unwind * a.col(c).dot(b.col(c))) / (na * nb);
    worst = std::max(worst, 1.0 - ov);
  }
  return worst;
}

AdaptiveEvolution evolve_adaptive(const HamiltonianFn& h, const ComplexMatrix& psi0,
                                  std::span<const Interval> intervals, const PropagationOptions& options) {
  AdaptiveEvolution out;
  if (options.fixed_dt) {
    out.result = evolve_fixed(h, psi0, intervals, *options.fixed_dt, options.integrator, options.sample_times,
                              options.action);
    out.dt = *options.fixed_dt;
    return out;
  }
  if (!(options.dt_init > 0) || !(options.tol > 0)) throw ConfigError("dt_init and tol must be positive");
  auto count = [&](double dt) {
    std::size_t n = 0;
    for (const auto& iv : intervals) n += steps_for(iv, dt);
    return n;
  };
  double dt = options.dt_init;
  FixedEvolution coarse =
      evolve_fixed(h, psi0, intervals, dt, options.integrator, options.sample_times, options.action);
  while (true) {
    if (count(dt / 2) > options.max_steps)
      throw ConvergenceError("propagation did not reach tolerance " + std::to_string(options.tol) + " within " +
                             std::to_string(options.max_steps) + " steps");
    FixedEvolution fine =
        evolve_fixed(h, psi0, intervals, dt / 2, options.integrator, options.sample_times, options.action);
    const double err = overlap_defect(coarse.psi, fine.psi);
    dt /= 2;
    if (err < options.tol) {
      out.result = std::move(fine);
      out.dt = dt;
      out.error = err;
      return out;
    }
    coarse = std::move(fine);
  }
}

std::vector<Interval> schedule_intervals(const FieldSchedule& schedule) {
  std::vector<Interval> out;
  const bool quiet = schedule.tones().empty();
  for (const auto& s : schedule.segments())
    out.push_back({s.t_start, s.t_end, quiet && s.kind == SegmentKind::hold});
  return out;
}

namespace {

Vector3 checked_field(const FieldSchedule& schedule, double t) {
  const Vector3 b = schedule(t);
  if (!b.allFinite()) throw ConfigError("non-finite field sample at t = " + std::to_string(t));
  return b;
}

void require_normalized(const ComplexVector& psi, Eigen::Index dim) {
  if (psi.size() != dim) throw ConfigError("state has the wrong dimension");
  if (std::abs(psi.norm() - 1.0) > 1e-9) throw ConfigError("initial state must be normalized");
}

// Blocks to integrate separately in projected mode.
std::vector<FBlock> active_blocks(const HyperfineSystem& sys, const PropagationOptions& options) {
  if (options.blocks.empty()) return sys.blocks();
  std::vector<FBlock> out;
  for (HalfInt F : options.blocks) out.push_back(sys.block(F));
  return out;
}

HamiltonianFn block_sampler(const HyperfineSystem& sys, const FieldSchedule& schedule, HalfInt F) {
  const SpinOperators s = sys.block_operators(F);
  const double gamma = sys.block_larmor_per_gauss(F);
  return [s, gamma, schedule](double t) -> ComplexMatrix {
    const Vector3 b = checked_field(schedule, t);
    return gamma * (b.x() * s.x + b.y() * s.y + b.z() * s.z);
  };
}

}  // namespace

HamiltonianFn zeeman_sampler(const HyperfineSystem& sys, const FieldSchedule& schedule, ZeemanMode mode) {
  return [sys, schedule, mode](double t) { return zeeman_hamiltonian(sys, checked_field(schedule, t), mode); };
}

PropagationResult propagate(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                            const PropagationOptions& options, ZeemanMode mode) {
  require_normalized(psi0, sys.dim());
  const auto intervals = schedule_intervals(schedule);
  PropagationResult out;
  out.final_state = {ComplexVector::Zero(sys.dim()), schedule.duration()};
  for (double s : options.sample_times) out.trajectory.push_back({ComplexVector::Zero(sys.dim()), s});

  auto absorb = [&](const AdaptiveEvolution& ev, Eigen::Index offset, Eigen::Index size) {
    out.final_state.amplitudes.segment(offset, size) = ev.result.psi.col(0);
    for (std::size_t k = 0; k < ev.result.samples.size(); ++k)
      out.trajectory[k].amplitudes.segment(offset, size) = ev.result.samples[k].col(0);
    out.step_count = std::max(out.step_count, ev.result.steps);
    out.dt = out.dt == 0.0 ? ev.dt : std::min(out.dt, ev.dt);
    out.convergence_error = std::max(out.convergence_error, ev.error);
  };

  if (mode == ZeemanMode::full) {
    absorb(evolve_adaptive(zeeman_sampler(sys, schedule, mode), psi0, intervals, options), 0, sys.dim());
  } else {
    const auto blocks = active_blocks(sys, options);
    double covered = 0.0;
    for (const auto& blk : blocks) {
      const ComplexVector part = psi0.segment(blk.offset, blk.size);
      covered += part.squaredNorm();
      if (part.squaredNorm() == 0.0) continue;
      absorb(evolve_adaptive(block_sampler(sys, schedule, blk.F), part, intervals, options), blk.offset, blk.size);
    }
    if (std::abs(covered - psi0.squaredNorm()) > 1e-15)
      throw ConfigError("initial state has support outside the selected F blocks");
  }
  out.norm_drift = std::abs(out.final_state.amplitudes.norm() - psi0.norm());
  return out;
}

UnitaryResult propagate_unitary(const HyperfineSystem& sys, const FieldSchedule& schedule,
                                const PropagationOptions& options, ZeemanMode mode) {
  const auto intervals = schedule_intervals(schedule);
  PropagationOptions opts = options;
  opts.sample_times.clear();
  UnitaryResult out;
  out.unitary = ComplexMatrix::Zero(sys.dim(), sys.dim());
  out.computed.assign(static_cast<std::size_t>(sys.dim()), false);

  auto absorb = [&](const AdaptiveEvolution& ev, Eigen::Index offset, Eigen::Index size) {
    out.unitary.block(offset, offset, size, size) = ev.result.psi;
    for (Eigen::Index k = offset; k < offset + size; ++k) out.computed[static_cast<std::size_t>(k)] = true;
    out.step_count = std::max(out.step_count, ev.result.steps);
    out.dt = out.dt == 0.0 ? ev.dt : std::min(out.dt, ev.dt);
    out.convergence_error = std::max(out.convergence_error, ev.error);
  };

  if (mode == ZeemanMode::full) {
    absorb(evolve_adaptive(zeeman_sampler(sys, schedule, mode), ComplexMatrix::Identity(sys.dim(), sys.dim()),
                           intervals, opts),
           0, sys.dim());
  } else {
    for (const auto& blk : active_blocks(sys, options))
      absorb(evolve_adaptive(block_sampler(sys, schedule, blk.F), ComplexMatrix::Identity(blk.size, blk.size),
                             intervals, opts),
             blk.offset, blk.size);
  }
  return out;
}

std::vector<Eigen::Index> target_permutation(const HyperfineSystem& sys, TargetMap map) {
  std::vector<Eigen::Index> dest;
  for (const auto& l : sys.basis()) dest.push_back(map == TargetMap::identity ? sys.index_of(l) : sys.index_of(l.F, -l.m));
  return dest;
}

Calibration calibrate_from_unitary(const UnitaryResult& reference, std::vector<Eigen::Index> destination,
                                   TargetMap map, double leakage_bound) {
  const Eigen::Index n = reference.unitary.cols();
  if (static_cast<Eigen::Index>(destination.size()) != n) throw ConfigError("permutation has the wrong size");
  Calibration c;
  c.map = map;
  c.destination = std::move(destination);
  c.phases = Eigen::VectorXd::Zero(n);
  c.valid.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index s = 0; s < n; ++s) {
    if (!reference.computed[static_cast<std::size_t>(s)]) continue;
    const Eigen::Index d = c.destination[static_cast<std::size_t>(s)];
    const std::complex<double> u = reference.unitary(d, s);
    c.off_structure_weight = std::max(c.off_structure_weight, 1.0 - std::norm(u));
    c.phases(d) = std::arg(u);
    c.valid[static_cast<std::size_t>(s)] = true;
  }
  if (c.off_structure_weight > leakage_bound)
    throw CalibrationError("reference propagator moves " + std::to_string(c.off_structure_weight) +
                           " of a basis state off the expected map (bound " + std::to_string(leakage_bound) + ")");
  return c;
}

Calibration calibrate_phases(const HyperfineSystem& sys, const FieldSchedule& reference, TargetMap map,
                             const PropagationOptions& options, double leakage_bound, ZeemanMode mode) {
  if (!reference.tones().empty()) throw ConfigError("calibration reference must be noise-free");
  return calibrate_from_unitary(propagate_unitary(sys, reference, options, mode), target_permutation(sys, map), map,
                                leakage_bound);
}

ComplexVector calibrated_target(const Calibration& calibration, const ComplexVector& psi0) {
  ComplexVector t = ComplexVector::Zero(psi0.size());
  for (Eigen::Index s = 0; s < psi0.size(); ++s) {
    if (psi0(s) == 0.0) continue;
    if (!calibration.valid[static_cast<std::size_t>(s)])
      throw CalibrationError("initial state has support on an uncalibrated basis state");
    const Eigen::Index d = calibration.destination[static_cast<std::size_t>(s)];
    t(d) = psi0(s) * std::polar(1.0, calibration.phases(d));
  }
  return t;
}

double fidelity(const ComplexVector& state, const ComplexVector& target, const Eigen::VectorXd& phases) {
  if (state.size() != target.size() || phases.size() != target.size())
    throw ConfigError("fidelity operands have different dimensions");
  ComplexVector t = target;
  for (Eigen::Index k = 0; k < t.size(); ++k) t(k) *= std::polar(1.0, phases(k));
  return fidelity(state, t);
}

double fidelity(const ComplexVector& state, const ComplexVector& target) {
  if (state.size() != target.size()) throw ConfigError("fidelity operands have different dimensions");
  const double n = state.squaredNorm() * target.squaredNorm();
  if (n == 0.0) throw ConfigError("fidelity of a zero vector");
  return std::norm(target.dot(state)) / n;
}

double leakage(const ComplexVector& state, std::span<const Eigen::Index> subspace) {
  if (subspace.empty()) throw ConfigError("leakage subspace is empty");
  std::vector<bool> inside(static_cast<std::size_t>(state.size()), false);
  for (Eigen::Index s : subspace) {
    if (s < 0 || s >= state.size()) throw ConfigError("subspace index out of range");
    inside[static_cast<std::size_t>(s)] = true;
  }
  double out = 0.0;
  for (Eigen::Index s = 0; s < state.size(); ++s)
    if (!inside[static_cast<std::size_t>(s)]) out += std::norm(state(s));
  return out / state.squaredNorm();
}

double leakage(const HyperfineSystem& sys, const ComplexVector& state, std::span<const HyperfineLabel> subspace) {
  std::vector<Eigen::Index> idx;
  for (const auto& l : subspace) idx.push_back(sys.index_of(l));
  return leakage(state, idx);
}

double leakage(const ComplexMatrix& unitary, std::span<const Eigen::Index> subspace) {
  if (subspace.empty()) throw ConfigError("leakage subspace is empty");
  double out = 0.0;
  for (Eigen::Index s : subspace) {
    if (s < 0 || s >= unitary.cols()) throw ConfigError("subspace index out of range");
    for (Eigen::Index d = 0; d < unitary.rows(); ++d)
      if (std::find(subspace.begin(), subspace.end(), d) == subspace.end()) out += std::norm(unitary(d, s));
  }
  return out / static_cast<double>(subspace.size());
}

ComplexVector make_state(const HyperfineSystem& sys,
                         std::span<const std::pair<HyperfineLabel, std::complex<double>>> amplitudes) {
  ComplexVector psi = ComplexVector::Zero(sys.dim());
  for (const auto& [label, amp] : amplitudes) psi(sys.index_of(label)) += amp;
  const double n = psi.norm();
  if (n == 0.0) throw ConfigError("state has zero norm");
  return psi / n;
}

}  // namespace pdd
