#include "pdd/pdd_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdd/parallel.hpp"

namespace pdd {

std::string to_string(SchemeTag s) {
  switch (s) {
    case SchemeTag::none: return "none";
    case SchemeTag::pulsed: return "pulsed";
    case SchemeTag::continuous: return "continuous";
  }
  return "none";
}

SchemeTag parse_scheme(const std::string& s) {
  if (s == "none" || s == "static") return SchemeTag::none;
  if (s == "pulsed") return SchemeTag::pulsed;
  if (s == "continuous") return SchemeTag::continuous;
  throw ConfigError("unknown scheme '" + s + "' (expected none, pulsed or continuous)");
}

SchemeTag scheme_of(const FieldSchedule& schedule) {
  const auto& d = schedule.descriptor();
  if (!d) return SchemeTag::none;
  if (std::holds_alternative<PulsedParams>(*d)) return SchemeTag::pulsed;
  if (std::holds_alternative<ContinuousParams>(*d)) return SchemeTag::continuous;
  return SchemeTag::none;
}

TargetMap target_map_for(SchemeTag scheme) {
  return scheme == SchemeTag::pulsed ? TargetMap::reverse_m : TargetMap::identity;
}

std::vector<HalfInt> support_blocks(const HyperfineSystem& sys, const ComplexVector& psi) {
  if (psi.size() != sys.dim()) throw ConfigError("state has the wrong dimension");
  std::vector<HalfInt> out;
  for (const auto& blk : sys.blocks())
    if (psi.segment(blk.offset, blk.size).squaredNorm() > 0) out.push_back(blk.F);
  return out;
}

namespace {

AnalysisOptions restricted(const HyperfineSystem& sys, const ComplexVector& psi0, AnalysisOptions options) {
  options.propagation.blocks = support_blocks(sys, psi0);
  options.propagation.sample_times.clear();
  return options;
}

}  // namespace

double memory_infidelity(const HyperfineSystem& sys, const FieldSchedule& schedule, const NoiseTone& tone,
                         const ComplexVector& psi0, const Calibration& calibration, const AnalysisOptions& options) {
  const AnalysisOptions opts = restricted(sys, psi0, options);
  const auto result = propagate(sys, schedule.with_noise(tone), psi0, opts.propagation, opts.mode);
  const ComplexVector target = calibrated_target(calibration, psi0);
  return std::clamp(1.0 - fidelity(result.final_state.amplitudes, target), 0.0, 1.0);
}

double memory_infidelity(const HyperfineSystem& sys, const FieldSchedule& schedule, const NoiseTone& tone,
                         const ComplexVector& psi0, const AnalysisOptions& options) {
  const AnalysisOptions opts = restricted(sys, psi0, options);
  const Calibration cal = calibrate_phases(sys, schedule, target_map_for(scheme_of(schedule)), opts.propagation,
                                           opts.leakage_bound, opts.mode);
  return memory_infidelity(sys, schedule, tone, psi0, cal, opts);
}

FilterCurve filter_response(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                            const std::vector<double>& omega_grid, const FilterOptions& options) {
  if (options.n_phases < 4) throw ConfigError("n_phases must be at least 4");
  if (!(options.b_e > 0)) throw ConfigError("B_e must be positive");
  if (omega_grid.empty()) throw ConfigError("frequency grid is empty");
  for (double w : omega_grid)
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("noise frequencies must be finite and non-negative");
  if (!schedule.tones().empty()) throw ConfigError("filter reference schedule must be noise-free");

  const AnalysisOptions base = restricted(sys, psi0, options.analysis);
  const SchemeTag scheme = scheme_of(schedule);
  const TargetMap map = target_map_for(scheme);
  const double omega_max = *std::max_element(omega_grid.begin(), omega_grid.end());
  auto tone = [&](double omega, double theta, double amplitude) {
    return NoiseTone{amplitude, omega, theta, options.polarization};
  };
  auto theta = [&](int k) { return units::two_pi * k / options.n_phases; };

  // A zero-amplitude tone forces the same step grid as the noisy runs.
  const FieldSchedule silent = schedule.with_noise(tone(omega_max, 0.0, 0.0));

  struct Grid {
    AnalysisOptions opts;
    Calibration cal;
    double baseline;
  };
  auto make_grid = [&](double dt) {
    Grid g{base, {}, 0.0};
    g.opts.propagation.fixed_dt = dt;
    g.cal = calibrate_from_unitary(propagate_unitary(sys, silent, g.opts.propagation, g.opts.mode),
                                   target_permutation(sys, map), map, g.opts.leakage_bound);
    g.baseline = memory_infidelity(sys, schedule, tone(omega_max, 0.0, 0.0), psi0, g.cal, g.opts);
    return g;
  };
  // Phase-averaged infidelities for a list of (omega, amplitude) points, reduced in index order.
  auto averages = [&](const Grid& g, const std::vector<std::pair<double, double>>& points) {
    const std::size_t n = static_cast<std::size_t>(options.n_phases);
    const auto runs = parallel_map(points.size() * n, base.workers, [&](std::size_t i) {
      const auto& [omega, amplitude] = points[i / n];
      return memory_infidelity(sys, schedule, tone(omega, theta(static_cast<int>(i % n)), amplitude), psi0, g.cal,
                               g.opts);
    });
    std::vector<double> out(points.size(), 0.0);
    for (std::size_t i = 0; i < runs.size(); ++i) out[i / n] += runs[i] / static_cast<double>(n);
    return out;
  };

  double dt;
  if (base.propagation.fixed_dt) {
    dt = *base.propagation.fixed_dt;
  } else {
    dt = propagate(sys, schedule.with_noise(tone(omega_max, 0.0, options.b_e)), psi0, base.propagation, base.mode).dt;
  }
  const Grid grid = make_grid(dt);
  const double b2 = options.b_e * options.b_e;

  FilterCurve curve;
  curve.omega = omega_grid;
  curve.b_e_used = options.b_e;
  curve.n_phases = options.n_phases;
  curve.scheme = scheme;
  curve.baseline = grid.baseline;
  curve.dt = dt;
  std::vector<std::pair<double, double>> points;
  for (double w : omega_grid) points.emplace_back(w, options.b_e);
  const auto avg = averages(grid, points);
  for (double a : avg) {
    curve.baseline_dominated.push_back(!(a > grid.baseline));
    curve.s_values.push_back(std::max(0.0, (a - grid.baseline) / b2));
  }

  if (options.check_linearity) {
    const auto peak = std::max_element(curve.s_values.begin(), curve.s_values.end()) - curve.s_values.begin();
    const double w = omega_grid[static_cast<std::size_t>(peak)];
    const double half = options.b_e / 2;
    const double s_half = std::max(0.0, (averages(grid, {{w, half}})[0] - grid.baseline) / (half * half));
    LinearityCheck lin{w, curve.s_values[static_cast<std::size_t>(peak)], s_half, 0.0, false};
    lin.relative_deviation = lin.s_full > 0 ? std::abs(lin.s_half - lin.s_full) / lin.s_full
                                            : std::numeric_limits<double>::infinity();
    lin.passed = lin.relative_deviation <= options.linearity_tolerance;
    curve.linearity = lin;
  }
  if (options.check_step_convergence) {
    const auto top = std::max_element(omega_grid.begin(), omega_grid.end()) - omega_grid.begin();
    const Grid fine = make_grid(dt / 2);
    const double s_fine = std::max(0.0, (averages(fine, {{omega_max, options.b_e}})[0] - fine.baseline) / b2);
    const double s_coarse = curve.s_values[static_cast<std::size_t>(top)];
    curve.step_convergence = s_fine > 0 ? std::abs(s_coarse - s_fine) / s_fine : std::abs(s_coarse - s_fine);
  }
  return curve;
}

std::vector<SweepPoint> leakage_sweep(const HyperfineSystem& sys, const ScheduleFactory& factory,
                                      const std::vector<double>& b_t_grid, const ComplexVector& psi0,
                                      const std::vector<HyperfineLabel>& subspace, const AnalysisOptions& options) {
  for (double b : b_t_grid)
    if (!(b > 0) || !std::isfinite(b)) throw ConfigError("B_t grid values must be positive");
  const AnalysisOptions opts = restricted(sys, psi0, options);
  return parallel_map(b_t_grid.size(), opts.workers, [&](std::size_t i) {
    SweepPoint p;
    p.b_t = b_t_grid[i];
    try {
      const auto result = propagate(sys, factory(p.b_t), psi0, opts.propagation, opts.mode);
      p.leakage = leakage(sys, result.final_state.amplitudes, subspace);
      p.step_count = result.step_count;
    } catch (const std::exception& e) {
      p.leakage = std::numeric_limits<double>::quiet_NaN();
      p.error = e.what();
    }
    return p;
  });
}

ScheduleFactory scheme_factory(SchemeTag scheme, double tau, double t_f) {
  if (!(tau > 0) || !(t_f > 0)) throw ConfigError("tau and t_f must be positive");
  switch (scheme) {
    case SchemeTag::pulsed: return [=](double b) { return pulsed_pdd_schedule(b, tau, t_f / 2, t_f); };
    case SchemeTag::continuous:
      return [=](double b) { return continuous_pdd_schedule(b, units::two_pi / tau, t_f); };
    case SchemeTag::none: break;
  }
  return [=](double b) { return static_schedule(b, t_f); };
}

ControlError control_error_infidelity(double delta_b, double sensitivity, double t_r, double lambda2) {
  if (!std::isfinite(delta_b) || !std::isfinite(sensitivity) || !(t_r >= 0) || !(lambda2 >= 0))
    throw ConfigError("control-error inputs must be finite with t_r and lambda2 non-negative");
  const double x = delta_b * sensitivity * t_r;
  ControlError e;
  e.infidelity = x * x * lambda2;
  e.outside_taylor_regime = e.infidelity > 0.1;
  return e;
}

double control_exposure_time(const FieldSchedule& schedule) {
  const auto& d = schedule.descriptor();
  if (!d) return schedule.duration();
  if (const auto* p = std::get_if<PulsedParams>(&*d)) {
    if (p->return_mode == ReturnMode::instant) return p->tau;
    return p->tau + (p->t_return < 0 ? p->tau / 2 : p->t_return);
  }
  if (const auto* c = std::get_if<ContinuousParams>(&*d)) return c->t_f;
  return 0.0;
}

double qubit_sensitivity(const HyperfineSystem& sys, const HyperfineLabel& a, const HyperfineLabel& b, double b0,
                         ZeemanMode mode) {
  if (a == b) throw ConfigError("sensitivity needs two distinct labels, got " + a.str() + " twice");
  const Eigen::Index ia = sys.index_of(a), ib = sys.index_of(b);
  auto splitting = [&](double field) {
    const ComplexMatrix h = zeeman_hamiltonian(sys, Vector3(0, 0, field), mode);
    if (mode == ZeemanMode::projected) return h(ia, ia).real() - h(ib, ib).real();
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    auto energy = [&](Eigen::Index idx) {
      Eigen::Index best;
      es.eigenvectors().row(idx).cwiseAbs().maxCoeff(&best);
      return es.eigenvalues()(best);
    };
    return energy(ia) - energy(ib);
  };
  const double h = 1e-3 * std::max(std::abs(b0), 1.0);
  return (splitting(b0 + h) - splitting(b0 - h)) / (2 * h);
}

ErrorBudget error_budget(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                         const std::vector<HyperfineLabel>& qubit, double delta_b, double lambda2,
                         const AnalysisOptions& options) {
  if (qubit.size() != 2) throw ConfigError("the qubit subspace must have exactly two labels");
  const AnalysisOptions opts = restricted(sys, psi0, options);
  ErrorBudget e;
  const auto result = propagate(sys, schedule.without_noise(), psi0, opts.propagation, opts.mode);
  e.leakage = leakage(sys, result.final_state.amplitudes, qubit);
  const double sens = std::abs(qubit_sensitivity(sys, qubit[0], qubit[1]));
  e.control_infidelity = std::min(1.0, control_error_infidelity(delta_b, sens, control_exposure_time(schedule),
                                                                lambda2).infidelity);
  e.ac_zeeman_shift =
      magnus_diabatic_estimate(schedule.without_noise(), sys.block_larmor_per_gauss(qubit[0].F)).jz_shift;
  e.first_order_leakage_estimate =
      std::min(1.0, magnus_leakage_estimate(sys, schedule.without_noise(), psi0, qubit));
  return e;
}

}  // namespace pdd
