// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "pdd/gate_sim.hpp"
#include "pdd/pdd_analysis.hpp"
#include "pdd/species.hpp"

using namespace pdd;
using units::pi;

namespace {

const HyperfineSystem& ba() {
  static const HyperfineSystem sys = SpeciesTable::builtin().get("ba137").system();
  return sys;
}

const std::vector<HyperfineLabel> qubit{{1, -1}, {1, 1}};

ComplexVector qubit_state(double p_minus = 1.0 / 3) {
  const std::pair<HyperfineLabel, std::complex<double>> amps[] = {{{1, -1}, std::sqrt(p_minus)},
                                                                  {{1, 1}, std::sqrt(1 - p_minus)}};
  return make_state(ba(), amps);
}

double population(const ComplexVector& psi, const HyperfineLabel& l) { return std::norm(psi(ba().index_of(l))); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = limit_s <= 0 || secs < limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %d %s: %s (%.2f s%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs,
              in_time ? "" : ", over time limit");
  std::fflush(stdout);
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Smallest grid field from which every larger grid point stays at or below `bound`.
double threshold_field(const std::vector<SweepPoint>& pts, double bound) {
  double b = NAN;
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    if (!it->error.empty() || !(it->leakage <= bound)) break;
    b = it->b_t;
  }
  return b;
}

double loglog_slope(const std::vector<SweepPoint>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& p : pts) {
    if (!p.error.empty() || !(p.leakage > 0)) continue;
    const double x = std::log(p.b_t), y = std::log(p.leakage);
    sx += x, sy += y, sxx += x * x, sxy += x * y;
    ++n;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int k = 0; k < n; ++k) g.push_back(lo * std::pow(hi / lo, double(k) / (n - 1)));
  return g;
}

}  // namespace

int main() {
  criterion(1, "qubit field sensitivity", 1.0, [] {
    const double s = units::to_mhz(std::abs(qubit_sensitivity(ba(), {1, -1}, {1, 1})));
    return Outcome{std::abs(s / 1.4 - 1) < 0.01, sci(s) + " MHz/G vs 1.4"};
  });

  criterion(2, "pulsed echo swaps the qubit populations", 10.0, [] {
    PropagationOptions opt;
    for (int k = 0; k <= 400; ++k) opt.sample_times.push_back(0.01 * k);
    const auto r = propagate(ba(), pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0), qubit_state(), opt);
    const auto& a = r.final_state.amplitudes;
    const double pm = population(a, {1, -1}), p0 = population(a, {1, 0}), pp = population(a, {1, 1});
    const double leak = leakage(ba(), a, qubit);
    double peak = 0, peak_t = 0;
    for (const auto& s : r.trajectory)
      if (const double p = population(s.amplitudes, {1, 0}); p > peak) peak = p, peak_t = s.time;
    const bool swapped = std::abs(pm - 2.0 / 3) < 1e-5 && std::abs(pp - 1.0 / 3) < 1e-5 && p0 < 1e-5;
    const bool mid = peak > 0.1 && peak_t > 0.5 && peak_t < 2.5;
    return Outcome{swapped && leak < 1e-5 && mid, "populations (" + sci(pm) + ", " + sci(p0) + ", " + sci(pp) +
                                                      "), leakage " + sci(leak) + ", |1,0> peak " + sci(peak) +
                                                      " at t=" + sci(peak_t)};
  });

  criterion(3, "leakage thresholds versus field", 300.0, [] {
    AnalysisOptions ao;
    const auto grid = log_grid(0.1, 10.0, 21);
    std::string detail;
    bool ok = true;
    for (auto [scheme, target] : {std::pair{SchemeTag::pulsed, 1.0}, std::pair{SchemeTag::continuous, 2.5}}) {
      const auto pts = leakage_sweep(ba(), scheme_factory(scheme, 10.0, 100.0), grid, qubit_state(), qubit, ao);
      const double b = threshold_field(pts, 1e-4), slope = loglog_slope(pts);
      ok = ok && std::isfinite(b) && b <= 3 * target && slope < 0;
      detail += to_string(scheme) + ": 1e-4 reached from " + sci(b) + " G (target " + sci(target) + "), log-log slope " +
                sci(slope) + "; ";
    }
    return Outcome{ok, detail};
  });

  criterion(4, "filter response shape", 600.0, [] {
    std::vector<double> omega;
    for (double f : {0.01, 0.1, 1.0, 10.0, 100.0}) omega.push_back(units::khz(f));
    FilterOptions fo;
    fo.check_linearity = fo.check_step_convergence = false;
    const auto none = filter_response(ba(), static_schedule(10.0, 100.0), qubit_state(), omega, fo).s_values;
    const auto pulsed =
        filter_response(ba(), pulsed_pdd_schedule(10.0, 10.0, 50.0, 100.0), qubit_state(), omega, fo).s_values;
    const auto cont =
        filter_response(ba(), continuous_pdd_schedule(10.0, 2 * pi / 10.0, 100.0), qubit_state(), omega, fo).s_values;
    bool none_max = true;
    for (double s : none) none_max = none_max && s <= none[0] * (1 + 1e-6);
    const bool pulsed_falls = pulsed[0] < pulsed[1] && pulsed[1] < pulsed[2] && pulsed[0] < 1e-3 * none[0];
    double worst = 0;
    for (int k = 0; k < 3; ++k) worst = std::max(worst, cont[k] / pulsed[k]);
    return Outcome{none_max && pulsed_falls && worst <= 1e-2,
                   "S_none(0.01 kHz) " + sci(none[0]) + ", S_pulsed(0.01/0.1/1 kHz) " + sci(pulsed[0]) + "/" +
                       sci(pulsed[1]) + "/" + sci(pulsed[2]) + ", max S_cont/S_pulsed below 1 kHz " + sci(worst)};
  });

  criterion(5, "control-error infidelity", 1.0, [] {
    const double sens = std::abs(qubit_sensitivity(ba(), {1, -1}, {1, 1}));
    const double db = 1e-4 * 2.5;
    const double short_r = control_error_infidelity(db, sens, 3.0).infidelity;
    const double long_r = control_error_infidelity(db, sens, 100.0).infidelity;
    const bool ok = std::abs(short_r / 1e-5 - 1) < 0.5 && std::abs(long_r / 2e-2 - 1) < 0.5;
    return Outcome{ok, "t_r=3: " + sci(short_r) + " (1e-5), t_r=100: " + sci(long_r) + " (2e-2)"};
  });

  criterion(6, "first-order Magnus leakage estimate", 60.0, [] {
    PropagationOptions opt;
    opt.tol = 1e-15;
    opt.max_steps = std::size_t{1} << 26;
    std::string detail;
    bool ok = true;
    const std::vector<std::pair<std::string, std::function<FieldSchedule(double)>>> families{
        {"tau=2", [](double b) { return pulsed_pdd_schedule(b, 2.0, 1.5, 4.0); }},
        {"tau=10", [](double b) { return pulsed_pdd_schedule(b, 10.0, 50.0, 100.0); }}};
    for (const auto& [name, make] : families)
      for (double b : {5.0, 10.0, 20.0}) {
        const auto s = make(b);
        const auto r = propagate(ba(), s, qubit_state(), opt);
        const double full = leakage(ba(), r.final_state.amplitudes, qubit);
        const double est = magnus_leakage_estimate(ba(), s, qubit_state(), qubit);
        ok = ok && est / full > 0.5 && est / full < 2.0;
        detail += name + " " + sci(b) + " G: " + sci(est / full) + "; ";
      }
    const double zero = magnus_leakage_estimate(ba(), static_schedule(5.0, 100.0), qubit_state(), qubit);
    ok = ok && zero == 0.0;
    return Outcome{ok, "estimate/full " + detail + "static field " + sci(zero)};
  });

  criterion(7, "spin-motion gate properties", 300.0, [] {
    const SpinMotionSystem s;
    const double t = 2 * pi / std::abs(s.detuning);
    const auto spin0 = plus_spin_state(s);
    const auto psi0 = product_state(s, spin0);
    GateOptions o;
    const auto eff = simulate_gate(s, psi0, t, o);
    const auto oracle = closed_form_state(s, spin0, t);
    const double f_oracle = bell_fidelity(s, oracle, closed_form_spin_target(s, spin0, t));
    const double omega_eff = extract_effective_coupling(s, 0.01 * t);
    o.frame = GateFrame::full_rotating_axis;
    o.check_truncation = false;
    const auto full = simulate_gate(s, psi0, t, o);
    const double overlap = std::norm(eff.final_state.dot(to_zeeman_frame(s, full.final_state, t)));
    const bool ok = eff.residual_spin_motion_entanglement < 1e-6 && std::abs(omega_eff / (s.coupling / 2) - 1) < 0.01 &&
                    std::abs(eff.bell_fidelity - f_oracle) < 1e-6 && overlap > 0.999;
    return Outcome{ok, "residual entanglement " + sci(eff.residual_spin_motion_entanglement) + ", Omega_eff ratio - 1 " +
                           sci(omega_eff / (s.coupling / 2) - 1) + ", |F - F_oracle| " +
                           sci(std::abs(eff.bell_fidelity - f_oracle)) + ", 1 - frame overlap " + sci(1 - overlap)};
  });

  criterion(8, "unitarity and second-order convergence", 0.0, [] {
    double worst = 0;
    for (const auto& s : {pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0), pulsed_pdd_schedule(1.0, 10.0, 50.0, 100.0),
                          continuous_pdd_schedule(2.5, 2 * pi / 10.0, 100.0)})
      worst = std::max(worst, unitarity_error(propagate_unitary(ba(), s).unitary));
    worst = std::max(worst, unitarity_error(propagate_unitary(ba(), pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0), {},
                                                              ZeemanMode::full)
                                                .unitary));
    const auto s = pulsed_pdd_schedule(10.0, 2.0, 1.5, 4.0);
    const auto h = zeeman_sampler(ba(), s, ZeemanMode::projected);
    const auto iv = schedule_intervals(s);
    const ComplexVector psi0 = qubit_state();
    auto run = [&](double dt) { return evolve_fixed(h, psi0, iv, dt, Integrator::midpoint).psi.col(0).eval(); };
    const double dt = 2e-3;
    const ComplexVector ref = run(dt / 16);
    const double order = std::log2((run(dt) - ref).norm() / (run(dt / 2) - ref).norm());
    return Outcome{worst < 1e-9 && std::abs(order - 2) < 0.2,
                   "max ||U^dag U - I|| " + sci(worst) + ", step-halving order " + sci(order)};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
