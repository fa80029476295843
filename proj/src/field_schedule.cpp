#include "pdd/field_schedule.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace pdd {

using units::pi;

void NoiseTone::validate() const {
  if (!std::isfinite(amplitude) || amplitude < 0) throw ConfigError("noise amplitude must be >= 0");
  if (!std::isfinite(angular_frequency) || !std::isfinite(phase))
    throw ConfigError("noise frequency and phase must be finite");
  if (!polarization.allFinite() || std::abs(polarization.norm() - 1.0) > 1e-12)
    throw ConfigError("noise polarization must be a unit vector");
}

Vector3 NoiseTone::field(double t) const { return amplitude * std::cos(angular_frequency * t + phase) * polarization; }

FieldSchedule::FieldSchedule(std::vector<Segment> segments, bool c1_at_boundaries,
                             std::optional<ScheduleDescriptor> descriptor)
    : segments_(std::move(segments)), descriptor_(std::move(descriptor)), c1_(c1_at_boundaries) {
  if (segments_.empty()) throw ConfigError("schedule needs at least one segment");
  if (segments_.front().t_start != 0.0) throw ConfigError("schedule must start at t = 0");
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto& s = segments_[k];
    if (!(s.t_end > s.t_start)) throw ConfigError("segment " + std::to_string(k) + " has non-positive length");
    if (!s.field) throw ConfigError("segment " + std::to_string(k) + " has no sampler");
    if (k > 0 && s.t_start != segments_[k - 1].t_end)
      throw ConfigError("segments must tile [0, t_f] without gaps or overlap");
  }
  t_f_ = segments_.back().t_end;
}

const Segment& FieldSchedule::segment_at(double t) const {
  if (!(t >= 0.0 && t <= t_f_)) throw ConfigError("time " + std::to_string(t) + " outside the schedule");
  for (const auto& s : segments_)
    if (t < s.t_end) return s;
  return segments_.back();
}

Vector3 FieldSchedule::base(double t) const { return segment_at(t).field(t); }

Vector3 FieldSchedule::operator()(double t) const {
  Vector3 b = base(t);
  for (const auto& tone : tones_) b += tone.field(t);
  return b;
}

Vector3 FieldSchedule::base_derivative(double t) const {
  const Segment& s = segment_at(t);
  if (s.derivative) return s.derivative(t);
  const double h = 1e-6 * (s.t_end - s.t_start);
  const double lo = std::max(s.t_start, t - h), hi = std::min(s.t_end, t + h);
  return (s.field(hi) - s.field(lo)) / (hi - lo);
}

FieldSchedule FieldSchedule::with_noise(const NoiseTone& tone) const {
  tone.validate();
  FieldSchedule out = *this;
  out.tones_.push_back(tone);
  return out;
}

FieldSchedule FieldSchedule::without_noise() const {
  FieldSchedule out = *this;
  out.tones_.clear();
  return out;
}

FieldSchedule add_noise(const FieldSchedule& schedule, const NoiseTone& tone) { return schedule.with_noise(tone); }

double smoothstep(double u) { return u - std::sin(2 * pi * u) / (2 * pi); }
double smoothstep_derivative(double u) { return 1 - std::cos(2 * pi * u); }

namespace {

// Fourier weights of the balanced ramp. a2 = 1/2 and a1 + a3 = 1/2 fix the rate at
// both ends; a1 is the root of int_0^{pi/2} cos(angle(u)) du = 1.
constexpr double ramp_a1 = 0.088585858954391246816;
constexpr double ramp_a2 = 0.5;
constexpr double ramp_a3 = 0.5 - ramp_a1;

Segment hold(double t0, double t1, Vector3 b) {
  return {t0, t1, SegmentKind::hold, [b](double) { return b; }, [](double) { return Vector3::Zero().eval(); }};
}

Vector3 on_circle(double b, double angle) { return b * Vector3(std::sin(angle), 0.0, std::cos(angle)); }
Vector3 on_circle_rate(double b, double angle, double rate) {
  return b * rate * Vector3(std::cos(angle), 0.0, -std::sin(angle));
}

void require_positive(double v, const char* name) {
  if (!std::isfinite(v) || v <= 0) throw ConfigError(std::string(name) + " must be positive and finite");
}

}  // namespace

double balanced_ramp_angle(double u) {
  return u - ramp_a1 * std::sin(2 * u) / 2 - ramp_a2 * std::sin(4 * u) / 4 - ramp_a3 * std::sin(6 * u) / 6;
}

double balanced_ramp_rate(double u) {
  return 1 - ramp_a1 * std::cos(2 * u) - ramp_a2 * std::cos(4 * u) - ramp_a3 * std::cos(6 * u);
}

FieldSchedule static_schedule(double b, double t_f) {
  require_positive(t_f, "t_f");
  if (!std::isfinite(b)) throw ConfigError("field must be finite");
  return FieldSchedule({hold(0.0, t_f, Vector3(0, 0, b))}, true, StaticParams{b, t_f});
}

FieldSchedule pulsed_pdd_schedule(double b_t, double tau, double t_center, double t_f, ReturnMode return_mode,
                                  double t_return) {
  require_positive(tau, "tau");
  require_positive(t_f, "t_f");
  if (!std::isfinite(b_t) || !std::isfinite(t_center)) throw ConfigError("B_t and t_center must be finite");
  const double t_s = t_center - tau / 2, t_e = t_center + tau / 2;
  if (t_s < 0 || t_e > t_f) throw ConfigError("rotation window exceeds [0, t_f]");
  const double t_ret = return_mode == ReturnMode::instant ? 0.0 : (t_return < 0 ? tau / 2 : t_return);
  if (return_mode == ReturnMode::linear) {
    require_positive(t_ret, "t_return");
    if (t_e + t_ret > t_f) throw ConfigError("return leg does not fit before t_f");
  }

  std::vector<Segment> segs;
  const Vector3 up(0, 0, b_t);
  if (t_s > 0) segs.push_back(hold(0.0, t_s, up));
  segs.push_back({t_s, t_e, SegmentKind::rotation,
                  [=](double t) { return on_circle(b_t, pi * smoothstep((t - t_s) / tau)); },
                  [=](double t) {
                    const double u = (t - t_s) / tau;
                    return on_circle_rate(b_t, pi * smoothstep(u), pi * smoothstep_derivative(u) / tau);
                  }});
  double t_back = t_e;
  if (return_mode == ReturnMode::linear) {
    t_back = t_e + t_ret;
    segs.push_back({t_e, t_back, SegmentKind::axial_ramp,
                    [=](double t) { return Vector3(0, 0, b_t * (-1 + 2 * (t - t_e) / t_ret)); },
                    [=](double) { return Vector3(0, 0, 2 * b_t / t_ret); }});
  }
  if (t_back < t_f) segs.push_back(hold(t_back, t_f, up));
  return FieldSchedule(std::move(segs), true,
                       PulsedParams{b_t, tau, t_center, t_f, return_mode, t_return < 0 ? -1.0 : t_return});
}

FieldSchedule continuous_pdd_schedule(double b_t, double omega_r, double t_f, RampShape ramp) {
  require_positive(omega_r, "omega_r");
  require_positive(t_f, "t_f");
  if (!std::isfinite(b_t)) throw ConfigError("B_t must be finite");
  const double t_q = pi / (2 * omega_r);
  if (t_f < 2 * t_q * (1 - 1e-12)) throw ConfigError("t_f is shorter than the ramp-on plus ramp-off quarter periods");
  const double t_on = std::min(t_q, t_f / 2), t_off = std::max(t_f - t_q, t_f / 2);
  const double end_angle = omega_r * t_f;

  std::vector<Segment> segs;
  bool c1 = true;
  if (ramp == RampShape::balanced) {
    segs.push_back({0.0, t_on, SegmentKind::rotation,
                    [=](double t) { return on_circle(b_t, balanced_ramp_angle(omega_r * t)); },
                    [=](double t) {
                      const double u = omega_r * t;
                      return on_circle_rate(b_t, balanced_ramp_angle(u), omega_r * balanced_ramp_rate(u));
                    }});
    if (t_off > t_on)
      segs.push_back({t_on, t_off, SegmentKind::rotation, [=](double t) { return on_circle(b_t, omega_r * t); },
                      [=](double t) { return on_circle_rate(b_t, omega_r * t, omega_r); }});
    segs.push_back({t_off, t_f, SegmentKind::rotation,
                    [=](double t) { return on_circle(b_t, end_angle - balanced_ramp_angle(omega_r * (t_f - t))); },
                    [=](double t) {
                      const double v = omega_r * (t_f - t);
                      return on_circle_rate(b_t, end_angle - balanced_ramp_angle(v), omega_r * balanced_ramp_rate(v));
                    }});
  } else {
    const double sign = std::sin(omega_r * t_off) < 0 ? -1.0 : 1.0;
    c1 = std::abs(std::abs(std::sin(omega_r * t_off)) - 1.0) < 1e-9;
    segs.push_back({0.0, t_on, SegmentKind::rotation,
                    [=](double t) {
                      const double s = std::sin(omega_r * t);
                      return Vector3(b_t * s * s, 0, b_t * std::cos(omega_r * t));
                    },
                    [=](double t) {
                      const double u = omega_r * t;
                      return Vector3(b_t * omega_r * std::sin(2 * u), 0, -b_t * omega_r * std::sin(u));
                    }});
    if (t_off > t_on)
      segs.push_back({t_on, t_off, SegmentKind::rotation, [=](double t) { return on_circle(b_t, omega_r * t); },
                      [=](double t) { return on_circle_rate(b_t, omega_r * t, omega_r); }});
    segs.push_back({t_off, t_f, SegmentKind::rotation,
                    [=](double t) {
                      const double s = std::sin(omega_r * (t_f - t));
                      return Vector3(sign * b_t * s * s, 0, b_t * std::cos(omega_r * t));
                    },
                    [=](double t) {
                      const double v = omega_r * (t_f - t);
                      return Vector3(-sign * b_t * omega_r * std::sin(2 * v), 0,
                                     -b_t * omega_r * std::sin(omega_r * t));
                    }});
  }
  return FieldSchedule(std::move(segs), c1, ContinuousParams{b_t, omega_r, t_f, ramp});
}

FieldSchedule build_schedule(const ScheduleDescriptor& d) {
  return std::visit(
      [](const auto& p) -> FieldSchedule {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StaticParams>) return static_schedule(p.b, p.t_f);
        else if constexpr (std::is_same_v<T, PulsedParams>)
          return pulsed_pdd_schedule(p.b_t, p.tau, p.t_center, p.t_f, p.return_mode, p.t_return);
        else return continuous_pdd_schedule(p.b_t, p.omega_r, p.t_f, p.ramp);
      },
      d);
}

AngleTrace phi_and_epsilon(const FieldSchedule& schedule, std::size_t n, double splitting_per_gauss) {
  if (n == 0) throw ConfigError("need at least one interval");
  const double t_f = schedule.duration();
  AngleTrace out;
  out.t.resize(n + 1);
  out.phi.resize(n + 1);
  out.phi_dot.resize(n + 1);
  out.epsilon.resize(n + 1);

  auto magnitude = [&](double t) { return schedule.base(t).norm(); };
  auto quad = [&](double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(magnitude, a, b, 15, 1e-12);
  };
  // A reversal through zero puts a kink in |B| inside a segment; split there.
  auto integrate_magnitude = [&](double a, double b) {
    const Vector3 ba = schedule.base(a);
    if (ba.dot(schedule.base(b)) >= 0.0) return quad(a, b);
    double lo = a, hi = b;
    for (int it = 0; it < 60 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ba.dot(schedule.base(mid)) > 0.0 ? lo : hi) = mid;
    }
    return quad(a, lo) + quad(lo, b);
  };
  // Breakpoints where |B| may have kinks.
  std::vector<double> edges;
  for (const auto& s : schedule.segments()) edges.push_back(s.t_end);

  double prev_phi = 0.0, eps = 0.0, t_prev = 0.0;
  std::size_t edge = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = (k == n) ? t_f : t_f * static_cast<double>(k) / static_cast<double>(n);
    const Vector3 b = schedule.base(t);
    const double bmag = b.norm();
    if (std::abs(b.y()) > 1e-12 * std::max(1.0, bmag)) throw ConfigError("field leaves the xz-plane");
    const Segment& seg = schedule.segment_at(t);
    if (seg.kind == SegmentKind::rotation && bmag == 0.0)
      throw ConfigError("field vanishes inside a rotation segment; phi undefined");

    double phi = std::atan2(b.x(), b.z());
    if (k > 0) {
      double d = std::remainder(phi - prev_phi, 2 * pi);
      if (d >= pi - 1e-12) d -= 2 * pi;
      phi = prev_phi + d;
    }
    const Vector3 db = schedule.base_derivative(t);
    const double num = db.x() * b.z() - b.x() * db.z();
    out.phi_dot[k] = num == 0.0 ? 0.0 : num / b.squaredNorm();

    if (k > 0) {
      double a = t_prev;
      while (edge < edges.size() && edges[edge] <= a) ++edge;
      std::size_t e = edge;
      while (true) {
        const double b_end = (e < edges.size() && edges[e] < t) ? edges[e] : t;
        if (b_end > a) eps += integrate_magnitude(a, b_end);
        if (b_end >= t) break;
        a = b_end;
        ++e;
      }
    }
    out.t[k] = t;
    out.phi[k] = phi;
    out.epsilon[k] = splitting_per_gauss * eps;
    prev_phi = phi;
    t_prev = t;
  }
  return out;
}

void write_waveform_csv(std::ostream& os, const FieldSchedule& schedule, std::size_t n) {
  if (n == 0) throw ConfigError("need at least one interval");
  os << "t,Bx,By,Bz\n" << std::setprecision(17);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = (k == n) ? schedule.duration() : schedule.duration() * double(k) / double(n);
    const Vector3 b = schedule(t);
    os << t << ',' << b.x() << ',' << b.y() << ',' << b.z() << '\n';
  }
}

}  // namespace pdd
