#pragma once

// Time-dependent quantization-field trajectories B(t) in Gauss over [0, t_f] (us).

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pdd/spin_algebra.hpp"
#include "pdd/units.hpp"

namespace pdd {

/// Weak classical field B_e cos(omega_e t + theta) along `polarization`.
struct NoiseTone {
  double amplitude = 0.0;          ///< Gauss
  double angular_frequency = 0.0;  ///< rad/us
  double phase = 0.0;              ///< rad
  Vector3 polarization = Vector3::UnitZ();

  void validate() const;
  Vector3 field(double t) const;
};

enum class SegmentKind {
  hold,        ///< constant field
  rotation,    ///< field direction rotates in the xz-plane
  axial_ramp,  ///< field stays on the z-axis while its z-component changes
  custom
};

struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  SegmentKind kind = SegmentKind::custom;
  std::function<Vector3(double)> field;
  /// Optional analytic dB/dt; a central difference is used when absent.
  std::function<Vector3(double)> derivative;
};

enum class ReturnMode { instant, linear };

struct StaticParams {
  double b = 0.0;  ///< field along +z, Gauss
  double t_f = 0.0;
};

struct PulsedParams {
  double b_t = 0.0;
  double tau = 0.0;
  double t_center = 0.0;
  double t_f = 0.0;
  ReturnMode return_mode = ReturnMode::linear;
  double t_return = -1.0;  ///< linear return duration; negative selects tau / 2
};

enum class RampShape {
  balanced,  ///< constant-magnitude ramp whose toggling average matches a full circle
  sin2       ///< B_x = B_t sin^2(omega_r t) with B_z = B_t cos(omega_r t)
};

struct ContinuousParams {
  double b_t = 0.0;
  double omega_r = 0.0;
  double t_f = 0.0;
  RampShape ramp = RampShape::balanced;
};

/// Constructor parameters retained by a schedule so it can be serialized.
using ScheduleDescriptor = std::variant<StaticParams, PulsedParams, ContinuousParams>;

/// Piecewise field trajectory plus additive noise tones. Immutable once built.
class FieldSchedule {
 public:
  FieldSchedule(std::vector<Segment> segments, bool c1_at_boundaries,
                std::optional<ScheduleDescriptor> descriptor = std::nullopt);

  double duration() const { return t_f_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<NoiseTone>& tones() const { return tones_; }
  const std::optional<ScheduleDescriptor>& descriptor() const { return descriptor_; }
  bool c1_at_boundaries() const { return c1_; }

  /// Total field (base plus tones) at time t in [0, t_f].
  Vector3 operator()(double t) const;
  /// Noise-free field.
  Vector3 base(double t) const;
  /// dB/dt of the noise-free field, one-sided at segment edges.
  Vector3 base_derivative(double t) const;
  /// Segment containing t (the later one at shared boundaries).
  const Segment& segment_at(double t) const;

  /// Copy of this schedule with one more tone.
  FieldSchedule with_noise(const NoiseTone& tone) const;
  /// Copy of this schedule with every tone removed.
  FieldSchedule without_noise() const;

 private:
  std::vector<Segment> segments_;
  std::vector<NoiseTone> tones_;
  std::optional<ScheduleDescriptor> descriptor_;
  bool c1_;
  double t_f_;
};

FieldSchedule static_schedule(double b, double t_f);

/// Spin-echo by field rotation: +z -> -z over `tau` centered at `t_center`, then an
/// on-axis return to +z.
FieldSchedule pulsed_pdd_schedule(double b_t, double tau, double t_center, double t_f,
                                  ReturnMode return_mode = ReturnMode::linear, double t_return = -1.0);

/// Continuous rotation B_t (sin omega_r t, 0, cos omega_r t) with quarter-period ramps.
FieldSchedule continuous_pdd_schedule(double b_t, double omega_r, double t_f,
                                      RampShape ramp = RampShape::balanced);

FieldSchedule build_schedule(const ScheduleDescriptor& d);

FieldSchedule add_noise(const FieldSchedule& schedule, const NoiseTone& tone);

/// Smooth step s(u) = u - sin(2 pi u) / (2 pi) on [0, 1] with s' = 0 at both ends.
double smoothstep(double u);
double smoothstep_derivative(double u);

/// Ramp-on angle for the balanced continuous ramp as a function of u = omega_r t on
/// [0, pi/2]: matches angle, rate and curvature of the bulk circle at u = pi/2, starts
/// with zero rate and curvature, and integrates cos(angle) to exactly 1.
double balanced_ramp_angle(double u);
double balanced_ramp_rate(double u);

struct AngleTrace {
  std::vector<double> t;
  std::vector<double> phi;      ///< rad, unwrapped with phi(0) = atan2(Bx, Bz)
  std::vector<double> phi_dot;  ///< rad/us
  std::vector<double> epsilon;  ///< rad, (mu_B g / hbar) int_0^t |B|
};

/// Field angle in the xz-plane and accumulated Zeeman phase sampled on `n + 1`
/// uniform points. `splitting_per_gauss` is the rad/(us G) rate that multiplies |B| in
/// epsilon (mu_B g_J by default). On-axis sign reversals show up as a phi jump of -pi.
AngleTrace phi_and_epsilon(const FieldSchedule& schedule, std::size_t n,
                           double splitting_per_gauss = units::mu_b * units::g_electron);

/// Writes `t,Bx,By,Bz` rows on `n + 1` uniform samples.
void write_waveform_csv(std::ostream& os, const FieldSchedule& schedule, std::size_t n);

}  // namespace pdd
