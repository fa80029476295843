#include <array>
#include <cmath>
#include <string>

#include "pdd/pdd_analysis.hpp"

namespace pdd {

namespace {

Vector3 segment_field(const Segment& seg, double t) { return seg.field(t); }

Vector3 segment_rate(const Segment& seg, double t) {
  if (seg.derivative) return seg.derivative(t);
  const double h = 1e-6 * (seg.t_end - seg.t_start);
  const double lo = std::max(seg.t_start, t - h), hi = std::min(seg.t_end, t + h);
  return (seg.field(hi) - seg.field(lo)) / (hi - lo);
}

// Integration state: eps, frame angle, C = int phi_dot cos eps, S = int phi_dot sin eps, theta_z,
// dressed eps, and the first-order integrals taken with the dressed phase.
using State = std::array<double, 8>;

State add(const State& y, const State& k, double h) {
  State r;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] + h * k[i];
  return r;
}

struct FrameRates {
  const Segment& seg;
  double gamma;
  double sign;  // orientation of the field relative to the frame axis
  bool rotating;

  State operator()(double t, const State& y) const {
    const Vector3 b = segment_field(seg, t);
    if (std::abs(b.y()) > 1e-12 * std::max(1.0, b.norm()))
      throw ConfigError("field leaves the xz-plane at t = " + std::to_string(t));
    double phi_dot = 0.0, b_par;
    if (rotating) {
      const Vector3 db = segment_rate(seg, t);
      const double num = db.x() * b.z() - b.x() * db.z();
      const double r2 = b.x() * b.x() + b.z() * b.z();
      if (num != 0.0) {
        if (r2 == 0.0) throw ConfigError("field angle undefined: |B| = 0 at t = " + std::to_string(t));
        phi_dot = num / r2;
      }
      b_par = sign * std::sqrt(r2);
    } else {
      b_par = b.z() * std::cos(y[1]) + b.x() * std::sin(y[1]);
    }
    const double ce = std::cos(y[0]), se = std::sin(y[0]);
    const double w = gamma * b_par;
    const double dressed = w == 0.0 ? 0.0 : std::copysign(std::hypot(w, phi_dot), w);
    const double cd = std::cos(y[5]), sd = std::sin(y[5]);
    return {w,  phi_dot, phi_dot * ce, phi_dot * se, -0.5 * phi_dot * (ce * y[3] - se * y[2]),
            dressed, phi_dot * cd, phi_dot * sd};
  }
};

}  // namespace

MagnusEstimate magnus_diabatic_estimate(const FieldSchedule& schedule, double splitting_per_gauss,
                                        double phase_step) {
  if (!(phase_step > 0)) throw ConfigError("phase_step must be positive");
  State y{};
  const auto& segs = schedule.segments();
  if (!segs.empty()) {
    const Vector3 b0 = segs.front().field(segs.front().t_start);
    if (b0.norm() > 0) y[1] = std::atan2(b0.x(), b0.z());
  }
  for (const Segment& seg : segs) {
    const double len = seg.t_end - seg.t_start;
    if (len <= 0) continue;
    const bool rotating = seg.kind == SegmentKind::rotation || seg.kind == SegmentKind::custom;
    double sign = 1.0;
    std::size_t n = 1;
    if (rotating) {
      const Vector3 b = segment_field(seg, seg.t_start);
      if (b.norm() == 0.0) throw ConfigError("field angle undefined at the start of a rotation segment");
      sign = (b.z() * std::cos(y[1]) + b.x() * std::sin(y[1])) < 0 ? -1.0 : 1.0;
      // Step count from the largest Zeeman and rotation rates sampled on the segment.
      double rate = 0.0;
      constexpr int probes = 64;
      for (int k = 0; k <= probes; ++k) {
        const double t = seg.t_start + len * k / probes;
        const Vector3 bt = segment_field(seg, t), db = segment_rate(seg, t);
        const double r2 = bt.squaredNorm();
        const double pd = r2 > 0 ? std::abs(db.x() * bt.z() - bt.x() * db.z()) / r2 : 0.0;
        rate = std::max({rate, std::abs(splitting_per_gauss) * bt.norm(), pd});
      }
      n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(rate * len / phase_step)));
    }
    const FrameRates f{seg, splitting_per_gauss, sign, rotating};
    const double h = len / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = seg.t_start + h * static_cast<double>(k);
      const State k1 = f(t, y);
      const State k2 = f(t + h / 2, add(y, k1, h / 2));
      const State k3 = f(t + h / 2, add(y, k2, h / 2));
      const State k4 = f(t + h, add(y, k3, h));
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    }
  }
  MagnusEstimate e;
  e.epsilon_total = y[0];
  e.phi_total = y[1];
  e.first_order = {y[2], y[3]};
  e.jz_shift = y[4];
  e.dressed_first_order = {y[6], y[7]};
  return e;
}

double magnus_leakage_estimate(const HyperfineSystem& sys, const FieldSchedule& schedule, const ComplexVector& psi0,
                               const std::vector<HyperfineLabel>& subspace, double phase_step) {
  if (psi0.size() != sys.dim()) throw ConfigError("state has the wrong dimension");
  std::vector<bool> kept(static_cast<std::size_t>(sys.dim()), false);
  for (const auto& l : subspace) kept[static_cast<std::size_t>(sys.index_of(l))] = true;

  double total = 0.0;
  for (HalfInt F : support_blocks(sys, psi0)) {
    const FBlock& blk = sys.block(F);
    const MagnusEstimate est = magnus_diabatic_estimate(schedule, sys.block_larmor_per_gauss(F), phase_step);
    const SpinOperators s = sys.block_operators(F);
    const ComplexMatrix a = est.dressed_first_order.imag() * s.x + est.dressed_first_order.real() * s.y;
    const ComplexVector v = a * psi0.segment(blk.offset, blk.size);
    for (Eigen::Index k = 0; k < blk.size; ++k)
      if (!kept[static_cast<std::size_t>(blk.offset + k)]) total += std::norm(v(k));
  }
  return total;
}

ComplexMatrix magnus_block_propagator(const HyperfineSystem& sys, const FieldSchedule& schedule, HalfInt F,
                                      bool with_jz_shift, double phase_step) {
  const MagnusEstimate est = magnus_diabatic_estimate(schedule, sys.block_larmor_per_gauss(F), phase_step);
  const SpinOperators s = sys.block_operators(F);
  const double angle = est.epsilon_total + (with_jz_shift ? est.jz_shift : 0.0);
  ComplexMatrix phase = ComplexMatrix::Zero(s.dim(), s.dim());
  for (Eigen::Index k = 0; k < s.dim(); ++k) phase(k, k) = std::polar(1.0, -angle * s.z(k, k).real());
  return rotation_about_y(s, est.phi_total) * phase;
}

}  // namespace pdd
