#include "pdd/spin_algebra.hpp"

#include "pdd/units.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace pdd {

HalfInt HalfInt::parse(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text.empty()) throw ConfigError("empty quantum number");
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    auto num = trim(text.substr(0, slash));
    auto den = trim(text.substr(slash + 1));
    if (num.starts_with('+')) num.remove_prefix(1);
    int n = 0;
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
    if (ec != std::errc() || p != num.data() + num.size() || (den != "2" && den != "1"))
      throw ConfigError("malformed quantum number '" + std::string(text) + "'");
    return den == "2" ? from_twice(n) : HalfInt(n);
  }
  std::string owned(text);
  char* end = nullptr;
  const double v = std::strtod(owned.c_str(), &end);
  if (end != owned.c_str() + owned.size()) throw ConfigError("malformed quantum number '" + owned + "'");
  return from_double(v);
}

HalfInt HalfInt::from_double(double value) {
  const double twice = 2.0 * value;
  if (!std::isfinite(twice) || std::abs(twice - std::round(twice)) > 1e-9)
    throw ConfigError("not a multiple of 1/2: " + std::to_string(value));
  return from_twice(static_cast<int>(std::lround(twice)));
}

std::string HalfInt::str() const {
  if (twice_ % 2 == 0) return std::to_string(twice_ / 2);
  return std::to_string(twice_) + "/2";
}

std::string HyperfineLabel::str() const { return "|" + F.str() + "," + m.str() + ">"; }

namespace detail {
long double log_factorial(int n) {
  if (n < 0) throw ConfigError("negative factorial argument");
  return std::lgamma(static_cast<long double>(n) + 1.0L);
}
}  // namespace detail

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

namespace {

double projection_coefficient(HalfInt I, HalfInt J, HalfInt F) {
  const double f = F.value(), i = I.value(), j = J.value();
  if (F.twice() == 0) return 0.0;
  return (f * (f + 1) + j * (j + 1) - i * (i + 1)) / (2 * f * (f + 1));
}

SpinOperators transform(const SpinOperators& s, const Eigen::MatrixXd& c) {
  const ComplexMatrix cc = c.cast<std::complex<double>>();
  return {cc * s.x * cc.transpose(), cc * s.y * cc.transpose(), cc * s.z * cc.transpose()};
}

}  // namespace

HyperfineSystem::HyperfineSystem(HalfInt nuclear_spin, HalfInt electron_spin, double hyperfine_constant,
                                 double g_j, double g_i)
    : I_(nuclear_spin), J_(electron_spin), A_(hyperfine_constant), g_j_(g_j), g_i_(g_i) {
  if (I_.twice() < 0 || J_.twice() <= 0) throw ConfigError("spins must satisfy I >= 0, J > 0");
  if (!std::isfinite(A_) || !std::isfinite(g_j_) || !std::isfinite(g_i_))
    throw ConfigError("hyperfine constants must be finite");

  for (HalfInt F = I_ + J_; F >= abs(I_ - J_); F -= 1) {
    blocks_.push_back({F, static_cast<Eigen::Index>(labels_.size()), F.twice() + 1});
    for (HalfInt m = F; m >= -F; m -= 1) labels_.push_back({F, m});
  }

  const Eigen::Index ni = I_.twice() + 1, nj = J_.twice() + 1, n = ni * nj;
  cg_ = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& l = labels_[static_cast<std::size_t>(c)];
    for (Eigen::Index a = 0; a < ni; ++a) {
      for (Eigen::Index b = 0; b < nj; ++b) {
        const HalfInt mi = I_ - HalfInt(static_cast<int>(a));
        const HalfInt mj = J_ - HalfInt(static_cast<int>(b));
        cg_(c, a * nj + b) = clebsch_gordan(I_, J_, mi, mj, l.F, l.m);
      }
    }
  }

  const auto i_single = angular_momentum_ops(I_);
  const auto j_single = angular_momentum_ops(J_);
  const ComplexMatrix id_i = ComplexMatrix::Identity(ni, ni), id_j = ComplexMatrix::Identity(nj, nj);
  const SpinOperators i_unc{kron(i_single.x, id_j), kron(i_single.y, id_j), kron(i_single.z, id_j)};
  const SpinOperators j_unc{kron(id_i, j_single.x), kron(id_i, j_single.y), kron(id_i, j_single.z)};
  i_ops_ = transform(i_unc, cg_);
  j_ops_ = transform(j_unc, cg_);
  f_ops_ = {i_ops_.x + j_ops_.x, i_ops_.y + j_ops_.y, i_ops_.z + j_ops_.z};
}

const FBlock& HyperfineSystem::block(HalfInt F) const {
  for (const auto& b : blocks_)
    if (b.F == F) return b;
  throw ConfigError("no F = " + F.str() + " manifold in this system");
}

Eigen::Index HyperfineSystem::index_of(HalfInt F, HalfInt m) const {
  const FBlock& b = block(F);
  if (abs(m) > F || (m.twice() + F.twice()) % 2 != 0)
    throw ConfigError("no state " + HyperfineLabel{F, m}.str() + " in this system");
  return b.offset + (F - m).twice() / 2;
}

double HyperfineSystem::projection_factor(HalfInt F) const {
  block(F);
  return projection_coefficient(I_, J_, F);
}

double HyperfineSystem::block_larmor_per_gauss(HalfInt F) const {
  return units::mu_b * g_j_ * projection_factor(F);
}

SpinOperators HyperfineSystem::block_operators(HalfInt F) const {
  block(F);
  return angular_momentum_ops(F);
}

ComplexMatrix to_coupled(const HyperfineSystem& sys, const ComplexMatrix& uncoupled) {
  const ComplexMatrix c = sys.change_of_basis().cast<std::complex<double>>();
  return c * uncoupled * c.transpose();
}

ComplexMatrix to_uncoupled(const HyperfineSystem& sys, const ComplexMatrix& coupled) {
  const ComplexMatrix c = sys.change_of_basis().cast<std::complex<double>>();
  return c.transpose() * coupled * c;
}

namespace {

ComplexMatrix dot(const Vector3& b, const SpinOperators& s) { return b.x() * s.x + b.y() * s.y + b.z() * s.z; }

ComplexMatrix i_dot_j(const HyperfineSystem& sys) {
  const auto& i = sys.nuclear();
  const auto& j = sys.electron();
  return i.x * j.x + i.y * j.y + i.z * j.z;
}

}  // namespace

ComplexMatrix hyperfine_hamiltonian(const HyperfineSystem& sys, double b0) {
  if (!std::isfinite(b0)) throw ConfigError("field must be finite");
  return zeeman_hamiltonian(sys, Vector3(0, 0, b0), ZeemanMode::full);
}

ComplexMatrix zeeman_hamiltonian(const HyperfineSystem& sys, const Vector3& b, ZeemanMode mode) {
  if (!b.allFinite()) throw ConfigError("field must be finite");
  if (mode == ZeemanMode::full) {
    ComplexMatrix h = (0.5 * sys.hyperfine_constant()) * i_dot_j(sys);
    h += units::mu_b * (sys.g_j() * dot(b, sys.electron()) + sys.g_i() * dot(b, sys.nuclear()));
    return h;
  }
  const ComplexMatrix full = units::mu_b * sys.g_j() * dot(b, sys.electron());
  ComplexMatrix h = ComplexMatrix::Zero(sys.dim(), sys.dim());
  for (const auto& blk : sys.blocks())
    h.block(blk.offset, blk.offset, blk.size, blk.size) = full.block(blk.offset, blk.offset, blk.size, blk.size);
  return h;
}

ComplexMatrix block_zeeman_hamiltonian(const HyperfineSystem& sys, HalfInt F, const Vector3& b) {
  if (!b.allFinite()) throw ConfigError("field must be finite");
  const auto s = sys.block_operators(F);
  return sys.block_larmor_per_gauss(F) * dot(b, s);
}

ComplexMatrix exp_hermitian(const ComplexMatrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  const Eigen::VectorXd& w = es.eigenvalues();
  const ComplexMatrix& v = es.eigenvectors();
  Eigen::VectorXcd phase(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) phase(k) = std::polar(1.0, -w(k) * t);
  return v * phase.asDiagonal() * v.adjoint();
}

ComplexMatrix rotation_about_y(const SpinOperators& s, double phi) {
  if (!std::isfinite(phi)) throw ConfigError("rotation angle must be finite");
  return exp_hermitian(s.y, phi);
}

ComplexMatrix rotation_about_y(const HyperfineSystem& sys, double phi) { return rotation_about_y(sys.total(), phi); }

SpinOperators rotate_operator(const SpinOperators& f, double phi) {
  if (f.x.rows() != f.z.rows() || f.y.rows() != f.z.rows() || f.x.cols() != f.z.cols() ||
      f.y.cols() != f.z.cols())
    throw ConfigError("operator triple has mismatched dimensions");
  const double c = std::cos(phi), s = std::sin(phi);
  return {c * f.x + s * f.z, f.y, c * f.z - s * f.x};
}

SpinOperators conjugate_operator(const SpinOperators& f, const ComplexMatrix& u) {
  if (u.rows() != f.dim()) throw ConfigError("rotation and operators have different dimensions");
  return {u.adjoint() * f.x * u, u.adjoint() * f.y * u, u.adjoint() * f.z * u};
}

double hermiticity_error(const ComplexMatrix& h) { return (h - h.adjoint()).cwiseAbs().maxCoeff(); }

double unitarity_error(const ComplexMatrix& u) {
  return (u.adjoint() * u - ComplexMatrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

}  // namespace pdd
