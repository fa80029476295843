#pragma once

// Angular-momentum algebra and hyperfine Hamiltonians in the coupled |F, m_F> basis.
//
// Basis ordering is fixed: F descending, and m_F descending inside each F block.
// The uncoupled basis |m_I, m_J> is ordered m_I descending, then m_J descending.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "pdd/errors.hpp"
#include "pdd/half_int.hpp"

namespace pdd {

template <typename Real>
using ComplexMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using ComplexVectorT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

using ComplexMatrix = ComplexMatrixT<double>;
using ComplexVector = ComplexVectorT<double>;
using Vector3 = Eigen::Vector3d;

/// Cartesian triple of operators on a common basis.
template <typename Real = double>
struct SpinTriple {
  ComplexMatrixT<Real> x, y, z;

  Eigen::Index dim() const { return z.rows(); }
};

using SpinOperators = SpinTriple<double>;

/// Spin-j matrices in the |j, m> basis with m descending.
template <typename Real = double>
SpinTriple<Real> angular_momentum_ops(HalfInt j) {
  if (j.twice() < 0) throw ConfigError("spin must be non-negative, got " + j.str());
  using C = std::complex<Real>;
  const Eigen::Index n = j.twice() + 1;
  const Real jj = Real(j.value());
  SpinTriple<Real> s{ComplexMatrixT<Real>::Zero(n, n), ComplexMatrixT<Real>::Zero(n, n),
                     ComplexMatrixT<Real>::Zero(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Real m = jj - Real(k);
    s.z(k, k) = C(m, 0);
    if (k + 1 < n) {
      // <m|J+|m-1> = sqrt(j(j+1) - m(m-1))
      const Real up = std::sqrt(jj * (jj + 1) - m * (m - 1));
      s.x(k, k + 1) = s.x(k + 1, k) = C(up / 2, 0);
      s.y(k, k + 1) = C(0, -up / 2);
      s.y(k + 1, k) = C(0, up / 2);
    }
  }
  return s;
}

namespace detail {
// log(n!) in extended precision; adequate for the spins met in atomic physics.
long double log_factorial(int n);
}  // namespace detail

/// Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M> with the Condon-Shortley phase.
/// Returns zero for selection-rule violations (M != m1 + m2, triangle, |m| > j).
template <typename Real = double>
Real clebsch_gordan(HalfInt j1, HalfInt j2, HalfInt m1, HalfInt m2, HalfInt J, HalfInt M) {
  for (HalfInt s : {j1, j2, J})
    if (s.twice() < 0) throw ConfigError("negative spin in Clebsch-Gordan coefficient");
  if ((j1.twice() + m1.twice()) % 2 != 0 || (j2.twice() + m2.twice()) % 2 != 0 ||
      (J.twice() + M.twice()) % 2 != 0)
    throw ConfigError("projection is not congruent with its spin");
  if ((j1.twice() + j2.twice() + J.twice()) % 2 != 0) return Real(0);
  if (M != m1 + m2) return Real(0);
  if (abs(m1) > j1 || abs(m2) > j2 || abs(M) > J) return Real(0);
  if (J > j1 + j2 || J < abs(j1 - j2)) return Real(0);

  // Racah's closed form. All factorial arguments are integers by the parity checks above.
  auto i = [](HalfInt h) { return h.twice() / 2; };
  const int a = i(j1 + j2 - J), b = i(j1 - j2 + J), c = i(-j1 + j2 + J), d = i(j1 + j2 + J) + 1;
  using detail::log_factorial;
  const long double log_pref =
      0.5L * (std::log(static_cast<long double>(J.twice() + 1)) + log_factorial(a) +
              log_factorial(b) + log_factorial(c) - log_factorial(d) + log_factorial(i(j1 + m1)) +
              log_factorial(i(j1 - m1)) + log_factorial(i(j2 + m2)) + log_factorial(i(j2 - m2)) +
              log_factorial(i(J + M)) + log_factorial(i(J - M)));
  const int k_min = std::max({0, i(j2 - J - m1), i(j1 - J + m2)});
  const int k_max = std::min({a, i(j1 - m1), i(j2 + m2)});
  long double sum = 0;
  for (int k = k_min; k <= k_max; ++k) {
    const long double term =
        std::exp(log_pref - log_factorial(k) - log_factorial(a - k) - log_factorial(i(j1 - m1) - k) -
                 log_factorial(i(j2 + m2) - k) - log_factorial(i(J - j2 + m1) + k) -
                 log_factorial(i(J - j1 - m2) + k));
    sum += (k % 2 == 0) ? term : -term;
  }
  return static_cast<Real>(sum);
}

/// Label of a coupled basis state.
struct HyperfineLabel {
  HalfInt F;
  HalfInt m;

  bool operator==(const HyperfineLabel&) const = default;
  std::string str() const;
};

/// Contiguous range of the coupled basis sharing one F.
struct FBlock {
  HalfInt F;
  Eigen::Index offset;
  Eigen::Index size;
};

enum class ZeemanMode {
  projected,  ///< Intra-F matrix elements of g_J B.J only (no I.J, no g_I term).
  full        ///< (A/2) I.J + mu_B (g_J B.J + g_I B.I), every matrix element kept.
};

/// Ion species description plus its coupled basis and operator matrices.
///
/// The object is immutable after construction; all operator matrices are
/// computed once in the constructor and returned by const reference.
class HyperfineSystem {
 public:
  /// hyperfine_constant is A in rad/us with H_hf = (A/2) I.J.
  HyperfineSystem(HalfInt nuclear_spin, HalfInt electron_spin, double hyperfine_constant,
                  double g_j, double g_i);

  HalfInt nuclear_spin() const { return I_; }
  HalfInt electron_spin() const { return J_; }
  double hyperfine_constant() const { return A_; }
  double g_j() const { return g_j_; }
  double g_i() const { return g_i_; }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(labels_.size()); }
  const std::vector<HyperfineLabel>& basis() const { return labels_; }
  const std::vector<FBlock>& blocks() const { return blocks_; }
  const FBlock& block(HalfInt F) const;

  /// Index of |F, m> in the coupled basis; throws ConfigError for unknown labels.
  Eigen::Index index_of(HalfInt F, HalfInt m) const;
  Eigen::Index index_of(const HyperfineLabel& l) const { return index_of(l.F, l.m); }

  /// Orthogonal matrix C with C(coupled, uncoupled) = <m_I m_J | F m_F>.
  const Eigen::MatrixXd& change_of_basis() const { return cg_; }

  /// Electron and nuclear spin operators expressed in the coupled basis.
  const SpinOperators& electron() const { return j_ops_; }
  const SpinOperators& nuclear() const { return i_ops_; }
  /// Total F = I + J in the coupled basis (block diagonal).
  const SpinOperators& total() const { return f_ops_; }

  /// Projection factor c_F with P_F J P_F = c_F F inside block F, so g_F = c_F g_J.
  double projection_factor(HalfInt F) const;

  /// Zeeman splitting per Gauss between adjacent m inside block F, signed, rad/(us G).
  double block_larmor_per_gauss(HalfInt F) const;

  /// Spin-F matrices of one block (same ordering as the coupled basis).
  SpinOperators block_operators(HalfInt F) const;

 private:
  HalfInt I_, J_;
  double A_, g_j_, g_i_;
  std::vector<HyperfineLabel> labels_;
  std::vector<FBlock> blocks_;
  Eigen::MatrixXd cg_;
  SpinOperators j_ops_, i_ops_, f_ops_;
};

/// Uncoupled -> coupled: O_c = C O_u C^T.
ComplexMatrix to_coupled(const HyperfineSystem& sys, const ComplexMatrix& uncoupled);
/// Coupled -> uncoupled: O_u = C^T O_c C.
ComplexMatrix to_uncoupled(const HyperfineSystem& sys, const ComplexMatrix& coupled);

/// (A/2) I.J + mu_B B0 (g_J J_z + g_I I_z) in the coupled basis, rad/us.
ComplexMatrix hyperfine_hamiltonian(const HyperfineSystem& sys, double b0);

/// Zeeman Hamiltonian for a vector field in Gauss, rad/us.
ComplexMatrix zeeman_hamiltonian(const HyperfineSystem& sys, const Vector3& b,
                                 ZeemanMode mode = ZeemanMode::projected);

/// Projected Zeeman Hamiltonian restricted to a single F block.
ComplexMatrix block_zeeman_hamiltonian(const HyperfineSystem& sys, HalfInt F, const Vector3& b);

/// exp(-i phi S_y) for an arbitrary Hermitian generator triple.
ComplexMatrix rotation_about_y(const SpinOperators& s, double phi);

/// exp(-i phi F_y) with F = I + J the total angular momentum of the system.
///
/// With this convention the field B (sin phi, 0, cos phi) gives
/// zeeman_hamiltonian(R) = U zeeman_hamiltonian(B z) U^dagger.
ComplexMatrix rotation_about_y(const HyperfineSystem& sys, double phi);

/// Polarization rotation of an operator triple under exp(-i phi S_y):
/// (Fx cos + Fz sin, Fy, Fz cos - Fx sin).
SpinOperators rotate_operator(const SpinOperators& f, double phi);

/// Same as rotate_operator but computed by explicit conjugation U^dagger F U.
SpinOperators conjugate_operator(const SpinOperators& f, const ComplexMatrix& u);

/// exp(-i t H) for Hermitian H, via its eigendecomposition.
ComplexMatrix exp_hermitian(const ComplexMatrix& h, double t);

/// Max-norm distance from Hermiticity.
double hermiticity_error(const ComplexMatrix& h);

/// Max-norm of U^dagger U - 1.
double unitarity_error(const ComplexMatrix& u);

/// Kronecker product of two dense matrices.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace pdd
