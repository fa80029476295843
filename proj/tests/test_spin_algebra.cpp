#include "doctest.h"

#include <unsupported/Eigen/KroneckerProduct>

#include "oracles.hpp"
#include "pdd/spin_algebra.hpp"
#include "pdd/units.hpp"

using namespace pdd;

namespace {

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("spin-1/2 matrices are half the Pauli matrices") {
  const auto s = angular_momentum_ops(half);
  ComplexMatrix sx(2, 2), sy(2, 2), sz(2, 2);
  const std::complex<double> i(0, 1);
  sx << 0, 1, 1, 0;
  sy << 0, -i, i, 0;
  sz << 1, 0, 0, -1;
  CHECK(max_abs(s.x - sx / 2) < 1e-15);
  CHECK(max_abs(s.y - sy / 2) < 1e-15);
  CHECK(max_abs(s.z - sz / 2) < 1e-15);
}

TEST_CASE("spin-3/2 J_z spectrum") {
  const auto s = angular_momentum_ops(HalfInt::from_twice(3));
  const double expected[] = {1.5, 0.5, -0.5, -1.5};
  for (int k = 0; k < 4; ++k) CHECK(s.z(k, k).real() == doctest::Approx(expected[k]));
}

TEST_CASE("commutation relations and Casimir for j up to 4") {
  const std::complex<double> i(0, 1);
  for (int tj = 0; tj <= 8; ++tj) {
    CAPTURE(tj);
    const auto s = angular_momentum_ops(HalfInt::from_twice(tj));
    const double j = tj / 2.0;
    CHECK(max_abs(s.x * s.y - s.y * s.x - i * s.z) < 1e-12);
    CHECK(max_abs(s.y * s.z - s.z * s.y - i * s.x) < 1e-12);
    CHECK(max_abs(s.z * s.x - s.x * s.z - i * s.y) < 1e-12);
    const ComplexMatrix c = s.x * s.x + s.y * s.y + s.z * s.z;
    CHECK(max_abs(c - j * (j + 1) * ComplexMatrix::Identity(s.dim(), s.dim())) < 1e-12);
  }
}

TEST_CASE("negative spin is rejected") {
  CHECK_THROWS_AS(angular_momentum_ops(HalfInt::from_twice(-1)), ConfigError);
}

TEST_CASE("Clebsch-Gordan special values") {
  const HalfInt h = half, h3 = HalfInt::from_twice(3);
  CHECK(clebsch_gordan(h3, h, h3, h, HalfInt(2), HalfInt(2)) == doctest::Approx(1.0));
  CHECK(std::abs(clebsch_gordan(h, h, h, -h, HalfInt(0), HalfInt(0))) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(clebsch_gordan(h, h, h, h, HalfInt(0), HalfInt(0)) == 0.0);  // M mismatch
  CHECK(clebsch_gordan(h, h, h, -h, HalfInt(2), HalfInt(0)) == 0.0);  // triangle
}

TEST_CASE("Clebsch-Gordan coefficients agree with lowering-operator construction") {
  const std::pair<int, int> cases[] = {{3, 1}, {1, 1}, {2, 2}, {3, 2}, {7, 1}, {4, 3}};
  for (auto [t1, t2] : cases) {
    CAPTURE(t1);
    CAPTURE(t2);
    const double j1 = t1 / 2.0, j2 = t2 / 2.0;
    const auto states = oracle::coupled_by_lowering(j1, j2);
    const int n2 = t2 + 1;
    double worst = 0;
    for (const auto& [key, vec] : states) {
      for (Eigen::Index idx = 0; idx < vec.size(); ++idx) {
        const int k1 = static_cast<int>(idx) / n2, k2 = static_cast<int>(idx) % n2;
        const HalfInt m1 = HalfInt::from_twice(t1 - 2 * k1), m2 = HalfInt::from_twice(t2 - 2 * k2);
        const double cg = clebsch_gordan(HalfInt::from_twice(t1), HalfInt::from_twice(t2), m1, m2,
                                         HalfInt::from_twice(key.first), HalfInt::from_twice(key.second));
        worst = std::max(worst, std::abs(cg - vec(idx).real()) + std::abs(vec(idx).imag()));
      }
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("coupled basis ordering and change of basis") {
  const auto& sys = oracle::barium();
  REQUIRE(sys.dim() == 8);
  CHECK(sys.index_of(HalfInt(2), HalfInt(2)) == 0);
  CHECK(sys.index_of(HalfInt(1), HalfInt(1)) == 5);
  CHECK(sys.index_of(HalfInt(1), HalfInt(0)) == 6);
  CHECK(sys.index_of(HalfInt(1), HalfInt(-1)) == 7);
  CHECK_THROWS_AS(sys.index_of(HalfInt(1), HalfInt(2)), ConfigError);
  const Eigen::MatrixXd& c = sys.change_of_basis();
  CHECK((c * c.transpose() - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.transpose() * c - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("total F is block diagonal with the right Casimir") {
  const auto& sys = oracle::barium();
  const auto& f = sys.total();
  const ComplexMatrix c = f.x * f.x + f.y * f.y + f.z * f.z;
  for (const auto& blk : sys.blocks()) {
    const double F = blk.F.value();
    for (Eigen::Index r = 0; r < sys.dim(); ++r)
      for (Eigen::Index k = blk.offset; k < blk.offset + blk.size; ++k) {
        const bool inside = r >= blk.offset && r < blk.offset + blk.size;
        const std::complex<double> expect = (inside && r == k) ? F * (F + 1) : 0.0;
        CHECK(std::abs(c(r, k) - expect) < 1e-12);
      }
  }
}

TEST_CASE("zero-field hyperfine spectrum has two degenerate manifolds") {
  const auto& sys = oracle::barium();
  const Eigen::VectorXd e = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(hyperfine_hamiltonian(sys, 0.0)).eigenvalues();
  for (int k = 1; k < 3; ++k) CHECK(e(k) == doctest::Approx(e(0)).epsilon(1e-12));
  for (int k = 4; k < 8; ++k) CHECK(e(k) == doctest::Approx(e(3)).epsilon(1e-12));
  CHECK(e(3) - e(0) == doctest::Approx(sys.hyperfine_constant()).epsilon(1e-12));
}

TEST_CASE("full Hamiltonian matches Breit-Rabi") {
  for (const char* name : {"ba137", "yb171", "be9", "ca43"}) {
    const HyperfineSystem sys = SpeciesTable::builtin().get(name).system();
    for (double b : {0.0, 1.0, 10.0, 250.0, 3000.0}) {
      CAPTURE(name);
      CAPTURE(b);
      const Eigen::VectorXd e =
          Eigen::SelfAdjointEigenSolver<ComplexMatrix>(hyperfine_hamiltonian(sys, b)).eigenvalues();
      const auto ref = oracle::breit_rabi(sys.nuclear_spin().value(), sys.hyperfine_constant(), sys.g_j(), sys.g_i(),
                                          units::mu_b, b);
      REQUIRE(ref.size() == static_cast<std::size_t>(e.size()));
      for (std::size_t k = 0; k < ref.size(); ++k)
        CHECK(std::abs(e(static_cast<Eigen::Index>(k)) - ref[k]) <= 1e-9 * std::max(1.0, std::abs(ref[k])));
    }
  }
}

TEST_CASE("hyperfine Hamiltonian commutes with total F_z") {
  const auto& sys = oracle::barium();
  const ComplexMatrix h = hyperfine_hamiltonian(sys, 37.0);
  const ComplexMatrix& fz = sys.total().z;
  CHECK(max_abs(h * fz - fz * h) < 1e-12 * max_abs(h));
}

TEST_CASE("projected Zeeman slopes follow the Lande factor") {
  const auto& sys = oracle::barium();
  const double b0 = 3.0;
  const ComplexMatrix h = zeeman_hamiltonian(sys, Vector3(0, 0, b0));
  CHECK(max_abs(h - ComplexMatrix(h.diagonal().asDiagonal())) < 1e-15);
  for (const auto& l : sys.basis()) {
    const double g_f = oracle::lande_projected(1.5, l.F.value(), sys.g_j());
    const double expect = g_f * units::mu_b * b0 * l.m.value();
    CHECK(h(sys.index_of(l), sys.index_of(l)).real() == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(max_abs(zeeman_hamiltonian(sys, Vector3::Zero())) == 0.0);
}

TEST_CASE("rotated field equals the conjugated axial Hamiltonian") {
  const auto& sys = oracle::barium();
  for (auto mode : {ZeemanMode::projected, ZeemanMode::full}) {
    for (double phi : {0.3, 1.2, units::pi / 2, 2.9, -0.7}) {
      const double b = 4.0;
      const ComplexMatrix u = rotation_about_y(sys, phi);
      const ComplexMatrix axial = zeeman_hamiltonian(sys, Vector3(0, 0, b), mode);
      const ComplexMatrix rotated = zeeman_hamiltonian(sys, Vector3(b * std::sin(phi), 0, b * std::cos(phi)), mode);
      CHECK(max_abs(rotated - u * axial * u.adjoint()) < 1e-12 * std::max(1.0, max_abs(axial)));
    }
  }
}

TEST_CASE("rotation about y: identity, composition, unitarity") {
  const auto& sys = oracle::barium();
  CHECK(max_abs(rotation_about_y(sys, 0.0) - ComplexMatrix::Identity(8, 8)) < 1e-15);
  const ComplexMatrix a = rotation_about_y(sys, 0.4), b = rotation_about_y(sys, 1.1);
  CHECK(max_abs(a * b - rotation_about_y(sys, 1.5)) < 1e-12);
  CHECK(unitarity_error(a) < 1e-12);
}

TEST_CASE("pi rotation maps m to -m inside F = 1") {
  const auto& sys = oracle::barium();
  const ComplexMatrix u = rotation_about_y(sys.block_operators(HalfInt(1)), units::pi);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) CHECK(std::norm(u(r, c)) == doctest::Approx(r + c == 2 ? 1.0 : 0.0));
}

TEST_CASE("2 pi rotation is -1 on a half-integer spin") {
  for (int tj : {1, 3, 5}) {
    const auto s = angular_momentum_ops(HalfInt::from_twice(tj));
    const ComplexMatrix u = rotation_about_y(s, 2 * units::pi);
    // Independent check through the trace and determinant of the exponential.
    CHECK(std::abs(u.trace() + static_cast<double>(tj + 1)) < 1e-12);
    CHECK(std::abs(u.determinant() - std::pow(-1.0, tj + 1)) < 1e-12);
    CHECK(max_abs(u + ComplexMatrix::Identity(tj + 1, tj + 1)) < 1e-12);
  }
}

TEST_CASE("operator rotation agrees with explicit conjugation") {
  const auto& sys = oracle::barium();
  const auto& f = sys.total();
  for (double phi : {0.0, units::pi / 2, units::pi, 0.77}) {
    const auto r = rotate_operator(f, phi);
    const auto c = conjugate_operator(f, rotation_about_y(sys, phi));
    CHECK(max_abs(r.x - c.x) < 1e-12);
    CHECK(max_abs(r.y - c.y) < 1e-12);
    CHECK(max_abs(r.z - c.z) < 1e-12);
  }
  const auto flip = rotate_operator(f, units::pi);
  CHECK(max_abs(flip.x + f.x) < 1e-12);
  CHECK(max_abs(flip.y - f.y) < 1e-12);
  CHECK(max_abs(flip.z + f.z) < 1e-12);
}

TEST_CASE("exp_hermitian against a Taylor series") {
  const auto& sys = oracle::barium();
  const ComplexMatrix h = zeeman_hamiltonian(sys, Vector3(0.3, 0.0, 0.2), ZeemanMode::full) * 1e-4;
  ComplexMatrix term = ComplexMatrix::Identity(8, 8), sum = term;
  const double t = 0.7;
  for (int k = 1; k < 40; ++k) {
    term = term * h * std::complex<double>(0, -t / k);
    sum += term;
  }
  CHECK(max_abs(exp_hermitian(h, t) - sum) < 1e-13);
}

TEST_CASE("coupled/uncoupled transforms are inverse") {
  const auto& sys = oracle::barium();
  const ComplexMatrix op = sys.electron().x + 2.0 * sys.nuclear().z;
  CHECK(max_abs(to_coupled(sys, to_uncoupled(sys, op)) - op) < 1e-12);
  CHECK(hermiticity_error(op) < 1e-15);
}

TEST_CASE("kron matches Eigen's Kronecker product") {
  const ComplexMatrix a = ComplexMatrix::Random(2, 3), b = ComplexMatrix::Random(3, 2);
  CHECK(max_abs(kron(a, b) - ComplexMatrix(Eigen::kroneckerProduct(a, b))) < 1e-15);
}
