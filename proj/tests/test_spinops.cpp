#include "ptctc/errors.hpp"
#include "ptctc/liouville.hpp"
#include "ptctc/spinops.hpp"

#include <doctest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

using namespace ptctc;
using namespace ptctc::spinops;

namespace {

ComplexMatrix pauli(char which) {
  ComplexMatrix s(2, 2);
  if (which == 'x') s << 0, 1, 1, 0;
  if (which == 'y') s << 0, -kI, kI, 0;
  if (which == 'z') s << 1, 0, 0, -1;
  return s;
}

double fro(const ComplexMatrix& a) { return a.norm(); }

}  // namespace

TEST_CASE("spin-1/2 operators are Pauli matrices") {
  const auto ops = build_spin_operators(SpinBasis::from_spin(0.5));
  CHECK(fro(ops.m_x - pauli('x')) < 1e-15);
  CHECK(fro(ops.m_y - pauli('y')) < 1e-15);
  CHECK(fro(ops.m_z - pauli('z')) < 1e-15);
  CHECK(fro(ops.m_minus - (pauli('x') - kI * pauli('y'))) < 1e-15);
}

TEST_CASE("spin-1 m_z is diag(1, 0, -1)") {
  const auto ops = build_spin_operators(SpinBasis::from_spin(1.0));
  ComplexMatrix expected = ComplexMatrix::Zero(3, 3);
  expected(0, 0) = 1.0;
  expected(2, 2) = -1.0;
  CHECK(fro(ops.m_z - expected) < 1e-15);
}

TEST_CASE("normalized commutation relation and Casimir") {
  for (int two_s = 1; two_s <= 40; ++two_s) {
    const auto basis = SpinBasis::from_twice_spin(two_s);
    const auto ops = build_spin_operators(basis);
    const double s = basis.spin();
    CAPTURE(two_s);
    CHECK(fro(commutator(ops.m_x, ops.m_y) - kI * ops.m_z / s) < 1e-12);
    CHECK(fro(commutator(ops.m_y, ops.m_z) - kI * ops.m_x / s) < 1e-12);
    const ComplexMatrix casimir = ops.m_x * ops.m_x + ops.m_y * ops.m_y + ops.m_z * ops.m_z;
    const ComplexMatrix expected =
        ComplexMatrix::Identity(basis.dim(), basis.dim()) * (s * (s + 1.0) / (s * s));
    CHECK(fro(casimir - expected) < 1e-11);
    CHECK(fro(ops.m_plus - ops.m_minus.adjoint()) < 1e-15);
  }
}

TEST_CASE("invalid spins are rejected") {
  CHECK_THROWS_AS(SpinBasis::from_spin(0.0), DomainError);
  CHECK_THROWS_AS(SpinBasis::from_spin(0.3), DomainError);
  CHECK_THROWS_AS(SpinBasis::from_spin(-1.0), DomainError);
  CHECK_THROWS_AS(SpinBasis::from_twice_spin(0), DomainError);
  CHECK(SpinBasis::from_spin(2.5).dim() == 6);
}

TEST_CASE("spin-1/2 parity is -sigma_x") {
  const ComplexMatrix p = build_parity(SpinBasis::from_spin(0.5));
  CHECK(fro(p + pauli('x')) < 1e-14);
}

TEST_CASE("parity matches the matrix exponential and is an involution") {
  for (int two_s = 1; two_s <= 40; ++two_s) {
    const auto basis = SpinBasis::from_twice_spin(two_s);
    const auto ops = build_spin_operators(basis);
    const ComplexMatrix p = build_parity(basis);
    const ComplexMatrix generator = kI * M_PI * basis.spin() * ops.m_x;
    const ComplexMatrix oracle = std::pow(kI, two_s) * generator.exp();
    const auto id = ComplexMatrix::Identity(basis.dim(), basis.dim());
    CAPTURE(two_s);
    CHECK(fro(p - oracle) < 1e-9);
    CHECK(fro(p * p - id) < 1e-10);
    CHECK(fro(p * ops.m_z * p + ops.m_z) < 1e-10);
    CHECK(fro(p * ops.m_y * p + ops.m_y) < 1e-10);
    CHECK(fro(p * ops.m_x * p - ops.m_x) < 1e-10);
  }
}

TEST_CASE("PT transform of the spin operators") {
  const auto basis = SpinBasis::from_spin(3.5);
  const auto ops = build_spin_operators(basis);
  const ComplexMatrix p = build_parity(basis);
  CHECK(fro(pt_transform(ops.m_x, p) - ops.m_x) < 1e-12);
  CHECK(fro(pt_transform(ops.m_minus, p) - ops.m_minus) < 1e-12);
  CHECK(fro(pt_transform(ops.m_z, p) + ops.m_z) < 1e-12);
  const ComplexMatrix o = ComplexMatrix::Random(basis.dim(), basis.dim());
  CHECK(fro(pt_transform(pt_transform(o, p), p) - o) < 1e-12);
}

TEST_CASE("L-PT symmetry of the model cards") {
  const auto basis = SpinBasis::from_spin(5.0);
  CHECK(check_lpt_symmetry(make_ddm(basis, 2.0, 1.0, 1.0), 1e-12).residual < 1e-12);
  CHECK(check_lpt_symmetry(make_lmg(basis, 1.0, 0.8), 1e-12).residual < 1e-12);
  const auto wg = check_lpt_symmetry(make_waveguide(basis, 1.0, 0.3, 0.5), 1e-12);
  CHECK(wg.residual < 1e-12);
  CHECK(wg.symmetric);
}

TEST_CASE("a PT-odd field breaks L-PT symmetry") {
  const auto basis = SpinBasis::from_spin(5.0);
  auto model = make_ddm(basis, 2.0, 1.0, 1.0);
  model.hamiltonian += 0.3 * basis.spin() * build_spin_operators(basis).m_z;
  const auto check = check_lpt_symmetry(model, 1e-10);
  CHECK(check.residual > 1e-3);
  CHECK_FALSE(check.symmetric);
}

TEST_CASE("L-PT residual equals a direct superoperator comparison") {
  const auto basis = SpinBasis::from_spin(2.0);
  auto model = make_waveguide(basis, 0.7, 0.4, 0.9);
  model.hamiltonian += 0.05 * build_spin_operators(basis).m_z;
  const ComplexMatrix p = build_parity(basis);
  SpinModel mirrored = model;
  mirrored.hamiltonian = pt_transform(model.hamiltonian, p);
  for (auto& l : mirrored.jumps) l = pt_transform(l, p);
  const auto a = liouville::build_liouvillian(model).matrix();
  const auto b = liouville::build_liouvillian(mirrored).matrix();
  const double expected = (a - b).norm() / a.norm();
  CHECK(check_lpt_symmetry(model, 1e-10).residual == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("model Hamiltonians are Hermitian and match their definitions") {
  const auto basis = SpinBasis::from_spin(3.0);
  const auto ops = build_spin_operators(basis);
  const double s = basis.spin();
  const auto ddm = make_ddm(basis, 2.0, 1.0, 1.5);
  CHECK(fro(ddm.hamiltonian - s * (4.0 * ops.m_x + ops.m_z * ops.m_z)) < 1e-12);
  REQUIRE(ddm.jumps.size() == 1);
  CHECK(fro(ddm.jumps[0] - std::sqrt(1.5 * s) * ops.m_minus) < 1e-12);
  const auto lmg = make_lmg(basis, 1.3, 0.4);
  CHECK(fro(lmg.hamiltonian -
            0.65 * s * (ops.m_plus * ops.m_plus + ops.m_minus * ops.m_minus)) < 1e-12);
  for (const auto* m : {&ddm, &lmg}) CHECK(is_hermitian(m->hamiltonian, 1e-14));
  CHECK(is_hermitian(make_waveguide(basis, 1.0, 0.3, 0.5).hamiltonian, 1e-14));
}

TEST_CASE("validate rejects non-Hermitian Hamiltonians and bad shapes") {
  const auto basis = SpinBasis::from_spin(1.0);
  auto model = make_ddm(basis, 1.0, 1.0, 1.0);
  model.hamiltonian(0, 1) += 1.0;
  CHECK_THROWS_AS(model.validate(), DomainError);
  model = make_ddm(basis, 1.0, 1.0, 1.0);
  model.jumps.push_back(ComplexMatrix::Zero(2, 2));
  CHECK_THROWS_AS(model.validate(), DimensionError);
}

TEST_CASE("coherent state is pure with the requested polarization") {
  std::mt19937 rng(7);
  std::normal_distribution<double> normal;
  const auto basis = SpinBasis::from_spin(4.5);
  const auto ops = build_spin_operators(basis);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector3d n(normal(rng), normal(rng), normal(rng));
    n.normalize();
    const ComplexMatrix rho = coherent_state(basis, n);
    CHECK(std::abs(rho.trace() - Complex(1.0)) < 1e-12);
    CHECK(fro(rho * rho - rho) < 1e-11);
    const Eigen::Vector3d m((rho * ops.m_x).trace().real(), (rho * ops.m_y).trace().real(),
                            (rho * ops.m_z).trace().real());
    CHECK((m - n).norm() < 1e-11);
  }
}
