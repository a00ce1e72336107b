#include "ptctc/spinops.hpp"

#include "ptctc/errors.hpp"
#include "ptctc/liouville.hpp"

#include <cmath>
#include <string>

namespace ptctc::spinops {

SpinBasis SpinBasis::from_twice_spin(int two_s) {
  if (two_s < 1) {
    throw DomainError("spin must be at least 1/2 (got 2S = " + std::to_string(two_s) + ")");
  }
  return SpinBasis(two_s);
}

SpinBasis SpinBasis::from_spin(double s) {
  const double twice = 2.0 * s;
  const double rounded = std::round(twice);
  if (!std::isfinite(s) || std::abs(twice - rounded) > 1e-12 || rounded < 1.0) {
    throw DomainError("spin must be a positive half-integer (got " + std::to_string(s) + ")");
  }
  return SpinBasis(static_cast<int>(rounded));
}

SpinOperators build_spin_operators(const SpinBasis& basis) {
  const Eigen::Index d = basis.dim();
  const double s = basis.spin();

  // Unnormalized S_+ has (S_+)_{k,k+1} = sqrt(S(S+1) − m(m+1)) with m = m_{k+1}.
  ComplexMatrix s_plus = ComplexMatrix::Zero(d, d);
  ComplexMatrix s_z = ComplexMatrix::Zero(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    s_z(k, k) = basis.m_value(k);
    if (k + 1 < d) {
      const double m = basis.m_value(k + 1);
      s_plus(k, k + 1) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
    }
  }
  const ComplexMatrix s_minus = s_plus.adjoint();

  SpinOperators ops;
  ops.m_plus = s_plus / s;
  ops.m_minus = s_minus / s;
  ops.m_x = (s_plus + s_minus) / (2.0 * s);
  ops.m_y = (s_plus - s_minus) / (2.0 * kI * s);
  ops.m_z = s_z / s;
  return ops;
}

ComplexMatrix build_parity(const SpinBasis& basis) {
  const Eigen::Index d = basis.dim();
  const double s = basis.spin();
  // S_x = S m_x is real symmetric in the Dicke basis.
  const ComplexMatrix s_x = s * build_spin_operators(basis).m_x;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s_x.real());
  if (eig.info() != Eigen::Success) {
    throw NumericalError("build_parity: eigendecomposition of m_x failed");
  }

  static constexpr Complex kPowersOfI[4] = {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}};
  const Complex prefactor = kPowersOfI[basis.twice_spin() % 4];

  ComplexVector phases(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    // The spectrum of S_x is exactly {S, S−1, ..., −S}; snap away solver dust.
    const double lambda = std::round(eig.eigenvalues()(k) + s) - s;
    phases(k) = prefactor * std::exp(kI * M_PI * lambda);
  }
  const ComplexMatrix v = eig.eigenvectors().cast<Complex>();
  ComplexMatrix p = v * phases.asDiagonal() * v.adjoint();

  p = 0.5 * (p + p.adjoint()).eval();
  if (p.imag().norm() < 1e-10) p = p.real().cast<Complex>();
  return p;
}

ComplexMatrix pt_transform(const ComplexMatrix& op, const ComplexMatrix& parity) {
  if (op.rows() != op.cols() || parity.rows() != parity.cols() || op.rows() != parity.rows()) {
    throw DimensionError("pt_transform: operator and parity must be square with equal dimension");
  }
  return parity * op.transpose() * parity;
}

void SpinModel::validate() const {
  const Eigen::Index d = basis.dim();
  if (hamiltonian.rows() != d || hamiltonian.cols() != d) {
    throw DimensionError("SpinModel '" + label + "': Hamiltonian is not " + std::to_string(d) +
                         "x" + std::to_string(d));
  }
  for (const auto& jump : jumps) {
    if (jump.rows() != d || jump.cols() != d) {
      throw DimensionError("SpinModel '" + label + "': jump operator has the wrong shape");
    }
    if (!all_finite(jump)) throw DomainError("SpinModel '" + label + "': non-finite jump entry");
  }
  if (!all_finite(hamiltonian)) {
    throw DomainError("SpinModel '" + label + "': non-finite Hamiltonian entry");
  }
  if (!is_hermitian(hamiltonian, 1e-12)) {
    throw DomainError("SpinModel '" + label + "': Hamiltonian is not Hermitian");
  }
}

LptCheck check_lpt_symmetry(const SpinModel& model, double tol, Eigen::Index dense_limit) {
  model.validate();
  const ComplexMatrix parity = build_parity(model.basis);

  SpinModel transformed = model;
  transformed.hamiltonian = pt_transform(model.hamiltonian, parity);
  for (auto& jump : transformed.jumps) jump = pt_transform(jump, parity);
  transformed.label = model.label + " (PT)";

  const auto original = liouville::build_liouvillian(model, dense_limit);
  const auto mapped = liouville::build_liouvillian(transformed, dense_limit);
  const double scale = original.matrix().norm();

  LptCheck out;
  out.residual = scale > 0.0 ? (mapped.matrix() - original.matrix()).norm() / scale : 0.0;
  out.symmetric = out.residual < tol;
  return out;
}

SpinModel make_ddm(const SpinBasis& basis, double g, double omega, double kappa) {
  if (kappa < 0.0) throw DomainError("ddm: kappa must be non-negative");
  const auto ops = build_spin_operators(basis);
  const double s = basis.spin();
  SpinModel model{basis, s * (2.0 * g * ops.m_x + omega * ops.m_z * ops.m_z), {}, "ddm"};
  model.jumps.push_back(std::sqrt(kappa * s) * ops.m_minus);
  return model;
}

SpinModel make_lmg(const SpinBasis& basis, double g, double kappa) {
  if (kappa < 0.0) throw DomainError("lmg: kappa must be non-negative");
  const auto ops = build_spin_operators(basis);
  const double s = basis.spin();
  const ComplexMatrix h = 0.5 * g * s * (ops.m_plus * ops.m_plus + ops.m_minus * ops.m_minus);
  SpinModel model{basis, h, {}, "lmg"};
  model.jumps.push_back(std::sqrt(kappa * s) * ops.m_minus);
  return model;
}

SpinModel make_waveguide(const SpinBasis& basis, double g, double omega, double gamma) {
  if (gamma < 0.0) throw DomainError("waveguide: gamma must be non-negative");
  const auto ops = build_spin_operators(basis);
  const double s = basis.spin();
  const ComplexMatrix anti = ops.m_x * ops.m_y + ops.m_y * ops.m_x;
  SpinModel model{basis, s * (2.0 * g * ops.m_x - omega * gamma * anti), {}, "waveguide"};
  const double amp = std::sqrt(0.5 * gamma * s);
  model.jumps.push_back(amp * ((2.0 * omega + 1.0) * ops.m_x - kI * ops.m_y));
  model.jumps.push_back(amp * ops.m_minus);
  return model;
}

ComplexMatrix coherent_state(const SpinBasis& basis, const Eigen::Vector3d& direction) {
  const double norm = direction.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DomainError("coherent_state: direction must be a finite non-zero vector");
  }
  const Eigen::Vector3d n = direction / norm;
  const auto ops = build_spin_operators(basis);
  const ComplexMatrix projection = n.x() * ops.m_x + n.y() * ops.m_y + n.z() * ops.m_z;
  const Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(projection);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("coherent_state: eigendecomposition failed");
  }
  const ComplexVector top = eig.eigenvectors().col(basis.dim() - 1);
  return top * top.adjoint();
}

}  // namespace ptctc::spinops
