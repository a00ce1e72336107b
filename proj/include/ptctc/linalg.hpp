#pragma once

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace ptctc {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Kronecker product a ⊗ b.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b);

bool all_finite(const ComplexMatrix& a);

/// Entrywise comparison with an explicit absolute tolerance on the Frobenius
/// norm of the difference.
bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b, double abs_tol);

/// ‖a − a†‖_F ≤ rel_tol · ‖a‖_F (zero matrices are Hermitian).
bool is_hermitian(const ComplexMatrix& a, double rel_tol);

/// All eigenvalues of a general real square matrix (LAPACK dgeev).
/// Throws NumericalError when the QR iteration fails to converge.
std::vector<Complex> general_eigenvalues(RealMatrix a);

/// All eigenvalues of a general complex square matrix (LAPACK zgeev).
std::vector<Complex> general_eigenvalues(ComplexMatrix a);

}  // namespace ptctc
