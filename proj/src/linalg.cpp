#include "ptctc/linalg.hpp"

#include "ptctc/errors.hpp"

#include <cmath>
#include <complex>
#include <string>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace ptctc {

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) {
    throw DimensionError("commutator: operands must be square and equally sized");
  }
  return a * b - b * a;
}

bool all_finite(const ComplexMatrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
    }
  }
  return true;
}

bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b, double abs_tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return (a - b).norm() <= abs_tol;
}

bool is_hermitian(const ComplexMatrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = a.norm();
  return (a - a.adjoint()).norm() <= rel_tol * scale;
}

std::vector<Complex> general_eigenvalues(RealMatrix a) {
  if (a.rows() != a.cols()) throw DimensionError("general_eigenvalues: matrix must be square");
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<Complex> out;
  if (n == 0) return out;
  std::vector<double> wr(n), wi(n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, wr.data(),
                                        wi.data(), nullptr, 1, nullptr, 1);
  if (info != 0) {
    throw NumericalError("dgeev failed with info = " + std::to_string(info));
  }
  out.reserve(n);
  for (lapack_int i = 0; i < n; ++i) out.emplace_back(wr[i], wi[i]);
  return out;
}

std::vector<Complex> general_eigenvalues(ComplexMatrix a) {
  if (a.rows() != a.cols()) throw DimensionError("general_eigenvalues: matrix must be square");
  const auto n = static_cast<lapack_int>(a.rows());
  std::vector<Complex> out(n);
  if (n == 0) return out;
  const lapack_int info =
      LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, reinterpret_cast<lapack_complex_double*>(a.data()),
                    n, reinterpret_cast<lapack_complex_double*>(out.data()), nullptr, 1, nullptr, 1);
  if (info != 0) {
    throw NumericalError("zgeev failed with info = " + std::to_string(info));
  }
  return out;
}

}  // namespace ptctc
