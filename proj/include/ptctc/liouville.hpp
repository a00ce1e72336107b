#pragma once

#include "ptctc/linalg.hpp"
#include "ptctc/ode.hpp"
#include "ptctc/spinops.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace ptctc::liouville {

/// vec(A X B) = (Bᵀ ⊗ A) vec(X): columns of X are stacked top to bottom.
enum class Vectorization { ColumnStacking };

/// Dense d²×d² generator of ∂ρ = L̂ρ. Immutable once built.
class Superoperator {
 public:
  Superoperator(ComplexMatrix matrix, spinops::SpinBasis basis);

  const ComplexMatrix& matrix() const { return matrix_; }
  const spinops::SpinBasis& basis() const { return basis_; }
  Vectorization vectorization() const { return Vectorization::ColumnStacking; }
  /// Frobenius norm of the matrix; the scale used for all relative tolerances.
  double norm() const { return norm_; }
  /// Default zero-eigenvalue threshold, 1e-8·‖L̂‖.
  double default_lambda_tol() const { return 1e-8 * norm_; }

 private:
  ComplexMatrix matrix_;
  spinops::SpinBasis basis_;
  double norm_;
};

/// Builds −i(I⊗H − Hᵀ⊗I) + Σ_μ [2 conj(L)⊗L − I⊗(L†L) − (L†L)ᵀ⊗I].
/// Throws DimensionError if d² exceeds dense_limit and NumericalError if the
/// result fails the trace-preservation check.
Superoperator build_liouvillian(const spinops::SpinModel& model, Eigen::Index dense_limit = 10000);

ComplexVector vectorize(const ComplexMatrix& rho);
ComplexMatrix unvectorize(const ComplexVector& v, Eigen::Index d);

/// Orthonormal Hermitian operator basis: E_jj, (E_jk+E_kj)/√2 and
/// i(E_jk−E_kj)/√2 for j<k, as columns in vectorized form. In this basis
/// any Lindbladian is a real matrix.
ComplexMatrix hermitian_basis(Eigen::Index d);

/// U† L̂ U for U = hermitian_basis(d). Real up to rounding.
RealMatrix real_representation(const Superoperator& sup);

struct SpectralSummary {
  /// Sorted by descending real part, ties by descending imaginary part.
  std::vector<Complex> eigenvalues;
  double gap = 0.0;
  int steady_count = 0;
  double lambda_tol = 0.0;
};

/// Full spectrum via the real representation, split into the connected
/// blocks of its sparsity pattern. gap = |max Re λ| over |λ| > λ_tol.
SpectralSummary spectrum(const Superoperator& sup, std::optional<double> lambda_tol = std::nullopt);

struct SteadyState {
  ComplexMatrix rho;
  /// More than one eigenvalue below λ_tol; rho is one representative.
  bool degenerate = false;
  int steady_count = 0;
  /// ‖L̂ vec(ρ)‖.
  double residual = 0.0;
};

/// Null vector by shifted inverse iteration, Hermitized and trace-normalized.
/// Throws NumericalError when no eigenvalue lies below λ_tol.
SteadyState steady_state(const Superoperator& sup, std::optional<double> lambda_tol = std::nullopt);
/// Same, reusing a spectrum already computed for `sup`.
SteadyState steady_state(const Superoperator& sup, const SpectralSummary& summary);

/// L̂ρ in operator form, without building the superoperator.
ComplexMatrix apply_lindbladian(const spinops::SpinModel& model, const ComplexMatrix& rho);

struct EvolveOptions {
  /// Sampling interval; ≤ 0 keeps only the end points.
  double sample_dt = 0.1;
  ode::Tolerances tolerances;
};

struct DensityTrajectory {
  std::vector<double> times;
  std::vector<ComplexMatrix> states;
  /// max_t |tr ρ(t) − 1|.
  double trace_residual = 0.0;
};

using DensityObserver = std::function<void(double, const ComplexMatrix&)>;

/// Integrates ∂ρ = L̂ρ in operator form from t = 0 and calls observer at
/// every sample. ρ is Hermitized after each accepted step. Returns the trace
/// residual. Throws DomainError unless ρ0 is Hermitian, unit-trace and PSD
/// within 1e-10.
double evolve_density(const spinops::SpinModel& model, const ComplexMatrix& rho0, double t_end,
                      const EvolveOptions& options, const DensityObserver& observer);
DensityTrajectory evolve_density(const spinops::SpinModel& model, const ComplexMatrix& rho0,
                                 double t_end, const EvolveOptions& options = {});

/// tr(Oρ). Throws DimensionError on mismatched shapes.
Complex expectation(const ComplexMatrix& rho, const ComplexMatrix& op);

}  // namespace ptctc::liouville
