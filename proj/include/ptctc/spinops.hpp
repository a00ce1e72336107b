#pragma once

#include "ptctc/linalg.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ptctc::spinops {

/// Dicke basis |S, m⟩ of one collective spin, ordered m = S, S−1, ..., −S.
/// The spin is stored as the integer 2S so half-integers are exact.
class SpinBasis {
 public:
  /// Throws DomainError unless two_s ≥ 1.
  static SpinBasis from_twice_spin(int two_s);
  /// Throws DomainError unless 2s is a positive integer.
  static SpinBasis from_spin(double s);

  int twice_spin() const { return two_s_; }
  double spin() const { return 0.5 * two_s_; }
  Eigen::Index dim() const { return two_s_ + 1; }
  /// Magnetic quantum number of basis index k.
  double m_value(Eigen::Index k) const { return spin() - static_cast<double>(k); }

  friend bool operator==(const SpinBasis&, const SpinBasis&) = default;

 private:
  explicit SpinBasis(int two_s) : two_s_(two_s) {}
  int two_s_;
};

/// Collective spin operators normalized by S, so the spectrum of m_z is
/// {1, (S−1)/S, ..., −1} and [m_x, m_y] = i m_z / S.
struct SpinOperators {
  ComplexMatrix m_x;
  ComplexMatrix m_y;
  ComplexMatrix m_z;
  ComplexMatrix m_plus;
  ComplexMatrix m_minus;
};

SpinOperators build_spin_operators(const SpinBasis& basis);

/// P = i^{2S} exp(iπ S m_x): the π rotation about x. Real, symmetric and
/// an involution in the Dicke basis.
ComplexMatrix build_parity(const SpinBasis& basis);

/// PT(O) = P Oᵀ P for T the entrywise complex conjugation and a real
/// involutive parity P.
ComplexMatrix pt_transform(const ComplexMatrix& op, const ComplexMatrix& parity);

/// A finite-S Lindbladian: ∂ρ = −i[H, ρ] + Σ_μ (2 L ρ L† − L†L ρ − ρ L†L).
/// Note the factor 2 on the jump term; rates enter the jumps as sqrt-rates.
struct SpinModel {
  SpinBasis basis;
  ComplexMatrix hamiltonian;
  std::vector<ComplexMatrix> jumps;
  std::string label;

  /// Throws DimensionError on shape mismatch and DomainError if the
  /// Hamiltonian is not Hermitian within 1e-12·‖H‖.
  void validate() const;
};

struct LptCheck {
  double residual = 0.0;
  bool symmetric = false;
};

/// Relative distance ‖L̂[PT(H); PT(L_μ)] − L̂[H; L_μ]‖ / ‖L̂‖ between the two
/// superoperators. Jump relabelling is irrelevant because jumps are summed.
LptCheck check_lpt_symmetry(const SpinModel& model, double tol,
                            Eigen::Index dense_limit = 10000);

/// Generalized driven Dicke model: H = S(2g m_x + ω m_z²), L = √(κS) m_−.
SpinModel make_ddm(const SpinBasis& basis, double g, double omega, double kappa);

/// Dissipative LMG: H = (gS/2)(m_+² + m_−²) = g(S_+² + S_−²)/(2S), L = √(κS) m_−.
SpinModel make_lmg(const SpinBasis& basis, double g, double kappa);

/// Emitters coupled to a waveguide: H = S(2g m_x − ωγ{m_x, m_y}),
/// L₁ = √(γS/2)((2ω+1) m_x − i m_y), L₂ = √(γS/2) m_−.
SpinModel make_waveguide(const SpinBasis& basis, double g, double omega, double gamma);

/// Pure spin-coherent state |n⟩⟨n| pointing along `direction` (normalized
/// internally): the top eigenvector of n·m.
ComplexMatrix coherent_state(const SpinBasis& basis, const Eigen::Vector3d& direction);

}  // namespace ptctc::spinops
