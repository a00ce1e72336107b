#pragma once

#include "ptctc/linalg.hpp"
#include "ptctc/meanfield.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ptctc::stability {

using meanfield::MeanFieldModel;
using meanfield::State;

enum class Source { ClosedForm, Newton };

struct FixedPoint {
  State coords;
  /// ‖f(coords)‖.
  double residual = 0.0;
  /// coords = P̃ coords within 1e-9.
  bool pt_symmetric = false;
  Source source = Source::Newton;
};

/// Closed-form candidates first (filtered to real points on the manifold),
/// then damped Gauss–Newton from 12 quasi-uniform seeds; duplicates within
/// 1e-6 are merged in favour of closed forms. Every returned point has
/// residual < 1e-10. Throws NumericalError if a closed form fails that bound.
std::vector<FixedPoint> find_fixed_points(const MeanFieldModel& model);

/// Two of the three spin components (or the polar pair) kept as coordinates.
/// Standard is (m_y, m_z) with m_x eliminated on the sphere, or (r_B, Δθ)
/// with r_A eliminated; Auto eliminates the largest component instead, so it
/// never meets a pole.
enum class Chart { Standard, Auto };
enum class Method { Analytic, FiniteDifference };

struct ReducedJacobian {
  Eigen::Matrix2d matrix;
  /// Indices of the retained state components.
  std::array<int, 2> coordinates{1, 2};
};

/// Throws ChartError when the Standard chart is singular at q (|m_x| < 1e-8,
/// or r_A < 1e-8 for the polar model).
ReducedJacobian reduced_jacobian(const MeanFieldModel& model, const State& q,
                                 Method method = Method::Analytic, Chart chart = Chart::Standard);

enum class Kind { Center, Stable, Unstable, Saddle, Degenerate };
const char* to_string(Kind kind);

struct Classification {
  Kind kind = Kind::Degenerate;
  std::array<Complex, 2> eigenvalues{};
  /// Set when both diagonal entries vanish (|J_ii| < 1e-8·‖J‖):
  /// α = J₁₂, β = J₂₁ and λ = ±√(αβ).
  std::optional<double> alpha;
  std::optional<double> beta;
};

/// ‖J‖ is the Frobenius norm; `scale` is the model's rate unit for the
/// absolute degeneracy test ‖J‖ < tol·scale.
Classification classify_fixed_point(const Eigen::Matrix2d& j, double tol = 1e-7,
                                    double scale = 1.0);

std::array<Complex, 2> eigenvalues_2x2(const Eigen::Matrix2d& j);
/// Unit eigenvectors matching eigenvalues_2x2.
std::array<Eigen::Vector2cd, 2> eigenvectors_2x2(const Eigen::Matrix2d& j);

struct CepOptions {
  double coalescence = 0.999;
  /// Both |λ| must fall below collapse·‖J‖. The eigenvalues of a 2×2 block
  /// near a CEP scale like the square root of the distance to it, so this
  /// is much looser than the classification tolerance.
  double collapse = 1e-2;
  double tol = 1e-7;
  double scale = 1.0;
};

struct CepResult {
  /// |⟨v₁, v₂⟩| of the unit eigenvectors: 1 when they coalesce.
  double metric = 0.0;
  bool cep = false;
  /// ‖J‖ below tol·scale: both α and β vanish and no CEP is declared.
  bool degenerate = false;
};

CepResult cep_metric(const Eigen::Matrix2d& j, const CepOptions& options = {});

struct StabilityReport {
  FixedPoint fixed_point;
  ReducedJacobian jacobian;
  Classification classification;
  std::array<Eigen::Vector2cd, 2> eigenvectors;
  CepResult cep;
};

/// Standard chart when possible, otherwise the Auto chart.
StabilityReport analyze_fixed_point(const MeanFieldModel& model, const FixedPoint& fp,
                                    double tol = 1e-7);
std::vector<StabilityReport> stability_report(const MeanFieldModel& model, double tol = 1e-7);

struct BrokenPair {
  StabilityReport first;
  /// The P̃ image of first.
  StabilityReport second;
  /// det J > 0, the chart-independent form of γ₁γ₂ > αβ.
  bool physical = false;
  /// Exactly one member is stable and the other unstable.
  bool stable_unstable = false;
};

/// Throws DomainError when the model has no PT-broken fixed points.
std::vector<BrokenPair> pt_broken_pair_analysis(const MeanFieldModel& model);

enum class Phase { PT, PPTB, FPTB };
const char* to_string(Phase phase);

struct PhasePoint {
  std::vector<std::pair<std::string, double>> params;
  Phase phase = Phase::PT;
  std::vector<FixedPoint> fixed_points;
  int n_symmetric = 0;
  int n_broken = 0;
};

/// PT if only PT-symmetric fixed points exist, FPTB if only broken ones,
/// PPTB if both. Throws NumericalError on an empty inventory.
PhasePoint phase_classify(const MeanFieldModel& model);

struct PhaseBoundary {
  /// Midpoint of the final bracket.
  double location = 0.0;
  double bracket_width = 0.0;
  Phase below = Phase::PT;
  Phase above = Phase::PT;
  /// Best (largest-metric) result over the PT-symmetric fixed points at the
  /// two bracket ends.
  CepResult cep;
  /// Eigenvalues of the Jacobian behind `cep`.
  std::array<Complex, 2> eigenvalues{};
};

struct ScanOptions {
  /// Bisection stops at this width relative to max(1, |location|).
  double relative_width = 1e-13;
  CepOptions cep;
};

/// Labels `steps` evenly spaced points of family(x) on [from, to], then
/// bisects every label change.
std::vector<PhaseBoundary> scan_phase_boundaries(
    const std::function<MeanFieldModel(double)>& family, double from, double to, int steps,
    const ScanOptions& options = {});

enum class Regime { Unbroken, Broken, ExceptionalPoint };
const char* to_string(Regime regime);

struct GainLossDemo {
  ComplexMatrix hamiltonian;
  std::array<Complex, 2> eigenvalues{};
  Regime regime = Regime::Unbroken;
};

/// H = [[−iΓ, g], [g, iΓ]] with eigenvalues ±√(g² − Γ²). Throws DomainError
/// unless g, Γ ≥ 0.
GainLossDemo nonhermitian_pt_demo(double g, double gamma);

}  // namespace ptctc::stability
