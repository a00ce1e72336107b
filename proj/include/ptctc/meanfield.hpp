#pragma once

#include "ptctc/ode.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ptctc::meanfield {

/// Spin models: (m_x, m_y, m_z) on the unit sphere.
/// Polar (bipartite lattice) model: (r_A, r_B, Δθ) with r_A² + r_B² = 1.
using State = Eigen::Vector3d;

State ddm_rhs(const State& m, double g, double omega, double kappa);
State lmg_rhs(const State& m, double g, double kappa);
/// k = 2ω + 1 plays the role of the anisotropy of the first jump operator.
State waveguide_rhs(const State& m, double g, double omega, double gamma);
/// Throws DomainError if r_A or r_B is negative or below 1e-12.
State lattice_rhs(const State& q, double g, double omega, double kappa, int d);

struct DdmParams {
  double g = 2.0;
  double omega = 1.0;
  double kappa = 1.0;
};
struct LmgParams {
  double g = 1.0;
  double kappa = 0.8;
};
struct WaveguideParams {
  double g = 1.0;
  double omega = 0.3;
  double gamma = 0.5;
};
struct LatticeParams {
  double g = 1.0;
  double omega = 0.5;
  double kappa = 1.0;
  int d = 1;
};
using ModelParams = std::variant<DdmParams, LmgParams, WaveguideParams, LatticeParams>;

/// The lattice flow at (g, ω, κ, d) is 2d times the Schwinger-mapped DDM
/// flow at the parameters returned here.
DdmParams lattice_equivalent_ddm_params(const LatticeParams& p);

enum class Coordinates { Spin, Polar };

struct ConservedQuantity {
  std::string name;
  std::function<double(const State&)> value;
  double target = 1.0;
};

class MeanFieldModel {
 public:
  static MeanFieldModel ddm(double g, double omega, double kappa);
  static MeanFieldModel lmg(double g, double kappa);
  static MeanFieldModel waveguide(double g, double omega, double gamma);
  static MeanFieldModel lattice(double g, double omega, double kappa, int d);
  /// Validates ranges (rates ≥ 0, d ≥ 1) and throws DomainError otherwise.
  static MeanFieldModel from_params(const ModelParams& params);

  const std::string& name() const { return name_; }
  int dim() const { return 3; }
  Coordinates coordinates() const;
  const ModelParams& params() const { return params_; }
  std::vector<std::pair<std::string, double>> named_params() const;
  /// Largest parameter magnitude; the rate unit for relative tolerances.
  double rate_scale() const;

  State rhs(const State& q) const;
  /// Exact derivative of rhs.
  Eigen::Matrix3d jacobian(const State& q) const;

  /// P̃: diag(1, 1, −1) for spins, the r_A ↔ r_B swap for the polar model.
  Eigen::Matrix3d parity() const;
  /// |m|² or r_A² + r_B²; empty once a perturbation is attached.
  std::vector<ConservedQuantity> conserved() const;

  /// Copy with rhs(q) += a·q, e.g. a = diag(0, 0, ε) breaks n-PT symmetry.
  MeanFieldModel with_perturbation(const Eigen::Matrix3d& a) const;
  bool perturbed() const { return perturbed_; }

 private:
  MeanFieldModel(std::string name, ModelParams params);

  std::string name_;
  ModelParams params_;
  Eigen::Matrix3d perturbation_ = Eigen::Matrix3d::Zero();
  bool perturbed_ = false;
};

/// ‖P̃ f(q) + f(P̃ q)‖: zero when the flow is equivariant under P̃ combined
/// with time reversal.
double npt_residual(const MeanFieldModel& model, const State& q);

struct IntegrateOptions {
  /// Sampling interval of the returned trajectory; ≤ 0 keeps end points only.
  double sample_dt = 0.01;
  /// Tight enough that |m|² drifts < 1e-9 over t = 100 even on orbits that
  /// linger where the sphere is repelling (m_z > 0 with κ > 0).
  ode::Tolerances tolerances{.abs_tol = 1e-13, .rel_tol = 1e-13};
  /// Abort with NumericalError when a conserved quantity moves further.
  double drift_limit = 1e-6;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  /// max over samples and conserved quantities of |c(q(t)) − c(q0)|.
  double max_drift = 0.0;
};

/// Throws DomainError if q0 misses a conserved target by more than 1e-9.
Trajectory integrate(const MeanFieldModel& model, const State& q0, double t_end,
                     const IntegrateOptions& options = {});

struct ConjugatePair {
  Trajectory forward;
  /// mapped(s) = P̃ q(T − s), integrated under −P̃ f P̃ from P̃ q(T).
  Trajectory mapped;
  /// Symmetric Hausdorff distance between forward on [T − W, T] and mapped
  /// on [0, W], measured against the sampled polylines.
  double attractor_distance = 0.0;
};

/// window ≤ 0 selects W = T/2.
ConjugatePair pt_conjugate_trajectory(const MeanFieldModel& model, const State& q0, double t_end,
                                      double window = 0.0, const IntegrateOptions& options = {});

/// Symmetric Hausdorff distance between two sampled curves, each treated as
/// a polyline.
double polyline_hausdorff(const std::vector<State>& a, const std::vector<State>& b);

struct OrbitReturn {
  double time = 0.0;
  double distance = 0.0;
};

/// Closest approach of the orbit to q0 over (t_min, t_max], refined between
/// samples by golden-section search.
OrbitReturn closest_return(const MeanFieldModel& model, const State& q0, double t_min,
                           double t_max, const IntegrateOptions& options = {});

struct PolarPoint {
  State q;  // (r_A, r_B, Δθ)
  /// m sits on a pole, where Δθ is undefined and reported as 0.
  bool pole = false;
};

/// m_z = r_A² − r_B², m_x = 2 r_A r_B cos Δθ, m_y = −2 r_A r_B sin Δθ.
/// Throws DomainError unless |m| = 1 within 1e-9.
PolarPoint schwinger_map(const State& m);
State schwinger_inverse(const State& q);
/// Chain rule: the polar velocity matching ṁ at m (off the poles).
State polar_velocity(const State& m, const State& m_dot);

}  // namespace ptctc::meanfield
