#include "ptctc/meanfield.hpp"

#include "ptctc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ptctc::meanfield {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_polar(const State& q) {
  if (!(q(0) >= 1e-12) || !(q(1) >= 1e-12)) {
    throw DomainError("lattice: polar amplitudes must be >= 1e-12 (got r_A = " +
                      std::to_string(q(0)) + ", r_B = " + std::to_string(q(1)) + ")");
  }
}

void require_rate(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
  if (v < 0.0) throw DomainError(std::string(what) + " must be non-negative");
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
}

using Field = std::function<State(const State&)>;

Trajectory integrate_field(const Field& f, const std::vector<ConservedQuantity>& conserved,
                           const State& q0, double t_end, const IntegrateOptions& options) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw DomainError("integrate: t_end must be > 0");
  if (!q0.allFinite()) throw DomainError("integrate: initial state has non-finite entries");
  std::vector<double> initial;
  for (const auto& c : conserved) {
    const double v = c.value(q0);
    if (std::abs(v - c.target) > 1e-9) {
      throw DomainError("integrate: initial state violates " + c.name + " = " +
                        std::to_string(c.target) + " (got " + std::to_string(v) + ")");
    }
    initial.push_back(v);
  }

  Trajectory out;
  auto drift_of = [&](const State& q) {
    double worst = 0.0;
    for (std::size_t i = 0; i < conserved.size(); ++i) {
      worst = std::max(worst, std::abs(conserved[i].value(q) - initial[i]));
    }
    return worst;
  };
  auto on_sample = [&](double t, const State& q) {
    out.times.push_back(t);
    out.states.push_back(q);
  };
  auto monitor = [&](State& q) {
    const double drift = drift_of(q);
    out.max_drift = std::max(out.max_drift, drift);
    if (drift > options.drift_limit) {
      throw NumericalError("integrate: conserved quantity drifted by " + std::to_string(drift));
    }
    return false;
  };
  ode::integrate(f, q0, 0.0, t_end, options.sample_dt, options.tolerances, on_sample, monitor);
  return out;
}

double point_segment_distance(const State& p, const State& a, const State& b) {
  const State ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double directed_hausdorff(const std::vector<State>& from, const std::vector<State>& to) {
  double worst = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    if (to.size() == 1) best = (p - to[0]).norm();
    for (std::size_t j = 0; j + 1 < to.size(); ++j) {
      best = std::min(best, point_segment_distance(p, to[j], to[j + 1]));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

State ddm_rhs(const State& m, double g, double omega, double kappa) {
  const double x = m(0), y = m(1), z = m(2);
  return 2.0 * State(-omega * y * z + kappa * x * z, omega * x * z - g * z + kappa * y * z,
                     g * y - kappa * (1.0 - z * z));
}

State lmg_rhs(const State& m, double g, double kappa) {
  const double x = m(0), y = m(1), z = m(2);
  return 2.0 * State(-g * y * z + kappa * x * z, -g * x * z + kappa * y * z,
                     2.0 * g * x * y - kappa * (x * x + y * y));
}

State waveguide_rhs(const State& m, double g, double omega, double gamma) {
  const double x = m(0), y = m(1), z = m(2);
  const double k = 2.0 * omega + 1.0;
  return 2.0 * State(gamma * x * z, -g * z + gamma * k * y * z,
                     g * y - gamma * x * x - gamma * k * y * y);
}

State lattice_rhs(const State& q, double g, double omega, double kappa, int d) {
  check_polar(q);
  const double a = q(0), b = q(1);
  const double s = std::sin(q(2)), c = std::cos(q(2));
  const double dd = 2.0 * d;
  return State(-dd * (kappa * a * b * b + g * b * s), dd * (kappa * a * a * b + g * a * s),
               -dd * (g * (b / a - a / b) * c + omega * (a * a - b * b)));
}

DdmParams lattice_equivalent_ddm_params(const LatticeParams& p) {
  return DdmParams{p.g, 0.5 * p.omega, 0.5 * p.kappa};
}

MeanFieldModel::MeanFieldModel(std::string name, ModelParams params)
    : name_(std::move(name)), params_(std::move(params)) {}

MeanFieldModel MeanFieldModel::ddm(double g, double omega, double kappa) {
  return from_params(DdmParams{g, omega, kappa});
}
MeanFieldModel MeanFieldModel::lmg(double g, double kappa) {
  return from_params(LmgParams{g, kappa});
}
MeanFieldModel MeanFieldModel::waveguide(double g, double omega, double gamma) {
  return from_params(WaveguideParams{g, omega, gamma});
}
MeanFieldModel MeanFieldModel::lattice(double g, double omega, double kappa, int d) {
  return from_params(LatticeParams{g, omega, kappa, d});
}

MeanFieldModel MeanFieldModel::from_params(const ModelParams& params) {
  return std::visit(
      Overloaded{
          [](const DdmParams& p) {
            require_finite(p.g, "g");
            require_finite(p.omega, "omega");
            require_rate(p.kappa, "kappa");
            return MeanFieldModel("ddm", p);
          },
          [](const LmgParams& p) {
            require_finite(p.g, "g");
            require_rate(p.kappa, "kappa");
            return MeanFieldModel("lmg", p);
          },
          [](const WaveguideParams& p) {
            require_finite(p.g, "g");
            require_finite(p.omega, "omega");
            require_rate(p.gamma, "gamma");
            return MeanFieldModel("waveguide", p);
          },
          [](const LatticeParams& p) {
            require_finite(p.g, "g");
            require_finite(p.omega, "omega");
            require_rate(p.kappa, "kappa");
            if (p.d < 1) throw DomainError("lattice: d must be >= 1");
            return MeanFieldModel("lattice", p);
          },
      },
      params);
}

Coordinates MeanFieldModel::coordinates() const {
  return std::holds_alternative<LatticeParams>(params_) ? Coordinates::Polar : Coordinates::Spin;
}

std::vector<std::pair<std::string, double>> MeanFieldModel::named_params() const {
  return std::visit(
      Overloaded{
          [](const DdmParams& p) -> std::vector<std::pair<std::string, double>> {
            return {{"g", p.g}, {"omega", p.omega}, {"kappa", p.kappa}};
          },
          [](const LmgParams& p) -> std::vector<std::pair<std::string, double>> {
            return {{"g", p.g}, {"kappa", p.kappa}};
          },
          [](const WaveguideParams& p) -> std::vector<std::pair<std::string, double>> {
            return {{"g", p.g}, {"omega", p.omega}, {"gamma", p.gamma}};
          },
          [](const LatticeParams& p) -> std::vector<std::pair<std::string, double>> {
            return {{"g", p.g}, {"omega", p.omega}, {"kappa", p.kappa}, {"d", p.d}};
          },
      },
      params_);
}

double MeanFieldModel::rate_scale() const {
  double scale = 0.0;
  for (const auto& [name, value] : named_params()) {
    if (name != "d") scale = std::max(scale, std::abs(value));
  }
  if (const auto* p = std::get_if<LatticeParams>(&params_)) scale *= 2.0 * p->d;
  return std::max(scale, 1e-300);
}

State MeanFieldModel::rhs(const State& q) const {
  State f = std::visit(
      Overloaded{
          [&](const DdmParams& p) { return ddm_rhs(q, p.g, p.omega, p.kappa); },
          [&](const LmgParams& p) { return lmg_rhs(q, p.g, p.kappa); },
          [&](const WaveguideParams& p) { return waveguide_rhs(q, p.g, p.omega, p.gamma); },
          [&](const LatticeParams& p) { return lattice_rhs(q, p.g, p.omega, p.kappa, p.d); },
      },
      params_);
  if (perturbed_) f += perturbation_ * q;
  return f;
}

Eigen::Matrix3d MeanFieldModel::jacobian(const State& q) const {
  const double x = q(0), y = q(1), z = q(2);
  Eigen::Matrix3d j = std::visit(
      Overloaded{
          [&](const DdmParams& p) {
            const double g = p.g, w = p.omega, k = p.kappa;
            Eigen::Matrix3d m;
            m << k * z, -w * z, -w * y + k * x,
                 w * z, k * z, w * x - g + k * y,
                 0.0, g, 2.0 * k * z;
            return Eigen::Matrix3d(2.0 * m);
          },
          [&](const LmgParams& p) {
            const double g = p.g, k = p.kappa;
            Eigen::Matrix3d m;
            m << k * z, -g * z, -g * y + k * x,
                 -g * z, k * z, -g * x + k * y,
                 2.0 * (g * y - k * x), 2.0 * (g * x - k * y), 0.0;
            return Eigen::Matrix3d(2.0 * m);
          },
          [&](const WaveguideParams& p) {
            const double g = p.g, gm = p.gamma, k = 2.0 * p.omega + 1.0;
            Eigen::Matrix3d m;
            m << gm * z, 0.0, gm * x,
                 0.0, gm * k * z, -g + gm * k * y,
                 -2.0 * gm * x, g - 2.0 * gm * k * y, 0.0;
            return Eigen::Matrix3d(2.0 * m);
          },
          [&](const LatticeParams& p) {
            check_polar(q);
            const double g = p.g, w = p.omega, k = p.kappa, a = x, b = y;
            const double s = std::sin(z), c = std::cos(z);
            Eigen::Matrix3d m;
            m << -k * b * b, -(2.0 * k * a * b + g * s), -g * b * c,
                 2.0 * k * a * b + g * s, k * a * a, g * a * c,
                 -(g * (-b / (a * a) - 1.0 / b) * c + 2.0 * w * a),
                 -(g * (1.0 / a + a / (b * b)) * c - 2.0 * w * b),
                 g * (b / a - a / b) * s;
            return Eigen::Matrix3d(2.0 * p.d * m);
          },
      },
      params_);
  if (perturbed_) j += perturbation_;
  return j;
}

Eigen::Matrix3d MeanFieldModel::parity() const {
  Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
  if (coordinates() == Coordinates::Spin) {
    p.diagonal() << 1.0, 1.0, -1.0;
  } else {
    p(0, 1) = p(1, 0) = p(2, 2) = 1.0;
  }
  return p;
}

std::vector<ConservedQuantity> MeanFieldModel::conserved() const {
  if (perturbed_) return {};
  if (coordinates() == Coordinates::Spin) {
    return {{"|m|^2", [](const State& q) { return q.squaredNorm(); }, 1.0}};
  }
  return {{"r_A^2+r_B^2", [](const State& q) { return q(0) * q(0) + q(1) * q(1); }, 1.0}};
}

MeanFieldModel MeanFieldModel::with_perturbation(const Eigen::Matrix3d& a) const {
  if (!a.allFinite()) throw DomainError("perturbation must be finite");
  MeanFieldModel out = *this;
  out.perturbation_ += a;
  out.perturbed_ = true;
  return out;
}

double npt_residual(const MeanFieldModel& model, const State& q) {
  const Eigen::Matrix3d p = model.parity();
  return (p * model.rhs(q) + model.rhs(p * q)).norm();
}

Trajectory integrate(const MeanFieldModel& model, const State& q0, double t_end,
                     const IntegrateOptions& options) {
  return integrate_field([&model](const State& q) { return model.rhs(q); }, model.conserved(), q0,
                         t_end, options);
}

double polyline_hausdorff(const std::vector<State>& a, const std::vector<State>& b) {
  if (a.empty() || b.empty()) throw DomainError("polyline_hausdorff: empty point set");
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

ConjugatePair pt_conjugate_trajectory(const MeanFieldModel& model, const State& q0, double t_end,
                                      double window, const IntegrateOptions& options) {
  const double w = window > 0.0 ? std::min(window, t_end) : 0.5 * t_end;
  const Eigen::Matrix3d p = model.parity();

  ConjugatePair out;
  out.forward = integrate(model, q0, t_end, options);
  const Field reversed = [&](const State& q) -> State { return -(p * model.rhs(p * q)); };
  out.mapped =
      integrate_field(reversed, model.conserved(), p * out.forward.states.back(), t_end, options);

  std::vector<State> late, early;
  const double eps = 1e-9 * t_end;
  for (std::size_t i = 0; i < out.forward.times.size(); ++i) {
    if (out.forward.times[i] >= t_end - w - eps) late.push_back(out.forward.states[i]);
  }
  for (std::size_t i = 0; i < out.mapped.times.size(); ++i) {
    if (out.mapped.times[i] <= w + eps) early.push_back(out.mapped.states[i]);
  }
  out.attractor_distance = polyline_hausdorff(late, early);
  return out;
}

OrbitReturn closest_return(const MeanFieldModel& model, const State& q0, double t_min,
                           double t_max, const IntegrateOptions& options) {
  if (!(t_max > t_min) || t_min < 0.0) throw DomainError("closest_return: need 0 <= t_min < t_max");
  if (!(options.sample_dt > 0.0)) throw DomainError("closest_return: sample_dt must be > 0");
  const Trajectory traj = integrate(model, q0, t_max, options);
  const auto n = traj.states.size();
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = (traj.states[i] - q0).norm();

  // Sampled local minima past t_min, best first.
  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i < n; ++i) {
    if (traj.times[i] <= t_min) continue;
    const bool left = dist[i] <= dist[i - 1];
    const bool right = i + 1 == n || dist[i] <= dist[i + 1];
    if (left && right) minima.push_back(i);
  }
  if (minima.empty()) return {traj.times.back(), dist.back()};
  std::sort(minima.begin(), minima.end(), [&](auto a, auto b) { return dist[a] < dist[b]; });
  if (minima.size() > 5) minima.resize(5);

  IntegrateOptions local = options;
  local.sample_dt = 0.0;
  OrbitReturn best{traj.times[minima[0]], dist[minima[0]]};
  for (const std::size_t i : minima) {
    const std::size_t lo_idx = i - 1;
    const double t_lo = traj.times[lo_idx];
    const double t_hi = i + 1 < n ? traj.times[i + 1] : traj.times[i];
    const State& base = traj.states[lo_idx];
    auto phi = [&](double t) {
      if (t <= t_lo) return (base - q0).norm();
      return (integrate(model, base, t - t_lo, local).states.back() - q0).norm();
    };
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::max(t_lo, t_min), b = t_hi;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = phi(c), fd = phi(d);
    while (b - a > 1e-10 * std::max(1.0, t_hi)) {
      if (fc < fd) {
        b = d, d = c, fd = fc;
        c = b - invphi * (b - a);
        fc = phi(c);
      } else {
        a = c, c = d, fc = fd;
        d = a + invphi * (b - a);
        fd = phi(d);
      }
    }
    const double t_star = 0.5 * (a + b);
    const double d_star = phi(t_star);
    if (d_star < best.distance) best = {t_star, d_star};
  }
  return best;
}

PolarPoint schwinger_map(const State& m) {
  if (!m.allFinite() || std::abs(m.norm() - 1.0) > 1e-9) {
    throw DomainError("schwinger_map: state must lie on the unit sphere");
  }
  const double z = std::clamp(m(2), -1.0, 1.0);
  const double rho = std::hypot(m(0), m(1));
  PolarPoint out;
  // The smaller radius comes from rho = 2 r_A r_B, which avoids the
  // cancellation in 1 ± m_z near a pole.
  if (z >= 0.0) {
    out.q(0) = std::sqrt(0.5 * (1.0 + z));
    out.q(1) = 0.5 * rho / out.q(0);
  } else {
    out.q(1) = std::sqrt(0.5 * (1.0 - z));
    out.q(0) = 0.5 * rho / out.q(1);
  }
  out.pole = rho < 1e-12;
  out.q(2) = out.pole ? 0.0 : std::atan2(-m(1), m(0));
  return out;
}

State schwinger_inverse(const State& q) {
  const double a = q(0), b = q(1);
  return State(2.0 * a * b * std::cos(q(2)), -2.0 * a * b * std::sin(q(2)), a * a - b * b);
}

State polar_velocity(const State& m, const State& m_dot) {
  const PolarPoint p = schwinger_map(m);
  if (p.pole) throw ChartError("polar_velocity: undefined at the poles");
  const double a = p.q(0), b = p.q(1);
  const double rho2 = m(0) * m(0) + m(1) * m(1);
  return State(m_dot(2) / (4.0 * a), -m_dot(2) / (4.0 * b),
               -(m(0) * m_dot(1) - m(1) * m_dot(0)) / rho2);
}

}  // namespace ptctc::meanfield
