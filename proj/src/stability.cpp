#include "ptctc/stability.hpp"

#include "ptctc/errors.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

namespace ptctc::stability {

namespace {

using meanfield::Coordinates;
using meanfield::DdmParams;
using meanfield::LatticeParams;
using meanfield::LmgParams;
using meanfield::WaveguideParams;

bool is_polar(const MeanFieldModel& model) { return model.coordinates() == Coordinates::Polar; }

// Indices entering the normalization constraint Σ q_i² = 1.
int constraint_size(const MeanFieldModel& model) { return is_polar(model) ? 2 : 3; }

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * M_PI);
  return a <= -M_PI ? a + 2.0 * M_PI : a;
}

// Maps a state back onto the constraint manifold in canonical form.
State normalize(const MeanFieldModel& model, State q) {
  if (!is_polar(model)) return q / q.norm();
  if (q(0) < 0.0) q(0) = -q(0), q(2) += M_PI;
  if (q(1) < 0.0) q(1) = -q(1), q(2) += M_PI;
  const double r = std::hypot(q(0), q(1));
  q(0) /= r;
  q(1) /= r;
  q(2) = wrap_angle(q(2));
  return q;
}

// Point on the unit sphere used for distances, so Δθ wrap-around is harmless.
State embed(const MeanFieldModel& model, const State& q) {
  return is_polar(model) ? meanfield::schwinger_inverse(q) : q;
}

bool same_point(const MeanFieldModel& model, const State& a, const State& b, double tol) {
  return (embed(model, a) - embed(model, b)).norm() < tol;
}

std::vector<State> closed_forms(const MeanFieldModel& model) {
  std::vector<State> out;
  const auto& params = model.params();
  if (const auto* p = std::get_if<DdmParams>(&params)) {
    const double g = p->g, w = p->omega, k = p->kappa;
    if (g != 0.0 && k <= std::abs(g)) {
      const double y = k / g;
      const double x = std::sqrt(std::max(0.0, 1.0 - y * y));
      out.emplace_back(x, y, 0.0);
      out.emplace_back(-x, y, 0.0);
    }
    const double r2 = k * k + w * w;
    if (r2 > 0.0 && r2 >= g * g) {
      const double z = std::sqrt(std::max(0.0, 1.0 - g * g / r2));
      out.emplace_back(g * w / r2, g * k / r2, z);
      out.emplace_back(g * w / r2, g * k / r2, -z);
    }
  } else if (const auto* p = std::get_if<LmgParams>(&params)) {
    const double g = p->g, k = p->kappa;
    if (g != 0.0 && k <= std::abs(g)) {
      const double root = std::sqrt(std::max(0.0, 1.0 - (k / g) * (k / g)));
      const double mp = std::sqrt(0.5 * (1.0 + root));
      const double mm = std::sqrt(0.5 * (1.0 - root));
      const double s = g > 0.0 ? 1.0 : -1.0;
      out.emplace_back(mp, s * mm, 0.0);
      out.emplace_back(-mp, -s * mm, 0.0);
      out.emplace_back(mm, s * mp, 0.0);
      out.emplace_back(-mm, -s * mp, 0.0);
    }
    out.emplace_back(0.0, 0.0, 1.0);
    out.emplace_back(0.0, 0.0, -1.0);
  } else if (const auto* p = std::get_if<WaveguideParams>(&params)) {
    const double g = p->g, w = p->omega, gm = p->gamma, k = 2.0 * w + 1.0;
    // PT-symmetric: m_z = 0 and 2γω m_y² − g m_y + γ = 0.
    std::vector<double> ys;
    const double a = 2.0 * gm * w;
    if (a == 0.0) {
      if (g != 0.0) ys.push_back(gm / g);
    } else {
      const double disc = g * g - 4.0 * a * gm;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        // Cancellation-free pair of roots.
        const double q = -0.5 * (-g + (g >= 0.0 ? -sq : sq));
        if (q != 0.0) {
          ys.push_back(q / a);
          ys.push_back(gm / q);
        }
      }
    }
    for (const double y : ys) {
      if (std::abs(y) > 1.0) continue;
      const double x = std::sqrt(std::max(0.0, 1.0 - y * y));
      out.emplace_back(x, y, 0.0);
      out.emplace_back(-x, y, 0.0);
    }
    // PT-broken: m_x = 0, m_y = g/(γk).
    if (gm * k != 0.0) {
      const double y = g / (gm * k);
      if (std::abs(y) <= 1.0) {
        const double z = std::sqrt(std::max(0.0, 1.0 - y * y));
        out.emplace_back(0.0, y, z);
        out.emplace_back(0.0, y, -z);
      }
    }
  }
  return out;
}

std::vector<State> newton_seeds(const MeanFieldModel& model) {
  std::vector<State> sphere;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < 12; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / 12.0;
    const double r = std::sqrt(1.0 - z * z);
    sphere.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  if (!is_polar(model)) return sphere;

  std::vector<State> out;
  for (const auto& m : sphere) out.push_back(meanfield::schwinger_map(m).q);
  const auto& p = std::get<LatticeParams>(model.params());
  if (p.g != 0.0 && std::abs(p.kappa / (2.0 * p.g)) <= 1.0) {
    const double th = std::asin(-p.kappa / (2.0 * p.g));
    const double r = 1.0 / std::sqrt(2.0);
    out.emplace_back(r, r, th);
    out.emplace_back(r, r, wrap_angle(M_PI - th));
  }
  return out;
}

struct NewtonSystem {
  Eigen::Vector4d residual;
  Eigen::Matrix<double, 4, 3> jacobian;
};

NewtonSystem newton_system(const MeanFieldModel& model, const State& q) {
  NewtonSystem s;
  const int nc = constraint_size(model);
  s.residual.head<3>() = model.rhs(q);
  s.residual(3) = q.head(nc).squaredNorm() - 1.0;
  s.jacobian.topRows<3>() = model.jacobian(q);
  s.jacobian.row(3).setZero();
  for (int i = 0; i < nc; ++i) s.jacobian(3, i) = 2.0 * q(i);
  return s;
}

std::optional<State> newton(const MeanFieldModel& model, State q) {
  try {
    for (int iter = 0; iter < 50; ++iter) {
      const NewtonSystem sys = newton_system(model, q);
      const double norm0 = sys.residual.norm();
      const State step = sys.jacobian.colPivHouseholderQr().solve(-sys.residual);
      if (!step.allFinite()) return std::nullopt;
      double t = 1.0;
      State trial = normalize(model, q + step);
      while (t > 1.0 / 64.0) {
        try {
          if (newton_system(model, trial).residual.norm() < norm0) break;
        } catch (const DomainError&) {
        }
        t *= 0.5;
        trial = normalize(model, q + t * step);
      }
      q = trial;
      if (t * step.norm() < 1e-15) break;
    }
    if (model.rhs(q).norm() < 1e-10) return q;
  } catch (const DomainError&) {
    // Seed ran into a polar coordinate singularity.
  }
  return std::nullopt;
}

bool pt_symmetric(const MeanFieldModel& model, const State& q) {
  return (model.parity() * q - q).norm() < 1e-9;
}

void add_unique(const MeanFieldModel& model, std::vector<FixedPoint>& points, const State& q,
                Source source) {
  for (const auto& fp : points) {
    if (same_point(model, fp.coords, q, 1e-6)) return;
  }
  points.push_back({q, model.rhs(q).norm(), pt_symmetric(model, q), source});
}

struct ChartSpec {
  int eliminated = 0;
  std::array<int, 2> kept{1, 2};
};

ChartSpec chart_at(const MeanFieldModel& model, const State& q, Chart chart) {
  const int nc = constraint_size(model);
  ChartSpec spec;
  if (chart == Chart::Standard) {
    if (std::abs(q(0)) < 1e-8) {
      throw ChartError(is_polar(model)
                           ? "reduced_jacobian: r_A < 1e-8, the (r_B, dtheta) chart is singular"
                           : "reduced_jacobian: |m_x| < 1e-8, the (m_y, m_z) chart is singular");
    }
    return spec;
  }
  int e = 0;
  for (int i = 1; i < nc; ++i) {
    if (std::abs(q(i)) > std::abs(q(e))) e = i;
  }
  spec.eliminated = e;
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    if (i != e) spec.kept[n++] = i;
  }
  return spec;
}

State lift(const MeanFieldModel& model, const ChartSpec& spec, const State& base,
           const Eigen::Vector2d& u) {
  const int nc = constraint_size(model);
  State q = base;
  q(spec.kept[0]) = u(0);
  q(spec.kept[1]) = u(1);
  // Incremental form of 1 − Σ q_i²: no cancellation when the eliminated
  // component is small.
  const double e0 = base(spec.eliminated);
  double sq = e0 * e0;
  for (int i = 0; i < nc; ++i) {
    if (i == spec.eliminated) continue;
    const double d = q(i) - base(i);
    sq -= d * (2.0 * base(i) + d);
  }
  const double sign = e0 >= 0.0 ? 1.0 : -1.0;
  q(spec.eliminated) = sign * std::sqrt(std::max(0.0, sq));
  return q;
}

Eigen::Vector2d restrict(const ChartSpec& spec, const State& v) {
  return {v(spec.kept[0]), v(spec.kept[1])};
}

}  // namespace

std::vector<FixedPoint> find_fixed_points(const MeanFieldModel& model) {
  std::vector<FixedPoint> points;
  for (const State& q : closed_forms(model)) {
    const double residual = model.rhs(q).norm();
    if (!(residual < 1e-10)) {
      throw NumericalError("find_fixed_points: closed-form point of " + model.name() +
                           " has residual " + std::to_string(residual));
    }
    add_unique(model, points, q, Source::ClosedForm);
  }
  for (const State& seed : newton_seeds(model)) {
    if (auto q = newton(model, seed)) add_unique(model, points, *q, Source::Newton);
  }
  return points;
}

ReducedJacobian reduced_jacobian(const MeanFieldModel& model, const State& q, Method method,
                                 Chart chart) {
  const ChartSpec spec = chart_at(model, q, chart);
  ReducedJacobian out;
  out.coordinates = spec.kept;
  if (method == Method::Analytic) {
    const Eigen::Matrix3d df = model.jacobian(q);
    const int nc = constraint_size(model);
    Eigen::Matrix<double, 3, 2> dlift = Eigen::Matrix<double, 3, 2>::Zero();
    for (int k = 0; k < 2; ++k) {
      const int i = spec.kept[k];
      dlift(i, k) = 1.0;
      if (i < nc) dlift(spec.eliminated, k) = -q(i) / q(spec.eliminated);
    }
    const Eigen::Matrix<double, 3, 2> full = df * dlift;
    for (int r = 0; r < 2; ++r) out.matrix.row(r) = full.row(spec.kept[r]);
    return out;
  }

  const Eigen::Vector2d u0 = restrict(spec, q);
  auto central = [&](double h) {
    Eigen::Matrix2d d;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d up = u0, dn = u0;
      up(k) += h;
      dn(k) -= h;
      d.col(k) = (restrict(spec, model.rhs(lift(model, spec, q, up))) -
                  restrict(spec, model.rhs(lift(model, spec, q, dn)))) /
                 (2.0 * h);
    }
    return d;
  };
  // The chart map has curvature of order 1/q_e², so the step shrinks with it.
  const double qe = q(spec.eliminated);
  const double h = spec.eliminated < constraint_size(model) ? std::min(1e-6, 1e-3 * qe * qe) : 1e-6;
  out.matrix = (4.0 * central(0.5 * h) - central(h)) / 3.0;
  return out;
}

const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::Center: return "center";
    case Kind::Stable: return "stable";
    case Kind::Unstable: return "unstable";
    case Kind::Saddle: return "saddle";
    case Kind::Degenerate: return "degenerate";
  }
  return "unknown";
}

std::array<Complex, 2> eigenvalues_2x2(const Eigen::Matrix2d& j) {
  const double half_tr = 0.5 * j.trace();
  const double det = j.determinant();
  const Complex root = std::sqrt(Complex(half_tr * half_tr - det, 0.0));
  return {Complex(half_tr) + root, Complex(half_tr) - root};
}

std::array<Eigen::Vector2cd, 2> eigenvectors_2x2(const Eigen::Matrix2d& j) {
  const auto lambda = eigenvalues_2x2(j);
  std::array<Eigen::Vector2cd, 2> out;
  for (int k = 0; k < 2; ++k) {
    const Eigen::Vector2cd a(j(0, 1), lambda[k] - j(0, 0));
    const Eigen::Vector2cd b(lambda[k] - j(1, 1), j(1, 0));
    Eigen::Vector2cd v = a.norm() >= b.norm() ? a : b;
    if (v.norm() == 0.0) v = k == 0 ? Eigen::Vector2cd(1.0, 0.0) : Eigen::Vector2cd(0.0, 1.0);
    out[k] = v / v.norm();
  }
  return out;
}

Classification classify_fixed_point(const Eigen::Matrix2d& j, double tol, double scale) {
  Classification out;
  out.eigenvalues = eigenvalues_2x2(j);
  const double n = j.norm();
  if (n > 0.0 && std::abs(j(0, 0)) < 1e-8 * n && std::abs(j(1, 1)) < 1e-8 * n) {
    out.alpha = j(0, 1);
    out.beta = j(1, 0);
  } else if (n == 0.0) {
    out.alpha = 0.0;
    out.beta = 0.0;
  }
  if (n < tol * scale) return out;  // degenerate

  const double eps = tol * n;
  const Complex l1 = out.eigenvalues[0], l2 = out.eigenvalues[1];
  const bool re_zero = std::abs(l1.real()) < eps && std::abs(l2.real()) < eps;
  const bool im_nonzero = std::abs(l1.imag()) > eps && std::abs(l2.imag()) > eps;
  if (re_zero && im_nonzero) {
    out.kind = Kind::Center;
  } else if (l1.real() < -eps && l2.real() < -eps) {
    out.kind = Kind::Stable;
  } else if (l1.real() > eps && l2.real() > eps) {
    out.kind = Kind::Unstable;
  } else if (std::abs(l1.imag()) <= eps && std::abs(l2.imag()) <= eps &&
             std::max(l1.real(), l2.real()) > eps && std::min(l1.real(), l2.real()) < -eps) {
    out.kind = Kind::Saddle;
  }
  return out;
}

CepResult cep_metric(const Eigen::Matrix2d& j, const CepOptions& options) {
  CepResult out;
  const double n = j.norm();
  if (n < options.tol * options.scale) {
    out.degenerate = true;
    return out;
  }
  const auto v = eigenvectors_2x2(j);
  out.metric = std::min(1.0, std::abs(v[0].dot(v[1])));
  const auto lambda = eigenvalues_2x2(j);
  const double largest = std::max(std::abs(lambda[0]), std::abs(lambda[1]));
  out.cep = out.metric > options.coalescence && largest < options.collapse * n;
  return out;
}

StabilityReport analyze_fixed_point(const MeanFieldModel& model, const FixedPoint& fp,
                                    double tol) {
  StabilityReport out;
  out.fixed_point = fp;
  try {
    out.jacobian = reduced_jacobian(model, fp.coords, Method::Analytic, Chart::Standard);
  } catch (const ChartError&) {
    out.jacobian = reduced_jacobian(model, fp.coords, Method::Analytic, Chart::Auto);
  }
  const double scale = model.rate_scale();
  out.classification = classify_fixed_point(out.jacobian.matrix, tol, scale);
  out.eigenvectors = eigenvectors_2x2(out.jacobian.matrix);
  CepOptions cep;
  cep.tol = tol;
  cep.scale = scale;
  out.cep = cep_metric(out.jacobian.matrix, cep);
  return out;
}

std::vector<StabilityReport> stability_report(const MeanFieldModel& model, double tol) {
  std::vector<StabilityReport> out;
  for (const auto& fp : find_fixed_points(model)) out.push_back(analyze_fixed_point(model, fp, tol));
  return out;
}

std::vector<BrokenPair> pt_broken_pair_analysis(const MeanFieldModel& model) {
  std::vector<FixedPoint> broken;
  for (const auto& fp : find_fixed_points(model)) {
    if (!fp.pt_symmetric) broken.push_back(fp);
  }
  if (broken.empty()) {
    throw DomainError("pt_broken_pair_analysis: " + model.name() +
                      " has no PT-broken fixed points at these parameters");
  }
  // Upper member (m_z > 0, or r_A > r_B) first.
  std::sort(broken.begin(), broken.end(),
            [&](const FixedPoint& a, const FixedPoint& b) {
              return embed(model, a.coords)(2) > embed(model, b.coords)(2);
            });
  const Eigen::Matrix3d p = model.parity();
  std::vector<bool> used(broken.size(), false);
  std::vector<BrokenPair> out;
  for (std::size_t i = 0; i < broken.size(); ++i) {
    if (used[i]) continue;
    for (std::size_t k = i + 1; k < broken.size(); ++k) {
      if (used[k] || !same_point(model, p * broken[i].coords, broken[k].coords, 1e-8)) continue;
      used[i] = used[k] = true;
      BrokenPair pair;
      pair.first = analyze_fixed_point(model, broken[i]);
      pair.second = analyze_fixed_point(model, broken[k]);
      pair.physical = pair.first.jacobian.matrix.determinant() > 0.0;
      const Kind a = pair.first.classification.kind, b = pair.second.classification.kind;
      pair.stable_unstable = (a == Kind::Stable && b == Kind::Unstable) ||
                             (a == Kind::Unstable && b == Kind::Stable);
      out.push_back(std::move(pair));
      break;
    }
  }
  if (out.empty()) {
    throw NumericalError("pt_broken_pair_analysis: PT-broken points of " + model.name() +
                         " are not closed under the parity map");
  }
  return out;
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::PT: return "PT";
    case Phase::PPTB: return "PPTB";
    case Phase::FPTB: return "FPTB";
  }
  return "unknown";
}

PhasePoint phase_classify(const MeanFieldModel& model) {
  PhasePoint out;
  out.params = model.named_params();
  out.fixed_points = find_fixed_points(model);
  for (const auto& fp : out.fixed_points) (fp.pt_symmetric ? out.n_symmetric : out.n_broken)++;
  if (out.fixed_points.empty()) {
    throw NumericalError("phase_classify: no fixed points found for " + model.name());
  }
  out.phase = out.n_broken == 0 ? Phase::PT : out.n_symmetric == 0 ? Phase::FPTB : Phase::PPTB;
  return out;
}

std::vector<PhaseBoundary> scan_phase_boundaries(
    const std::function<MeanFieldModel(double)>& family, double from, double to, int steps,
    const ScanOptions& options) {
  if (steps < 2) throw DomainError("scan_phase_boundaries: steps must be >= 2");
  if (!(from < to)) throw DomainError("scan_phase_boundaries: need from < to");
  auto label = [&](double x) { return phase_classify(family(x)).phase; };

  std::vector<PhaseBoundary> out;
  std::function<void(double, Phase, double, Phase, int)> bracket =
      [&](double a, Phase la, double b, Phase lb, int depth) {
        while (b - a > options.relative_width * std::max(1.0, std::abs(a))) {
          const double mid = 0.5 * (a + b);
          if (mid <= a || mid >= b) break;
          const Phase lm = label(mid);
          if (lm == la) {
            a = mid;
          } else if (lm == lb) {
            b = mid;
          } else if (depth < 4) {
            bracket(a, la, mid, lm, depth + 1);
            bracket(mid, lm, b, lb, depth + 1);
            return;
          } else {
            b = mid, lb = lm;
          }
        }
        PhaseBoundary boundary;
        boundary.location = 0.5 * (a + b);
        boundary.bracket_width = b - a;
        boundary.below = la;
        boundary.above = lb;
        bool found = false;
        for (const double x : {a, b}) {
          const MeanFieldModel model = family(x);
          CepOptions cep = options.cep;
          cep.scale = model.rate_scale();
          for (const auto& fp : find_fixed_points(model)) {
            if (!fp.pt_symmetric) continue;
            Eigen::Matrix2d j;
            try {
              j = reduced_jacobian(model, fp.coords).matrix;
            } catch (const ChartError&) {
              continue;
            }
            const CepResult r = cep_metric(j, cep);
            if (!found || r.metric > boundary.cep.metric) {
              boundary.cep = r;
              boundary.eigenvalues = eigenvalues_2x2(j);
              found = true;
            }
          }
        }
        out.push_back(boundary);
      };

  double prev_x = from;
  Phase prev = label(from);
  for (int i = 1; i < steps; ++i) {
    const double x = from + (to - from) * i / (steps - 1);
    const Phase cur = label(x);
    if (cur != prev) bracket(prev_x, prev, x, cur, 0);
    prev_x = x;
    prev = cur;
  }
  return out;
}

const char* to_string(Regime regime) {
  switch (regime) {
    case Regime::Unbroken: return "unbroken";
    case Regime::Broken: return "broken";
    case Regime::ExceptionalPoint: return "EP";
  }
  return "unknown";
}

GainLossDemo nonhermitian_pt_demo(double g, double gamma) {
  if (!(g >= 0.0) || !(gamma >= 0.0) || !std::isfinite(g) || !std::isfinite(gamma)) {
    throw DomainError("pt-demo: g and Gamma must be finite and non-negative");
  }
  GainLossDemo out;
  out.hamiltonian.resize(2, 2);
  out.hamiltonian << Complex(0.0, -gamma), g, g, Complex(0.0, gamma);
  const Complex root = std::sqrt(Complex(g * g - gamma * gamma, 0.0));
  out.eigenvalues = {root, -root};
  if (g > 0.0 && std::abs(gamma - g) < 1e-12 * g) {
    out.regime = Regime::ExceptionalPoint;
  } else {
    out.regime = gamma <= g ? Regime::Unbroken : Regime::Broken;
  }
  return out;
}

}  // namespace ptctc::stability
