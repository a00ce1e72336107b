#include "ptctc/errors.hpp"
#include "ptctc/meanfield.hpp"
#include "ptctc/ode.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ptctc;
using namespace ptctc::meanfield;

namespace {

State random_sphere_point(std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  State m;
  do {
    m = State(normal(rng), normal(rng), normal(rng));
  } while (m.norm() < 1e-3);
  return m.normalized();
}

std::vector<MeanFieldModel> spin_models() {
  return {MeanFieldModel::ddm(2.0, 1.0, 1.0), MeanFieldModel::ddm(2.0, 1.0, 2.5),
          MeanFieldModel::lmg(1.0, 0.8), MeanFieldModel::lmg(1.0, 1.3),
          MeanFieldModel::waveguide(1.0, 0.3, 0.5)};
}

}  // namespace

TEST_CASE("integrator reproduces exponential decay and harmonic motion") {
  using Vec = Eigen::Vector2d;
  std::vector<double> times;
  std::vector<Vec> states;
  auto rhs = [](const Vec& y) { return Vec(y(1), -y(0)); };
  ode::Tolerances tol{.abs_tol = 1e-12, .rel_tol = 1e-12};
  ode::integrate(rhs, Vec(1.0, 0.0), 0.0, 10.0, 0.5, tol, [&](double t, const Vec& y) {
    times.push_back(t);
    states.push_back(y);
  });
  REQUIRE(times.size() == 21);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(times[i] == doctest::Approx(0.5 * static_cast<double>(i)).epsilon(1e-15));
    CHECK(std::abs(states[i](0) - std::cos(times[i])) < 1e-10);
    CHECK(std::abs(states[i](1) + std::sin(times[i])) < 1e-10);
  }

  double last = 0.0;
  auto decay = [](const Eigen::Matrix<double, 1, 1>& y) { return Eigen::Matrix<double, 1, 1>(-3.0 * y(0)); };
  ode::integrate(decay, Eigen::Matrix<double, 1, 1>(2.0), 0.0, 2.0, 0.0, tol,
                 [&](double, const Eigen::Matrix<double, 1, 1>& y) { last = y(0); });
  CHECK(std::abs(last - 2.0 * std::exp(-6.0)) < 1e-12);
}

TEST_CASE("integrator error falls with tolerance at high order") {
  using Vec = Eigen::Vector2d;
  auto rhs = [](const Vec& y) { return Vec(y(1), -y(0)); };
  auto error_at = [&](double tol) {
    Vec end;
    const auto stats = ode::integrate(rhs, Vec(1.0, 0.0), 0.0, 20.0, 0.0,
                                      ode::Tolerances{.abs_tol = tol, .rel_tol = tol},
                                      [&](double, const Vec& y) { end = y; });
    return std::pair{(end - Vec(std::cos(20.0), -std::sin(20.0))).norm(), stats.accepted};
  };
  const auto [e1, n1] = error_at(1e-6);
  const auto [e2, n2] = error_at(1e-10);
  CHECK(e2 < e1);
  CHECK(e2 < 1e-8);
  // An eighth-order method needs about 10^(4/8) more steps for 4 more digits.
  CHECK(static_cast<double>(n2) < 6.0 * static_cast<double>(n1));
}

TEST_CASE("DDM flow at its closed-form points") {
  const double g = 2.0, omega = 1.0, kappa = 1.0;
  const double mx = std::sqrt(1.0 - (kappa / g) * (kappa / g));
  CHECK(ddm_rhs(State(mx, kappa / g, 0.0), g, omega, kappa).norm() < 1e-15);
  CHECK(ddm_rhs(State(-mx, kappa / g, 0.0), g, omega, kappa).norm() < 1e-15);
  CHECK((ddm_rhs(State(1.0, 0.0, 0.0), g, omega, kappa) - State(0.0, 0.0, -2.0 * kappa)).norm() <
        1e-15);
}

TEST_CASE("LMG flow at its closed-form points") {
  const double g = 1.0, kappa = 0.8;
  const double root = std::sqrt(1.0 - (kappa / g) * (kappa / g));
  const double mp = std::sqrt((1.0 + root) / 2.0), mm = std::sqrt((1.0 - root) / 2.0);
  CHECK(lmg_rhs(State(mp, mm, 0.0), g, kappa).norm() < 1e-15);
  CHECK(lmg_rhs(State(0.0, 0.0, 1.0), g, kappa).norm() == 0.0);
  CHECK(lmg_rhs(State(0.0, 0.0, -1.0), g, kappa).norm() == 0.0);
  const double half = std::sqrt(0.5);
  CHECK(lmg_rhs(State(half, half, 0.0), 1.0, 1.0).norm() < 1e-15);
}

TEST_CASE("waveguide flow") {
  const double g = 1.0, omega = 0.3, gamma = 0.5, k = 2.0 * omega + 1.0;
  CHECK((waveguide_rhs(State(0.0, 0.0, 1.0), g, omega, gamma) - State(0.0, -2.0 * g, 0.0)).norm() <
        1e-15);
  // On the equator the fixed-point condition is g m_y = γ m_x² + γk m_y².
  for (const double my : {0.1, 0.25, 0.4}) {
    const double mx = std::sqrt((g * my - gamma * k * my * my) / gamma);
    CHECK(waveguide_rhs(State(mx, my, 0.0), g, omega, gamma).norm() < 1e-14);
  }
}

TEST_CASE("spin flows are tangent to the sphere") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const State m = random_sphere_point(rng);
    for (const auto& model : spin_models()) CHECK(std::abs(m.dot(model.rhs(m))) < 1e-14);
  }
}

TEST_CASE("lattice flow") {
  const double g = 1.3, omega = 0.4, kappa = 0.9;
  const double half = std::sqrt(0.5);
  const State fp(half, half, std::asin(-kappa / (2.0 * g)));
  for (const int d : {1, 2, 3}) CHECK(lattice_rhs(fp, g, omega, kappa, d).norm() < 1e-12);
  const State q = lattice_rhs(State(0.6, 0.8, 0.0), g, omega, 0.0, 2);
  CHECK(q(0) == 0.0);
  CHECK(q(1) == 0.0);
  CHECK_THROWS_AS(lattice_rhs(State(1.0, 0.0, 0.3), g, omega, kappa, 1), DomainError);
}

TEST_CASE("Schwinger map") {
  const auto equator = schwinger_map(State(1.0, 0.0, 0.0));
  CHECK(std::abs(equator.q(0) - std::sqrt(0.5)) < 1e-15);
  CHECK(std::abs(equator.q(1) - std::sqrt(0.5)) < 1e-15);
  CHECK(equator.q(2) == 0.0);
  CHECK_FALSE(equator.pole);
  const auto pole = schwinger_map(State(0.0, 0.0, 1.0));
  CHECK(pole.pole);
  CHECK(pole.q(0) == 1.0);
  CHECK(pole.q(1) == 0.0);
  CHECK_THROWS_AS(schwinger_map(State(0.5, 0.0, 0.0)), DomainError);

  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const State m = random_sphere_point(rng);
    CHECK((schwinger_inverse(schwinger_map(m).q) - m).norm() < 1e-12);
  }
}

TEST_CASE("polar velocity matches a finite difference of the map") {
  std::mt19937_64 rng(13);
  const auto ddm = MeanFieldModel::ddm(2.0, 1.0, 1.4);
  for (int i = 0; i < 200; ++i) {
    const State m = random_sphere_point(rng);
    if (std::abs(m(2)) > 0.95) continue;
    const State v = ddm.rhs(m);
    const double h = 1e-6;
    const State ahead = schwinger_map((m + h * v).normalized()).q;
    const State behind = schwinger_map((m - h * v).normalized()).q;
    State fd = (ahead - behind) / (2.0 * h);
    fd(2) = std::remainder((ahead(2) - behind(2)), 2.0 * M_PI) / (2.0 * h);
    CHECK((polar_velocity(m, v) - fd).norm() < 1e-6 * (1.0 + v.norm()));
  }
}

TEST_CASE("lattice flow is the rescaled Schwinger image of the DDM flow") {
  std::mt19937_64 rng(17);
  const LatticeParams lp{1.1, 0.6, 0.8, 1};
  const DdmParams dp = lattice_equivalent_ddm_params(lp);
  for (const int d : {1, 2, 3}) {
    for (int i = 0; i < 300; ++i) {
      const State m = random_sphere_point(rng);
      const auto p = schwinger_map(m);
      if (p.q(0) < 1e-3 || p.q(1) < 1e-3) continue;
      const State expected = 2.0 * d * polar_velocity(m, ddm_rhs(m, dp.g, dp.omega, dp.kappa));
      CHECK((lattice_rhs(p.q, lp.g, lp.omega, lp.kappa, d) - expected).norm() < 1e-11);
    }
  }
}

TEST_CASE("analytic Jacobians match finite differences") {
  std::mt19937_64 rng(19);
  std::vector<MeanFieldModel> models = spin_models();
  models.push_back(MeanFieldModel::lattice(1.0, 0.5, 1.0, 2));
  for (const auto& model : models) {
    for (int i = 0; i < 50; ++i) {
      State q = random_sphere_point(rng);
      if (model.coordinates() == Coordinates::Polar) {
        const auto p = schwinger_map(q);
        if (p.q(0) < 0.05 || p.q(1) < 0.05) continue;
        q = p.q;
      }
      Eigen::Matrix3d fd;
      const double h = 1e-6;
      for (int k = 0; k < 3; ++k) {
        State e = State::Zero();
        e(k) = h;
        fd.col(k) = (model.rhs(q + e) - model.rhs(q - e)) / (2.0 * h);
      }
      CHECK((model.jacobian(q) - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("n-PT equivariance of every model") {
  std::mt19937_64 rng(23);
  std::vector<MeanFieldModel> models = spin_models();
  models.push_back(MeanFieldModel::lattice(1.0, 0.5, 1.0, 1));
  for (const auto& model : models) {
    CHECK((model.parity() * model.parity() - Eigen::Matrix3d::Identity()).norm() == 0.0);
    for (int i = 0; i < 1000; ++i) {
      State q = random_sphere_point(rng);
      if (model.coordinates() == Coordinates::Polar) {
        const auto p = schwinger_map(q);
        if (p.q(0) < 1e-6 || p.q(1) < 1e-6) continue;
        q = p.q;
      }
      CHECK(npt_residual(model, q) < 1e-12);
    }
  }
}

TEST_CASE("a PT-odd perturbation violates n-PT equivariance") {
  const double eps = 0.1;
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  a(2, 2) = eps;
  const auto model = MeanFieldModel::ddm(2.0, 1.0, 1.0).with_perturbation(a);
  CHECK(model.perturbed());
  CHECK(model.conserved().empty());
  std::mt19937_64 rng(29);
  for (int i = 0; i < 100; ++i) {
    const State m = random_sphere_point(rng);
    if (std::abs(m(2)) < 0.2) continue;
    CHECK(npt_residual(model, m) > eps / 2.0 * std::abs(m(2)));
  }
}

TEST_CASE("model parameters are validated") {
  CHECK_THROWS_AS(MeanFieldModel::ddm(2.0, 1.0, -1.0), DomainError);
  CHECK_THROWS_AS(MeanFieldModel::waveguide(1.0, 0.3, -0.5), DomainError);
  CHECK_THROWS_AS(MeanFieldModel::lattice(1.0, 0.5, 1.0, 0), DomainError);
  CHECK_THROWS_AS(integrate(MeanFieldModel::ddm(2.0, 1.0, 1.0), State(1.0, 0.1, 0.0), 1.0),
                  DomainError);
}

TEST_CASE("norm conservation over t = 100") {
  std::mt19937_64 rng(31);
  for (const auto& model : spin_models()) {
    const auto traj = integrate(model, random_sphere_point(rng), 100.0);
    CHECK(traj.max_drift < 1e-9);
    double worst = 0.0;
    for (const auto& q : traj.states) worst = std::max(worst, std::abs(q.norm() - 1.0));
    CHECK(worst < 1e-9);
  }
  const auto closed = integrate(MeanFieldModel::ddm(2.0, 1.0, 0.0), State(0.6, 0.0, 0.8), 100.0);
  CHECK(closed.max_drift < 1e-9);
}

TEST_CASE("fully broken DDM relaxes to the stable broken point") {
  const double g = 2.0, omega = 1.0, kappa = 3.0;
  const double mz = -std::sqrt((kappa * kappa - (g * g - omega * omega)) / (kappa * kappa + omega * omega));
  const auto traj = integrate(MeanFieldModel::ddm(g, omega, kappa), State(1.0, 0.0, 0.0), 50.0);
  const State end = traj.states.back();
  CHECK(std::abs(end(2) - mz) < 1e-6);
  CHECK(MeanFieldModel::ddm(g, omega, kappa).rhs(end).norm() < 1e-6);
}

TEST_CASE("PT-symmetric DDM orbit is periodic and self-conjugate") {
  const auto model = MeanFieldModel::ddm(2.0, 1.0, 1.7);
  const State q0 = State(0.3, 0.5, 0.2).normalized();
  const auto ret = closest_return(model, q0, 0.5, 100.0);
  CHECK(ret.distance < 1e-3);
  CHECK(ret.time > 0.5);
  const auto pair = pt_conjugate_trajectory(model, q0, 100.0);
  CHECK(pair.attractor_distance < 1e-3);
}

TEST_CASE("LMG orbit below threshold is self-conjugate") {
  const auto pair = pt_conjugate_trajectory(MeanFieldModel::lmg(1.0, 0.8), State(0.3, 0.5, 0.2).normalized(), 100.0);
  CHECK(pair.attractor_distance < 1e-3);
}

TEST_CASE("fully broken DDM maps its attractor onto the repeller") {
  const auto pair = pt_conjugate_trajectory(MeanFieldModel::ddm(2.0, 1.0, 3.0), State(1.0, 0.0, 0.0), 100.0);
  CHECK(pair.attractor_distance > 0.5);
}

TEST_CASE("mapped trajectory solves the conjugated flow") {
  const auto model = MeanFieldModel::ddm(2.0, 1.0, 1.7);
  const auto pair = pt_conjugate_trajectory(model, State(0.3, 0.5, 0.2).normalized(), 10.0);
  const Eigen::Matrix3d p = model.parity();
  const auto& fw = pair.forward;
  const auto& mp = pair.mapped;
  // mapped(s) = P q(T - s) on the shared sample grid.
  for (std::size_t i = 0; i < mp.times.size(); ++i) {
    const double s = mp.times[i];
    const auto j = static_cast<std::size_t>(std::lround((10.0 - s) / 0.01));
    REQUIRE(j < fw.states.size());
    CHECK(std::abs(fw.times[j] - (10.0 - s)) < 1e-9);
    CHECK((mp.states[i] - p * fw.states[j]).norm() < 1e-8);
  }
}

TEST_CASE("distinct initial conditions keep distinct orbit amplitudes") {
  const auto model = MeanFieldModel::ddm(2.0, 1.0, 1.7);
  auto amplitude = [&](const State& q0) {
    const auto traj = integrate(model, q0, 100.0);
    double lo = 1.0, hi = -1.0;
    for (const auto& q : traj.states) {
      lo = std::min(lo, q(2));
      hi = std::max(hi, q(2));
    }
    return hi - lo;
  };
  const double a = amplitude(State(0.3, 0.5, 0.2).normalized());
  const double b = amplitude(State(0.3, 0.5, 0.3).normalized());
  CHECK(std::abs(a - b) > 1e-3);
}

TEST_CASE("polyline Hausdorff distance") {
  const std::vector<State> a{State(0, 0, 0), State(1, 0, 0)};
  const std::vector<State> b{State(0, 1, 0), State(1, 1, 0)};
  CHECK(polyline_hausdorff(a, b) == doctest::Approx(1.0));
  const std::vector<State> c{State(0, 0, 0), State(0.5, 0, 0), State(1, 0, 0)};
  CHECK(polyline_hausdorff(a, c) < 1e-15);
}
